#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "latbma/model_space.hpp"

namespace latbma {

enum class Family { kProbit, kTobit, kStar, kPln };

const char* to_string(Family family);
Family parse_family(std::string_view name);

// Probit fixes the latent variance at one; the other families estimate it.
inline bool sigma2_fixed(Family family) { return family == Family::kProbit; }

struct Dataset {
  Eigen::MatrixXd X;  // n x p, centered columns
  Eigen::VectorXd y;
  Family family = Family::kProbit;
  double y_lower = 0.0;  // tobit censoring bound
  Eigen::VectorXd column_means;
  std::vector<std::string> names;

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
};

struct PrepareOptions {
  double y_lower = 0.0;
  std::vector<std::string> names;  // defaults to x1..xp
};

// Centers the columns of raw_X and validates the outcome for the family,
// including the conditions under which the posterior exists:
//   probit  not all outcomes equal
//   tobit   at least two uncensored outcomes
//   star    at least two positive counts
Dataset prepare_dataset(const Eigen::MatrixXd& raw_X, const Eigen::VectorXd& y,
                        Family family, const PrepareOptions& options = {});

// X'X, shared by every model. Columns are centered so X'1 = 0.
struct CrossProducts {
  Eigen::MatrixXd G;
};

CrossProducts cross_products(const Dataset& data);

// Selected rows/columns of G for a model.
Eigen::MatrixXd select_gram(const CrossProducts& cp, const std::vector<int>& idx);

// Relative pivot threshold for the rank test.
inline constexpr double kRankTolerance = 1e-10;

// True when the pivoted LDLT of the (symmetric) matrix has all pivots above
// kRankTolerance times the largest one.
bool gram_full_rank(const Eigen::MatrixXd& gram);

// Cholesky factor of G_k = X_k'X_k (+ ridge I). The null model gives an
// empty factor with log-determinant 0.
class SubmodelFactor {
 public:
  SubmodelFactor() = default;
  SubmodelFactor(const CrossProducts& cp, const ModelIndex& model, double ridge = 0.0);

  int dim() const { return static_cast<int>(gram_.rows()); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const std::vector<int>& indices() const { return idx_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd inverse() const;
  double log_det() const { return log_det_; }
  // Diagonal jitter added to rescue a failed factorization (0 normally).
  double jitter() const { return jitter_; }

 private:
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  std::vector<int> idx_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

}  // namespace latbma
