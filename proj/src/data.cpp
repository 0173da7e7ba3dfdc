#include "latbma/data.hpp"

#include <cmath>

#include "latbma/errors.hpp"

namespace latbma {

const char* to_string(Family family) {
  switch (family) {
    case Family::kProbit: return "probit";
    case Family::kTobit: return "tobit";
    case Family::kStar: return "star";
    case Family::kPln: return "pln";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "probit") return Family::kProbit;
  if (name == "tobit") return Family::kTobit;
  if (name == "star") return Family::kStar;
  if (name == "pln") return Family::kPln;
  throw ParameterError("unknown family '" + std::string(name) +
                       "' (expected probit, tobit, star or pln)");
}

namespace {

bool is_count(double v) { return v >= 0.0 && std::floor(v) == v; }

void validate_outcome(const Eigen::VectorXd& y, Family family, double y_lower) {
  const Eigen::Index n = y.size();
  switch (family) {
    case Family::kProbit: {
      int ones = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw DataError("probit outcomes must be 0 or 1");
        ones += y[i] == 1.0;
      }
      if (ones == 0 || ones == n)
        throw DataError("probit posterior does not exist: all outcomes equal");
      break;
    }
    case Family::kTobit: {
      int uncensored = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] < y_lower)
          throw DataError("tobit outcome below the censoring bound at row " + std::to_string(i));
        uncensored += y[i] > y_lower;
      }
      if (uncensored < 2)
        throw DataError("tobit posterior does not exist: fewer than two uncensored observations");
      break;
    }
    case Family::kStar:
    case Family::kPln: {
      int positive = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!is_count(y[i]))
          throw DataError(std::string(to_string(family)) +
                          " outcomes must be non-negative integers");
        positive += y[i] > 0.0;
      }
      if (family == Family::kStar && positive < 2)
        throw DataError("star posterior does not exist: fewer than two positive counts");
      break;
    }
  }
}

}  // namespace

Dataset prepare_dataset(const Eigen::MatrixXd& raw_X, const Eigen::VectorXd& y, Family family,
                        const PrepareOptions& options) {
  const Eigen::Index n = raw_X.rows();
  const Eigen::Index p = raw_X.cols();
  if (y.size() != n)
    throw ParameterError("outcome length " + std::to_string(y.size()) +
                         " does not match design rows " + std::to_string(n));
  if (n < 2) throw ParameterError("need at least two observations");
  if (p > ModelIndex::kMaxCovariates)
    throw ParameterError("at most 64 candidate covariates are supported");
  if (!options.names.empty() && static_cast<Eigen::Index>(options.names.size()) != p)
    throw ParameterError("covariate name count does not match design columns");
  if (!raw_X.allFinite()) throw DataError("design matrix contains missing or non-finite values");
  if (!y.allFinite()) throw DataError("outcome contains missing or non-finite values");

  validate_outcome(y, family, options.y_lower);

  Dataset d;
  d.family = family;
  d.y = y;
  d.y_lower = options.y_lower;
  d.column_means = raw_X.colwise().mean().transpose();
  d.X = raw_X.rowwise() - d.column_means.transpose();
  for (Eigen::Index j = 0; j < p; ++j) {
    const double scale = raw_X.col(j).cwiseAbs().maxCoeff();
    const double spread = d.X.col(j).cwiseAbs().maxCoeff();
    if (spread <= 1e-12 * std::max(scale, 1.0))
      throw DataError("covariate column " + std::to_string(j) + " is constant");
  }
  if (options.names.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) d.names.push_back("x" + std::to_string(j + 1));
  } else {
    d.names = options.names;
  }
  return d;
}

CrossProducts cross_products(const Dataset& data) {
  CrossProducts cp;
  const Eigen::Index p = data.X.cols();
  cp.G = Eigen::MatrixXd::Zero(p, p);
  cp.G.selfadjointView<Eigen::Lower>().rankUpdate(data.X.transpose());
  cp.G = cp.G.selfadjointView<Eigen::Lower>();
  return cp;
}

Eigen::MatrixXd select_gram(const CrossProducts& cp, const std::vector<int>& idx) {
  return cp.G(idx, idx);
}

bool gram_full_rank(const Eigen::MatrixXd& gram) {
  if (gram.rows() == 0) return true;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double largest = d.cwiseAbs().maxCoeff();
  if (!(largest > 0.0)) return false;
  return (d.array() > kRankTolerance * largest).all();
}

SubmodelFactor::SubmodelFactor(const CrossProducts& cp, const ModelIndex& model, double ridge)
    : idx_(model.included()) {
  gram_ = select_gram(cp, idx_);
  const int k = dim();
  if (k == 0) return;
  if (!gram_full_rank(gram_))
    throw SingularSelectionError("selected columns are rank deficient: " + model.to_string());
  Eigen::MatrixXd work = gram_;
  if (ridge > 0.0) work.diagonal().array() += ridge;
  llt_.compute(work);
  if (llt_.info() != Eigen::Success) {
    // One retry with a small diagonal jitter relative to the mean pivot.
    jitter_ = 1e-8 * gram_.trace() / k;
    work.diagonal().array() += jitter_;
    llt_.compute(work);
    if (llt_.info() != Eigen::Success)
      throw SingularSelectionError("cholesky of selected gram failed: " + model.to_string());
  }
  if (ridge > 0.0 || jitter_ > 0.0) gram_ = work;
  double ld = 0.0;
  for (int i = 0; i < k; ++i) ld += std::log(llt_.matrixLLT()(i, i));
  log_det_ = 2.0 * ld;
}

Eigen::VectorXd SubmodelFactor::solve(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw ParameterError("solve: vector length does not match factor");
  if (dim() == 0) return Eigen::VectorXd();
  return llt_.solve(v);
}

Eigen::MatrixXd SubmodelFactor::inverse() const {
  if (dim() == 0) return Eigen::MatrixXd();
  return llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

}  // namespace latbma
