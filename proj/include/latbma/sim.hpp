#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "latbma/cavi.hpp"
#include "latbma/data.hpp"

namespace latbma {

struct SimDesign {
  Family family = Family::kProbit;
  int n = 1000;
  int p = 10;
  double rho = 0.25;  // corr(x_j, x_k) = rho^|j-k|
  Eigen::VectorXd beta_true;
  double alpha_true = 0.0;
  double sigma2_true = 1.0;  // ignored for probit
  double y_lower = 0.0;
  std::uint64_t seed = 1;
  std::uint64_t replicate = 0;
  std::string preset;

  void validate() const;
};

// "sparse": (0.5, -0.5, 0.25, -0.25, 0, ..., 0)
// "dense":  (0.5, -0.5, 0.25, -0.25, 0.15, ..., 0.15)
Eigen::VectorXd beta_preset(std::string_view name, int p);

// Design with the preset coefficients and family defaults: alpha = 0,
// sigma^2 = 0.1 for PLN and 1 otherwise, y_L = 0.
SimDesign make_design(Family family, int n, int p, std::string_view preset, std::uint64_t seed,
                      std::uint64_t replicate = 0);

struct SimResult {
  SimDesign design;
  Eigen::MatrixXd raw_X;
  Eigen::VectorXd y;
  Dataset data;
  ModelIndex truth;
  int resamples = 0;
};

// Draws X ~ N(0, Sigma) by rows, z = alpha + X beta + eps and y from the
// link. A draw that violates the existence conditions is redrawn once from
// seed + 1; a second failure is a DataError.
SimResult simulate(const SimDesign& design);

double brier(const Eigen::VectorXd& pips, const ModelIndex& truth);

struct MetricsReport {
  int n = 0;
  double brier = 0.0;
  bool true_model_top = false;
  double rmse_alpha = 0.0;
  double rmse_beta = 0.0;
  double rmse_sigma2 = 0.0;
  double var_alpha = 0.0;   // omega_alpha
  double var_beta = 0.0;    // mean of diag(Omega_beta)
  double var_sigma2 = 0.0;  // inverse-gamma variance, 0 when fixed
};

// Parameter recovery of a fit of the full model against the design truth.
MetricsReport consistency_metrics(const VariationalState& state, const SimDesign& design);

// Averages reports that share the same n, preserving first-seen order of n.
// RMSEs are pooled as root mean squares; true_model_top is left false.
std::vector<MetricsReport> average_by_n(const std::vector<MetricsReport>& reports);

}  // namespace latbma
