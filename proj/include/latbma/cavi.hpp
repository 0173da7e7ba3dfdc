#pragma once

#include <functional>

#include <Eigen/Dense>

#include "latbma/data.hpp"
#include "latbma/latent.hpp"
#include "latbma/model_space.hpp"

namespace latbma {

struct VariationalState;

struct FitConfig {
  double g = 0.0;  // 0 means g = n
  double tol = 1e-6;
  int max_iter = 10000;
  // Anderson mixing depth on (mu_alpha, mu_beta, log xi); PLN fits only, 0 disables.
  int anderson_depth = 5;
  LatentConfig latent;
  // Called after every full sweep (theta block, then latent sites).
  std::function<void(const VariationalState&, int)> on_sweep;

  double g_for(int n) const { return g > 0.0 ? g : static_cast<double>(n); }
  void validate() const;
};

struct VariationalState {
  ModelIndex model;
  bool sigma2_fixed = false;
  int n = 0;

  double mu_alpha = 0.0;
  double omega_alpha = 1.0;
  Eigen::VectorXd mu_beta;
  Eigen::MatrixXd Omega_beta;
  double omega_scale = 0.0;  // Omega_beta = omega_scale * G_k^{-1}
  double a = 1.0;
  double b = 1.0;

  LatentField latent;

  // Bookkeeping that ties the blocks together.
  Eigen::VectorXd xtm;        // X_k' m
  double rss = 0.0;           // sum (m_i - mu_alpha - x_i' mu_beta)^2
  double quad_beta = 0.0;     // mu_beta' G_k mu_beta
  double log_det_gram = 0.0;  // log |G_k|

  int iterations = 0;
  bool converged = false;

  int p_k() const { return static_cast<int>(mu_beta.size()); }
  double tau() const { return sigma2_fixed ? 1.0 : a / b; }
  double xi() const { return sigma2_fixed ? 1.0 : b / a; }
};

// q(alpha), q(beta) and q(sigma^2) in that order, with RSS taken from
// sufficient statistics of the latent field (X columns are centered):
//   RSS = sum (m - mean m)^2 + n (mean m - mu_alpha)^2 - 2 mu_beta' X_k'm + mu_beta' G_k mu_beta.
// xtm must hold X_k' m for the current latent means.
void update_theta(VariationalState& state, const SubmodelFactor& factor, double g);

// The same without the (a, b) step; the caller supplies the RSS afterwards.
void update_theta_moments(VariationalState& state, const SubmodelFactor& factor, double g);
void update_sigma2(VariationalState& state, double g);

double rss_from_stats(const VariationalState& state, const SubmodelFactor& factor);

double master_elbo(const VariationalState& state, double g);

// Largest relative change over (mu_alpha, mu_beta, b/a); |new - old| / max(|old|, 1e-8).
double max_relative_change(const VariationalState& before, const VariationalState& after);

// Dense copy of the selected design columns.
Eigen::MatrixXd select_columns(const Dataset& data, const ModelIndex& model);

struct CaviResult {
  VariationalState state;
  int iterations = 0;
  bool converged = false;
};

// Alternates the theta block and the latent sites until the monitored theta
// vector moves by at most tol. A warm start donates its latent field and
// q(sigma^2), and its theta block as well when it belongs to the same model.
CaviResult run_cavi(const Dataset& data, const CrossProducts& cp, const ModelIndex& model,
                    const FitConfig& config, const VariationalState* warm = nullptr);

}  // namespace latbma
