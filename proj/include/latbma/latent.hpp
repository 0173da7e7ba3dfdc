#pragma once

#include <Eigen/Dense>

#include "latbma/data.hpp"
#include "latbma/truncnorm.hpp"

namespace latbma {

// One site of q(z). log_q_at_mean is log q(m) and is not defined for observed
// tobit sites (s = 0), which are flagged and skipped by the evidence sums.
struct LatentSite {
  double m = 0.0;
  double s = 0.0;
  double entropy = 0.0;
  double log_q_at_mean = 0.0;
  double log_mass = 0.0;
  bool observed = false;
};

LatentSite update_z_probit(double mu, double y);
LatentSite update_z_tobit(double mu, double xi, double y, double y_lower);
LatentSite update_z_star(double mu, double xi, double y);

struct PlnSiteParams {
  double m = 0.0;
  double s = 1.0;
  bool converged = false;
  int newton_iters = 0;
};

struct PlnSolverConfig {
  int max_iter = 50;
  double grad_tol = 1e-10;
};

// ELBO_i = y m - exp(m + s/2) - tau/2 (m - eta)^2 - tau s/2 + log(s)/2, up to constants.
double pln_site_objective(double y, double eta, double tau, double m, double s);
// (d/dm, d/ds) of pln_site_objective.
Eigen::Vector2d pln_site_gradient(double y, double eta, double tau, double m, double s);

// Coordinate-wise Newton: a guarded step in m, then one in v = log s, repeated
// until both gradients vanish. Gradients are accepted once they fall below
// grad_tol or below the round-off level of their largest term, whichever is
// larger; for counts in the thousands the latter dominates.
PlnSiteParams update_z_pln(double y, double eta, double tau, const PlnSiteParams& init,
                           const PlnSolverConfig& config = {});

// E_q[log p(y | z)]: zero for the deterministic links.
double expected_loglik(Family family, double y, double m, double s);

struct LatentConfig {
  PlnSolverConfig pln;
  int threads = 1;
};

// All n sites plus the sums that the theta update, the ELBO and the VBC need.
struct LatentField {
  Eigen::VectorXd m;
  Eigen::VectorXd s;

  double mean_m = 0.0;
  double ss_m = 0.0;  // sum (m_i - mean_m)^2
  double sum_s = 0.0;
  double entropy = 0.0;         // sum H[q(z_i)]
  double log_q_at_mean = 0.0;   // sum log q_i(m_i) over non-observed sites
  double exp_loglik = 0.0;      // sum E_q log p(y_i | z_i)
  double loglik_at_mean = 0.0;  // sum log p(y_i | z_i = m_i)
  long newton_iters = 0;
  int unconverged_sites = 0;

  int n() const { return static_cast<int>(m.size()); }
};

// Starting values: probit 2y - 1; tobit y or y_L - 0.5; STAR the middle of
// its interval or -0.5 at zero; PLN log(y + 0.5). Every s_i starts at 1.
LatentField init_latent(const Dataset& data);

// Refreshes every site given eta_i = mu_alpha + x_i' mu_beta and the latent
// variance xi (= b/a, or 1 for probit).
void update_latent(const Dataset& data, const Eigen::VectorXd& eta, double xi, LatentField& field,
                   const LatentConfig& config = {});

}  // namespace latbma
