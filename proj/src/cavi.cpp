#include "latbma/cavi.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "latbma/errors.hpp"

namespace latbma {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void require_finite(double v, const char* term, int iteration = -1) {
  if (std::isfinite(v)) return;
  std::string msg = std::string("non-finite ") + term;
  if (iteration >= 0) msg += " at iteration " + std::to_string(iteration);
  throw NumericalError(msg);
}

double rel_change(double before, double after) {
  return std::abs(after - before) / std::max(std::abs(before), 1e-8);
}

// A mixed step is rejected when it grows the plain residual by more than this.
constexpr double kMixGrowth = 4.0;

Eigen::VectorXd pack_theta(const VariationalState& s) {
  Eigen::VectorXd v(s.mu_beta.size() + 2);
  v[0] = s.mu_alpha;
  v.segment(1, s.mu_beta.size()) = s.mu_beta;
  v[v.size() - 1] = std::log(s.xi());
  return v;
}

// Type-II Anderson mixing for the map x -> g(x).
class Anderson {
 public:
  explicit Anderson(int depth) : depth_(depth) {}

  void reset() {
    dF_.clear();
    dG_.clear();
    has_prev_ = false;
  }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    const Eigen::VectorXd f = g - x;
    if (has_prev_ && f.size() == f_prev_.size()) {
      dF_.push_back(f - f_prev_);
      dG_.push_back(g - g_prev_);
      if (static_cast<int>(dF_.size()) > depth_) {
        dF_.erase(dF_.begin());
        dG_.erase(dG_.begin());
      }
    } else {
      dF_.clear();
      dG_.clear();
    }
    f_prev_ = f;
    g_prev_ = g;
    has_prev_ = true;
    if (dF_.empty()) return g;

    const int k = static_cast<int>(dF_.size());
    Eigen::MatrixXd F(f.size(), k), G(f.size(), k);
    for (int j = 0; j < k; ++j) {
      F.col(j) = dF_[j];
      G.col(j) = dG_[j];
    }
    const Eigen::VectorXd gamma = F.completeOrthogonalDecomposition().solve(f);
    Eigen::VectorXd out = g - G * gamma;
    const Eigen::Index last = out.size() - 1;
    if (!out.allFinite() || std::abs(out[last] - g[last]) > 1.0) {
      reset();
      return g;
    }
    return out;
  }

 private:
  int depth_;
  std::vector<Eigen::VectorXd> dF_, dG_;
  Eigen::VectorXd f_prev_, g_prev_;
  bool has_prev_ = false;
};

}  // namespace

void FitConfig::validate() const {
  if (g < 0.0 || !std::isfinite(g)) throw ParameterError("g must be positive");
  if (!(tol > 0.0)) throw ParameterError("tol must be positive");
  if (max_iter < 1) throw ParameterError("max_iter must be at least 1");
  if (latent.pln.max_iter < 1) throw ParameterError("pln newton cap must be at least 1");
}

void update_theta_moments(VariationalState& s, const SubmodelFactor& factor, double g) {
  const int n = s.n;
  const int pk = factor.dim();
  const double delta = g / (1.0 + g);
  const double xi = s.xi();

  s.omega_alpha = xi / n;
  s.mu_alpha = s.latent.mean_m;
  if (pk > 0) {
    s.mu_beta = delta * factor.solve(s.xtm);
    s.omega_scale = delta * xi;
    s.Omega_beta = s.omega_scale * factor.inverse();
    s.quad_beta = s.mu_beta.dot(factor.gram() * s.mu_beta);
  } else {
    s.mu_beta.resize(0);
    s.Omega_beta.resize(0, 0);
    s.omega_scale = 0.0;
    s.quad_beta = 0.0;
  }
  s.log_det_gram = factor.log_det();
  require_finite(s.mu_alpha, "mu_alpha");
  require_finite(s.quad_beta, "mu_beta");
}

void update_sigma2(VariationalState& s, double g) {
  if (s.sigma2_fixed) {
    s.a = s.b = 1.0;
    return;
  }
  const int pk = s.p_k();
  const double tr_gO = s.omega_scale * pk;
  s.a = 0.5 * (s.n + pk);
  s.b = 0.5 * (s.rss + s.latent.sum_s + s.n * s.omega_alpha + s.quad_beta / g +
               (1.0 + 1.0 / g) * tr_gO);
  require_finite(s.b, "b");
  if (!(s.b > 0.0)) throw NumericalError("inverse-gamma rate collapsed to zero");
}

double rss_from_stats(const VariationalState& s, const SubmodelFactor& factor) {
  const double d = s.latent.mean_m - s.mu_alpha;
  double rss = s.latent.ss_m + s.n * d * d;
  if (factor.dim() > 0) rss += -2.0 * s.mu_beta.dot(s.xtm) + s.quad_beta;
  return std::max(rss, 0.0);
}

void update_theta(VariationalState& s, const SubmodelFactor& factor, double g) {
  update_theta_moments(s, factor, g);
  s.rss = rss_from_stats(s, factor);
  update_sigma2(s, g);
}

double master_elbo(const VariationalState& s, double g) {
  const int n = s.n;
  const int pk = s.p_k();
  const double tau = s.tau();
  const double tr_gO = s.omega_scale * pk;
  const double log_det_omega = pk > 0 ? pk * std::log(s.omega_scale) - s.log_det_gram : 0.0;
  const double e_log_sigma2 = s.sigma2_fixed ? 0.0 : std::log(s.b) - boost::math::digamma(s.a);

  double elbo = s.latent.exp_loglik;
  elbo += -0.5 * (n + pk) * kLog2Pi - 0.5 * (n + pk) * e_log_sigma2;
  elbo += -0.5 * tau * (s.latent.sum_s + n * s.omega_alpha + tr_gO + s.rss);
  elbo += -0.5 * pk * std::log(g) + 0.5 * s.log_det_gram - 0.5 * tau / g * (tr_gO + s.quad_beta);
  elbo += s.latent.entropy;
  elbo += 0.5 * (kLog2Pi + 1.0 + std::log(s.omega_alpha));
  elbo += 0.5 * (pk * (kLog2Pi + 1.0) + log_det_omega);
  if (!s.sigma2_fixed) {
    elbo += -e_log_sigma2;
    elbo += s.a + std::log(s.b) + std::lgamma(s.a) - (1.0 + s.a) * boost::math::digamma(s.a);
  }
  return elbo;
}

double max_relative_change(const VariationalState& before, const VariationalState& after) {
  double worst = rel_change(before.mu_alpha, after.mu_alpha);
  if (before.mu_beta.size() == after.mu_beta.size()) {
    for (Eigen::Index j = 0; j < after.mu_beta.size(); ++j)
      worst = std::max(worst, rel_change(before.mu_beta[j], after.mu_beta[j]));
  } else {
    for (Eigen::Index j = 0; j < after.mu_beta.size(); ++j)
      worst = std::max(worst, rel_change(0.0, after.mu_beta[j]));
  }
  worst = std::max(worst, rel_change(before.xi(), after.xi()));
  return worst;
}

Eigen::MatrixXd select_columns(const Dataset& data, const ModelIndex& model) {
  return data.X(Eigen::all, model.included());
}

CaviResult run_cavi(const Dataset& data, const CrossProducts& cp, const ModelIndex& model,
                    const FitConfig& config, const VariationalState* warm) {
  config.validate();
  if (model.p_total() != data.p()) throw ParameterError("model mask length does not match data");
  if (!is_admissible(model, cp, data.n()))
    throw SingularSelectionError("model is not admissible: " + model.to_string());

  const double g = config.g_for(data.n());
  const SubmodelFactor factor(cp, model);
  const Eigen::MatrixXd Xk = select_columns(data, model);

  VariationalState s;
  s.model = model;
  s.sigma2_fixed = sigma2_fixed(data.family);
  s.n = data.n();
  s.mu_beta = Eigen::VectorXd::Zero(model.size());
  if (warm != nullptr && warm->n == s.n && warm->latent.n() == s.n) {
    s.latent = warm->latent;
    s.a = warm->a;
    s.b = warm->b;
    if (warm->model == model) {
      s.mu_alpha = warm->mu_alpha;
      s.mu_beta = warm->mu_beta;
    }
  } else {
    s.latent = init_latent(data);
  }
  if (s.sigma2_fixed) s.a = s.b = 1.0;

  CaviResult out;
  Eigen::VectorXd eta(s.n);
  const bool mix = data.family == Family::kPln && config.anderson_depth > 0;
  Anderson anderson(config.anderson_depth);
  double last_residual = INFINITY;
  Eigen::VectorXd fallback;
  for (int it = 1; it <= config.max_iter; ++it) {
    const VariationalState before_theta_only = [&] {
      VariationalState t;
      t.sigma2_fixed = s.sigma2_fixed;
      t.mu_alpha = s.mu_alpha;
      t.mu_beta = s.mu_beta;
      t.a = s.a;
      t.b = s.b;
      return t;
    }();

    if (Xk.cols() > 0) s.xtm = Xk.transpose() * s.latent.m;
    else s.xtm.resize(0);
    update_theta_moments(s, factor, g);
    eta.setConstant(s.mu_alpha);
    if (Xk.cols() > 0) eta.noalias() += Xk * s.mu_beta;
    s.rss = (s.latent.m - eta).squaredNorm();
    update_sigma2(s, g);

    const double change = max_relative_change(before_theta_only, s);
    if (mix && change > config.tol) {
      // The latent field was solved at before_theta_only, so this pair is (x, g(x)).
      // a only settles after the first sweep.
      Eigen::VectorXd next;
      if (it == 1) {
        anderson.reset();
        last_residual = change;
      } else if (fallback.size() > 0 && change > kMixGrowth * last_residual) {
        anderson.reset();
        next = std::move(fallback);
        last_residual = INFINITY;
      } else {
        last_residual = change;
        const Eigen::VectorXd plain = pack_theta(s);
        next = anderson.step(pack_theta(before_theta_only), plain);
        if (next == plain) next.resize(0);
        else fallback = plain;
      }
      if (next.size() > 0) {
        const int pk = s.p_k();
        s.mu_alpha = next[0];
        s.mu_beta = next.segment(1, pk);
        s.b = s.a * std::exp(next[pk + 1]);
        if (pk > 0) s.quad_beta = s.mu_beta.dot(factor.gram() * s.mu_beta);
        eta.setConstant(s.mu_alpha);
        if (Xk.cols() > 0) eta.noalias() += Xk * s.mu_beta;
      } else {
        fallback.resize(0);
      }
    }

    update_latent(data, eta, s.xi(), s.latent, config.latent);
    s.rss = (s.latent.m - eta).squaredNorm();
    if (Xk.cols() > 0) s.xtm = Xk.transpose() * s.latent.m;
    require_finite(s.rss, "residual sum of squares", it);

    s.iterations = it;
    if (config.on_sweep) config.on_sweep(s, it);
    if (change <= config.tol) {
      s.converged = true;
      break;
    }
  }
  out.iterations = s.iterations;
  out.converged = s.converged;
  out.state = std::move(s);
  return out;
}

}  // namespace latbma
