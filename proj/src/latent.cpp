#include "latbma/latent.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "latbma/errors.hpp"
#include "latbma/parallel.hpp"

namespace latbma {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

LatentSite from_moments(const TruncNormMoments& t) {
  LatentSite site;
  site.m = t.mean;
  site.s = t.variance;
  site.entropy = t.entropy;
  site.log_q_at_mean = t.log_density_at_mean;
  site.log_mass = t.log_mass;
  return site;
}

LatentSite pln_site(const PlnSiteParams& p) {
  LatentSite site;
  site.m = p.m;
  site.s = p.s;
  site.entropy = 0.5 * (kLog2Pi + 1.0 + std::log(p.s));
  site.log_q_at_mean = -0.5 * (kLog2Pi + std::log(p.s));
  return site;
}

// Accepts a trial point unless the objective drops by more than round-off.
bool no_worse(double f_new, double f_old, double scale) {
  return f_new >= f_old - 16.0 * kEps * scale;
}

double pln_scale(double y, double eta, double tau, double m, double s) {
  const double d = m - eta;
  return std::abs(y * m) + std::exp(m + 0.5 * s) + 0.5 * tau * (d * d + s) +
         std::abs(0.5 * std::log(s)) + 1.0;
}

}  // namespace

LatentSite update_z_probit(double mu, double y) {
  if (y == 1.0) return from_moments(trunc_norm_moments(mu, 1.0, 0.0, kInf));
  if (y == 0.0) return from_moments(trunc_norm_moments(mu, 1.0, -kInf, 0.0));
  throw DataError("probit outcome must be 0 or 1");
}

LatentSite update_z_tobit(double mu, double xi, double y, double y_lower) {
  if (!(xi > 0.0)) throw ParameterError("tobit latent variance must be positive");
  if (y < y_lower) throw DataError("tobit outcome below the censoring bound");
  if (y > y_lower) {
    LatentSite site;
    site.m = y;
    site.observed = true;
    return site;
  }
  return from_moments(trunc_norm_moments(mu, xi, -kInf, y_lower));
}

LatentSite update_z_star(double mu, double xi, double y) {
  if (!(xi > 0.0)) throw ParameterError("star latent variance must be positive");
  if (y == 0.0) return from_moments(trunc_norm_moments(mu, xi, -kInf, 0.0));
  return from_moments(trunc_norm_moments(mu, xi, std::log(y), std::log1p(y)));
}

double pln_site_objective(double y, double eta, double tau, double m, double s) {
  const double d = m - eta;
  return y * m - std::exp(m + 0.5 * s) - 0.5 * tau * d * d - 0.5 * tau * s + 0.5 * std::log(s);
}

Eigen::Vector2d pln_site_gradient(double y, double eta, double tau, double m, double s) {
  const double e = std::exp(m + 0.5 * s);
  return {y - e - tau * (m - eta), -0.5 * e - 0.5 * tau + 0.5 / s};
}

PlnSiteParams update_z_pln(double y, double eta, double tau, const PlnSiteParams& init,
                           const PlnSolverConfig& config) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("pln site needs tau > 0");
  if (!(init.s > 0.0) || !std::isfinite(init.s) || !std::isfinite(init.m))
    throw ParameterError("pln site needs a finite start with s > 0");

  double m = init.m, v = std::log(init.s);
  PlnSiteParams out;

  auto stationary = [&](double mm, double ss) {
    const double e = std::exp(mm + 0.5 * ss);
    const double gm = y - e - tau * (mm - eta);
    const double gs = -0.5 * e - 0.5 * tau + 0.5 / ss;
    const double tol_m = std::max(config.grad_tol, 4.0 * kEps * (y + e + std::abs(tau * (mm - eta))));
    const double tol_s = std::max(config.grad_tol, 4.0 * kEps * (0.5 * e + 0.5 * tau + 0.5 / ss));
    return std::abs(gm) <= tol_m && std::abs(gs) <= tol_s;
  };

  for (int it = 0; it < config.max_iter; ++it) {
    double s = std::exp(v);
    if (stationary(m, s)) {
      out.converged = true;
      break;
    }
    ++out.newton_iters;

    {
      const double e = std::exp(m + 0.5 * s);
      const double g = y - e - tau * (m - eta);
      double step = g / (e + tau);
      const double f0 = pln_site_objective(y, eta, tau, m, s);
      const double scale = pln_scale(y, eta, tau, m, s);
      for (int h = 0; h < 60; ++h, step *= 0.5) {
        const double f1 = pln_site_objective(y, eta, tau, m + step, s);
        if (std::isfinite(f1) && no_worse(f1, f0, scale)) {
          m += step;
          break;
        }
      }
    }
    {
      const double e = std::exp(m + 0.5 * s);
      const double g = 0.5 - 0.5 * s * (e + tau);
      const double h2 = -0.5 * s * (e + tau) - 0.25 * s * s * e;
      double step = -g / h2;
      const double f0 = pln_site_objective(y, eta, tau, m, s);
      const double scale = pln_scale(y, eta, tau, m, s);
      for (int h = 0; h < 60; ++h, step *= 0.5) {
        const double f1 = pln_site_objective(y, eta, tau, m, std::exp(v + step));
        if (std::isfinite(f1) && no_worse(f1, f0, scale)) {
          v += step;
          break;
        }
      }
    }
  }
  out.m = m;
  out.s = std::exp(v);
  if (!out.converged) out.converged = stationary(out.m, out.s);
  return out;
}

double expected_loglik(Family family, double y, double m, double s) {
  if (family != Family::kPln) return 0.0;
  return y * m - std::exp(m + 0.5 * s) - std::lgamma(y + 1.0);
}

LatentField init_latent(const Dataset& data) {
  const int n = data.n();
  LatentField f;
  f.m.resize(n);
  f.s = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    const double y = data.y[i];
    switch (data.family) {
      case Family::kProbit: f.m[i] = 2.0 * y - 1.0; break;
      case Family::kTobit: f.m[i] = y > data.y_lower ? y : data.y_lower - 0.5; break;
      case Family::kStar:
        f.m[i] = y == 0.0 ? -0.5 : 0.5 * (std::log(y) + std::log1p(y));
        break;
      case Family::kPln: f.m[i] = std::log(y + 0.5); break;
    }
  }
  f.mean_m = f.m.mean();
  f.ss_m = (f.m.array() - f.mean_m).square().sum();
  f.sum_s = f.s.sum();
  return f;
}

namespace {

struct BlockSums {
  double sum_s = 0.0, entropy = 0.0, log_q = 0.0, exp_ll = 0.0, ll = 0.0;
  long newton = 0;
  int unconverged = 0;
};

constexpr int kBlock = 2048;

}  // namespace

void update_latent(const Dataset& data, const Eigen::VectorXd& eta, double xi, LatentField& field,
                   const LatentConfig& config) {
  const int n = data.n();
  if (eta.size() != n || field.n() != n)
    throw ParameterError("latent update: length mismatch");
  if (!(xi > 0.0) || !std::isfinite(xi)) throw NumericalError("latent variance is not positive");
  const double tau = 1.0 / xi;
  const int blocks = (n + kBlock - 1) / kBlock;
  std::vector<BlockSums> sums(blocks);

  parallel_for(blocks, config.threads, 1, [&](int b0, int b1) {
    for (int b = b0; b < b1; ++b) {
      BlockSums acc;
      const int lo = b * kBlock, hi = std::min(n, lo + kBlock);
      for (int i = lo; i < hi; ++i) {
        const double y = data.y[i];
        LatentSite site;
        switch (data.family) {
          case Family::kProbit: site = update_z_probit(eta[i], y); break;
          case Family::kTobit: site = update_z_tobit(eta[i], xi, y, data.y_lower); break;
          case Family::kStar: site = update_z_star(eta[i], xi, y); break;
          case Family::kPln: {
            PlnSiteParams start{field.m[i], field.s[i] > 0.0 ? field.s[i] : 1.0};
            const PlnSiteParams p = update_z_pln(y, eta[i], tau, start, config.pln);
            acc.newton += p.newton_iters;
            acc.unconverged += !p.converged;
            site = pln_site(p);
            const double lg = std::lgamma(y + 1.0);
            acc.exp_ll += y * p.m - std::exp(p.m + 0.5 * p.s) - lg;
            acc.ll += y * p.m - std::exp(p.m) - lg;
            break;
          }
        }
        field.m[i] = site.m;
        field.s[i] = site.s;
        acc.sum_s += site.s;
        acc.entropy += site.entropy;
        if (!site.observed) acc.log_q += site.log_q_at_mean;
      }
      sums[b] = acc;
    }
  });

  BlockSums total;
  for (const auto& b : sums) {
    total.sum_s += b.sum_s;
    total.entropy += b.entropy;
    total.log_q += b.log_q;
    total.exp_ll += b.exp_ll;
    total.ll += b.ll;
    total.newton += b.newton;
    total.unconverged += b.unconverged;
  }
  field.sum_s = total.sum_s;
  field.entropy = total.entropy;
  field.log_q_at_mean = total.log_q;
  field.exp_loglik = total.exp_ll;
  field.loglik_at_mean = total.ll;
  field.newton_iters += total.newton;
  field.unconverged_sites = total.unconverged;
  field.mean_m = field.m.mean();
  field.ss_m = (field.m.array() - field.mean_m).square().sum();
  if (!std::isfinite(field.ss_m) || !std::isfinite(field.entropy) || !std::isfinite(field.log_q_at_mean))
    throw NumericalError("latent update produced a non-finite value");
}

}  // namespace latbma
