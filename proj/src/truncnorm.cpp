#include "latbma/truncnorm.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>

#include "latbma/errors.hpp"

namespace latbma {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

struct Standardized {
  double lambda;
  double chi;
  double log_kappa;
};

// Both bounds <= 0 (lower may be -inf). Phi(x) = erfcx(-x/sqrt2) exp(-x^2/2) / 2
// keeps the ratio phi/kappa finite however deep the tail.
Standardized lower_tail(double l, double u) {
  const double eu = erfcx(-u / kSqrt2);
  double r = 0.0, r_minus_1 = -1.0, D = eu, l_r = 0.0;
  if (std::isfinite(l)) {
    const double arg = 0.5 * (u - l) * (l + u);  // <= 0
    r = std::exp(arg);
    r_minus_1 = std::expm1(arg);
    D = eu - r * erfcx(-l / kSqrt2);
    l_r = l * r;
  }
  const double K = kSqrt2OverPi / D;  // phi(u) / kappa
  Standardized s;
  s.lambda = r_minus_1 * K;
  s.chi = 1.0 + (l_r - u) * K - s.lambda * s.lambda;
  s.log_kappa = std::log(0.5 * D) - 0.5 * u * u;
  return s;
}

// l < 0 < u with a width large enough that kappa is not small.
Standardized straddle(double l, double u) {
  const double kappa = 0.5 * (std::erf(u / kSqrt2) - (std::isfinite(l) ? std::erf(l / kSqrt2) : -1.0));
  const double pl = std::isfinite(l) ? norm_pdf(l) : 0.0;
  const double pu = norm_pdf(u);
  const double lpl = std::isfinite(l) ? l * pl : 0.0;
  Standardized s;
  s.lambda = (pl - pu) / kappa;
  s.chi = 1.0 + (lpl - u * pu) / kappa - s.lambda * s.lambda;
  s.log_kappa = std::log(kappa);
  return s;
}

// Interval [c - h, c + h]. The density is proportional to exp(-c t - t^2/2)
// on t in [-h, h]; expanding via the Hermite generating function
//   exp(-c t - t^2/2) = sum_j He_j(c) (-t)^j / j!
// gives the moments of t as rapidly converging series while |c| h is small.
Standardized narrow(double c, double h) {
  // b_j = He_j(c) h^j / j!
  double b_prev = 1.0, b = c * h;
  double s0 = 2.0, s1 = 0.0, s2 = 2.0 / 3.0;  // j = 0 contributions
  for (int j = 1; j < 200; ++j) {
    const double term = (j % 2 == 0) ? b : -b;
    if (j % 2 == 0) {
      s0 += term * 2.0 / (j + 1);
      s2 += term * 2.0 / (j + 3);
    } else {
      s1 += term * 2.0 / (j + 2);
    }
    const double b_next = (c * h * b - h * h * b_prev) / (j + 1);
    b_prev = b;
    b = b_next;
    if (j > 4 && std::abs(b) + std::abs(b_prev) < 1e-18 * std::abs(s0)) break;
  }
  const double r1 = s1 / s0;
  Standardized s;
  s.lambda = c + h * r1;
  s.chi = h * h * (s2 / s0 - r1 * r1);
  s.log_kappa = -0.5 * c * c - kLogSqrt2Pi + std::log(h * s0);
  return s;
}

Standardized standardized_truncation(double l, double u) {
  if (!std::isfinite(l) && !std::isfinite(u)) return {0.0, 1.0, 0.0};
  bool flip = false;
  if (!std::isfinite(u) || (std::isfinite(l) && l + u > 0.0)) {
    flip = true;
    std::tie(l, u) = std::pair(-u, -l);
  }
  Standardized s;
  const double h = 0.5 * (u - l);
  const double c = 0.5 * (u + l);
  if (std::isfinite(l) && h <= 0.25 && std::abs(c) * h <= 1.5)
    s = narrow(c, h);
  else if (u <= 0.0)
    s = lower_tail(l, u);
  else
    s = straddle(l, u);
  if (flip) s.lambda = -s.lambda;
  return s;
}

}  // namespace

double erfcx(double x) {
  if (x < 5.0 / kSqrt2) return std::exp(x * x) * std::erfc(x);
  // erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...))))
  // evaluated with the modified Lentz algorithm.
  constexpr double tiny = 1e-300;
  double f = x, C = x, D = 0.0;
  for (int k = 1; k < 500; ++k) {
    const double a = 0.5 * k;
    D = x + a * D;
    if (D == 0.0) D = tiny;
    D = 1.0 / D;
    C = x + a / C;
    if (C == 0.0) C = tiny;
    const double delta = C * D;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / (f * std::sqrt(std::numbers::pi));
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double norm_logcdf(double x) {
  if (x > -5.0) return std::log(norm_cdf(x));
  return std::log(0.5 * erfcx(-x / kSqrt2)) - 0.5 * x * x;
}

TruncNormMoments trunc_norm_moments(double mu, double var, double lower, double upper) {
  if (!(var > 0.0) || !std::isfinite(var))
    throw ParameterError("truncated normal needs a positive finite variance");
  if (!std::isfinite(mu)) throw ParameterError("truncated normal needs a finite location");
  if (!(lower < upper))
    throw ParameterError("truncation interval is empty: lower=" + std::to_string(lower) +
                         " upper=" + std::to_string(upper));
  const double sd = std::sqrt(var);
  const double l = (lower - mu) / sd;
  const double u = (upper - mu) / sd;
  const Standardized s = standardized_truncation(l, u);

  TruncNormMoments out;
  out.lambda = s.lambda;
  out.chi = s.chi;
  out.mean = mu + sd * s.lambda;
  out.variance = var * s.chi;
  out.log_mass = s.log_kappa;
  // (l phi(l) - u phi(u)) / kappa = chi - 1 + lambda^2, so
  // H = log kappa + log sqrt(2 pi e var) + (chi - 1 + lambda^2)/2.
  out.entropy = s.log_kappa + 0.5 * std::log(2.0 * std::numbers::pi * var) +
                0.5 * (s.chi + s.lambda * s.lambda);
  out.log_density_at_mean = -kLogSqrt2Pi - 0.5 * std::log(var) -
                            0.5 * s.lambda * s.lambda - s.log_kappa;
  return out;
}

}  // namespace latbma
