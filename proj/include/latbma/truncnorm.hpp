#pragma once

#include <limits>

namespace latbma {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// exp(x^2) erfc(x) for x >= 0, accurate to a few ulp in the deep tail.
double erfcx(double x);

double norm_pdf(double x);
double norm_cdf(double x);
// log Phi(x), finite down to x of about -1e150.
double norm_logcdf(double x);

// Moments of N(mu, var) restricted to (lower, upper).
//
// Standardized bounds l = (lower - mu)/sd and u = (upper - mu)/sd give
//   kappa  = Phi(u) - Phi(l)
//   lambda = (phi(l) - phi(u)) / kappa
//   chi    = 1 + (l phi(l) - u phi(u)) / kappa - lambda^2
// with mean = mu + sd lambda and variance = var chi. Intervals in the upper
// half are reflected into the lower half, far tails use erfcx, and narrow
// intervals (half-width <= 0.25) expand the density around the midpoint so
// the variance never comes out of a 1 - 1 cancellation.
struct TruncNormMoments {
  double mean = 0.0;
  double variance = 0.0;
  double log_mass = 0.0;  // log kappa
  double entropy = 0.0;
  double lambda = 0.0;
  double chi = 1.0;
  // log density of the truncated distribution at its own mean
  double log_density_at_mean = 0.0;
};

TruncNormMoments trunc_norm_moments(double mu, double var, double lower, double upper);

}  // namespace latbma
