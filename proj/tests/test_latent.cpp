#include <doctest.h>

#include <cmath>
#include <random>

#include "latbma/errors.hpp"
#include "latbma/latent.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace latbma;

namespace {
const double kHalfNormalMean = std::sqrt(2.0 / M_PI);
}

TEST_SUITE("latent") {

TEST_CASE("probit sites") {
  CHECK(update_z_probit(0.0, 1.0).m == doctest::Approx(kHalfNormalMean).epsilon(1e-15));
  CHECK(update_z_probit(0.0, 0.0).m == doctest::Approx(-kHalfNormalMean).epsilon(1e-15));
  const LatentSite deep = update_z_probit(-8.0, 1.0);
  CHECK(std::isfinite(deep.m));
  CHECK(deep.m > 0.0);
  CHECK(deep.m < 0.2);
  const auto q = oracle::trunc_moments(-8.0, 1.0, 0.0, kInf);
  CHECK(std::abs(deep.m - q.mean) <= 1e-6 * q.mean);
  CHECK_THROWS_AS(update_z_probit(0.0, 0.5), DataError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-9.0, 9.0);
  for (int t = 0; t < 200; ++t) {
    const double mu = U(rng);
    CHECK(update_z_probit(mu, 1.0).m == -update_z_probit(-mu, 0.0).m);
    const LatentSite s1 = update_z_probit(mu, 1.0);
    CHECK(s1.s <= 1.0);
    if (mu < 5.0) CHECK(s1.s < 1.0);
    CHECK(std::isfinite(s1.entropy));
    CHECK(std::isfinite(s1.log_q_at_mean));
  }
}

TEST_CASE("tobit sites") {
  const LatentSite obs = update_z_tobit(0.3, 1.0, 5.0, 0.0);
  CHECK(obs.observed);
  CHECK(obs.m == 5.0);
  CHECK(obs.s == 0.0);
  CHECK(obs.entropy == 0.0);
  const LatentSite cen = update_z_tobit(0.0, 1.0, 0.0, 0.0);
  CHECK(cen.m == doctest::Approx(-kHalfNormalMean).epsilon(1e-15));
  CHECK(cen.s == doctest::Approx(1.0 - 2.0 / M_PI).epsilon(1e-14));
  const LatentSite c2 = update_z_tobit(2.0, 0.5, 0.0, 0.0);
  const auto q = oracle::trunc_moments(2.0, 0.5, -kInf, 0.0);
  CHECK(std::abs(c2.m - q.mean) <= 1e-8 * std::abs(q.mean));
  CHECK(std::abs(c2.s - q.variance) <= 1e-8 * q.variance);
  CHECK(std::abs(c2.entropy - q.entropy) <= 1e-8 * std::abs(q.entropy));
  CHECK(c2.s < 0.5);
  CHECK_THROWS_AS(update_z_tobit(0.0, 1.0, -1.0, 0.0), DataError);
}

TEST_CASE("star sites") {
  const LatentSite zero = update_z_star(0.0, 1.0, 0.0);
  CHECK(zero.m == doctest::Approx(-kHalfNormalMean).epsilon(1e-15));
  const double y = 1000.0;
  const LatentSite big = update_z_star(std::log(y), 1.0, y);
  const double lo = std::log(y), hi = std::log(y + 1.0);
  CHECK(big.m >= lo);
  CHECK(big.m < hi);
  CHECK(big.s <= (hi - lo) * (hi - lo) / 4.0);
  const auto q = oracle::trunc_moments(std::log(y), 1.0, lo, hi);
  CHECK(std::abs(big.m - q.mean) <= 1e-8 * q.mean);
  CHECK(std::abs(big.s - q.variance) <= 1e-8 * q.variance);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const double yy = std::floor(std::exp(10.0 * U(rng)));
    const double xi = std::exp(-2.0 + 3.0 * U(rng));
    const double mu = -4.0 + 14.0 * U(rng);
    const LatentSite s = update_z_star(mu, xi, yy);
    CHECK(std::isfinite(s.m));
    CHECK(std::isfinite(s.entropy));
    CHECK(s.s < xi);
    if (yy > 0) {
      CHECK(s.m >= std::log(yy));
      CHECK(s.m < std::log(yy + 1.0));
    } else {
      CHECK(s.m < 0.0);
    }
  }
}

TEST_CASE("pln gradient matches finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double h = 1e-5;
  for (int t = 0; t < 200; ++t) {
    const double y = std::floor(std::exp(std::log(10001.0) * U(rng)) - 1.0);
    const double eta = std::log(y + 1.0) - 2.0 + 4.0 * U(rng);
    const double tau = std::exp(-2.0 + 4.0 * U(rng));
    const double m = std::log(y + 1.0) - 2.0 + 4.0 * U(rng);
    const double s = 0.01 + 2.0 * U(rng);
    const Eigen::Vector2d g = pln_site_gradient(y, eta, tau, m, s);
    const double fdm = (oracle::pln_elbo(y, eta, tau, m + h, s) - oracle::pln_elbo(y, eta, tau, m - h, s)) / (2 * h);
    const double fds = (oracle::pln_elbo(y, eta, tau, m, s + h) - oracle::pln_elbo(y, eta, tau, m, s - h)) / (2 * h);
    CAPTURE(y);
    CAPTURE(m);
    CAPTURE(s);
    CHECK(std::abs(g[0] - fdm) <= 1e-5 * std::max(1.0, std::abs(fdm)));
    CHECK(std::abs(g[1] - fds) <= 1e-5 * std::max(1.0, std::abs(fds)));
    CHECK(pln_site_objective(y, eta, tau, m, s) == doctest::Approx(oracle::pln_elbo(y, eta, tau, m, s)).epsilon(1e-13));
  }
}

TEST_CASE("pln newton against the grid oracle") {
  struct Case {
    double y, eta, tau;
  };
  for (const Case c : {Case{0, 0, 1}, Case{5, 1, 2}, Case{1000, std::log(1000.0), 1}, Case{3, -2, 0.5},
                       Case{10000, 6, 10}}) {
    const PlnSiteParams r = update_z_pln(c.y, c.eta, c.tau, PlnSiteParams{});
    const auto o = oracle::pln_site(c.y, c.eta, c.tau);
    CAPTURE(c.y);
    CHECK(r.converged);
    CHECK(std::abs(r.m - o.m) < 1e-4);
    CHECK(std::abs(r.s - o.s) < 1e-4);
    CHECK(r.s > 0.0);
    CHECK(r.s < 1.0 / c.tau);
  }
  const PlnSiteParams big = update_z_pln(1000, std::log(1000.0), 1.0, PlnSiteParams{});
  CHECK(std::abs(big.m - std::log(1000.0)) < 0.01);
}

TEST_CASE("pln newton from awkward starts") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double y = std::floor(std::exp(9.0 * U(rng)) - 1.0);
    const double eta = -3.0 + 12.0 * U(rng);
    const double tau = std::exp(-3.0 + 6.0 * U(rng));
    PlnSiteParams init;
    init.m = -10.0 + 30.0 * U(rng);
    init.s = std::exp(-8.0 + 10.0 * U(rng));
    const PlnSiteParams r = update_z_pln(y, eta, tau, init);
    CHECK(std::isfinite(r.m));
    CHECK(r.s > 0.0);
    CHECK(r.converged);
  }
}

TEST_CASE("expected loglik") {
  CHECK(expected_loglik(Family::kProbit, 1.0, 0.3, 0.2) == 0.0);
  CHECK(expected_loglik(Family::kPln, 0.0, 0.0, 0.0) == -1.0);
  CHECK(expected_loglik(Family::kPln, 3.0, 1.0, 0.5) ==
        doctest::Approx(3.0 - std::exp(1.25) - std::log(6.0)).epsilon(1e-15));
}

TEST_CASE("field update is thread-count independent") {
  const Dataset d = testing_support::sim_data(Family::kPln, 5000, 3, 4);
  LatentField f1 = init_latent(d), f4 = init_latent(d);
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(d.n(), 0.2) + d.X.col(0);
  LatentConfig c1, c4;
  c4.threads = 4;
  update_latent(d, eta, 0.3, f1, c1);
  update_latent(d, eta, 0.3, f4, c4);
  CHECK(f1.m == f4.m);
  CHECK(f1.s == f4.s);
  CHECK(f1.entropy == f4.entropy);
  CHECK(f1.exp_loglik == f4.exp_loglik);
  CHECK(f1.ss_m == f4.ss_m);
  CHECK(f1.unconverged_sites == 0);
}

}  // TEST_SUITE
