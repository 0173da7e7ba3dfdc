// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance            all criteria
//   acceptance 3 7        selected criteria

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "latbma/errors.hpp"
#include "latbma/explorer.hpp"
#include "latbma/sim.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace latbma;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1 and 2

struct ProbitCase {
  Dataset data;
  VariationalState state;
  double g;
};

std::vector<ProbitCase>& probit_cases() {
  static std::vector<ProbitCase> cases = [] {
    std::vector<ProbitCase> out;
    for (int n : {100, 1000})
      for (int p : {1, 5})
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
          ProbitCase c;
          c.data = testing_support::sim_data(Family::kProbit, n, p, 100 + seed);
          const CrossProducts cp = cross_products(c.data);
          FitConfig cfg;
          c.g = cfg.g_for(n);
          c.state = run_cavi(c.data, cp, ModelIndex::full_model(p), cfg).state;
          out.push_back(std::move(c));
        }
    return out;
  }();
  return cases;
}

Outcome criterion1() {
  double worst = 0.0;
  int converged = 0;
  for (const auto& c : probit_cases()) {
    const double e = master_elbo(c.state, c.g), v = log_vbc(c.state, c.g);
    worst = std::max(worst, std::abs(v - e) / std::max(1.0, std::abs(e)));
    converged += c.state.converged;
  }
  return {worst <= 1e-6 && converged == 20,
          fmt("probit VBC vs ELBO over 20 datasets: worst scaled gap %.3g (tol 1e-6), %d/20 converged", worst,
              converged)};
}

Outcome criterion2() {
  double worst = 0.0;
  for (const auto& c : probit_cases()) {
    const Eigen::MatrixXd Xk = select_columns(c.data, c.state.model);
    const Eigen::VectorXd eta = (Xk * c.state.mu_beta).array() + c.state.mu_alpha;
    long double log_p = 0.0L, lik = 0.0L;
    for (int i = 0; i < c.data.n(); ++i) {
      const long double r = static_cast<long double>(c.state.latent.m[i]) - eta[i];
      log_p += -0.5L * std::log(2.0L * 3.141592653589793238462643383279502884L) - 0.5L * r * r;
      lik += oracle::log_normal_cdf(c.data.y[i] == 1.0 ? eta[i] : -eta[i]);
    }
    const long double lhs = log_p - c.state.latent.log_q_at_mean;
    worst = std::max(worst, static_cast<double>(std::abs(lhs - lik)));
  }
  return {worst <= 1e-8, fmt("sum log p(m|theta) - log q(m) vs probit log-likelihood: worst |diff| %.3g (tol 1e-8)",
                             worst)};
}

// ---------------------------------------------------------------- 3

Outcome criterion3() {
  int violations = 0, ratio_checked = 0;
  double max_ratio = 0.0, min_ratio = 1.0;
  for (double beta : {0.3, 0.8})
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
      SimDesign d = make_design(Family::kProbit, 2000, 1, "sparse", 300 + seed);
      d.beta_true[0] = beta;
      const SimResult sim = simulate(d);
      const CrossProducts cp = cross_products(sim.data);
      FitConfig cfg;
      const ModelIndex full = ModelIndex::full_model(1);
      const double vb = run_cavi(sim.data, cp, full, cfg).state.mu_beta[0];
      const NullCache cache = build_null_cache(sim.data, cp, cfg);
      const double avb = run_avb(sim.data, cp, full, cache, cfg).state.mu_beta[0];
      bool ok = (std::signbit(vb) == std::signbit(avb)) && std::abs(avb) <= std::abs(vb);
      if (std::abs(vb) > 1e-3) {
        const double ratio = avb / vb;
        ++ratio_checked;
        ok = ok && ratio > 0.0 && ratio < 1.0;
        max_ratio = std::max(max_ratio, ratio);
        min_ratio = std::min(min_ratio, ratio);
      }
      violations += !ok;
    }
  return {violations == 0, fmt("AVB shrinkage on 50 datasets: %d violations; ratio range [%.4f, %.4f] over %d fits",
                               violations, min_ratio, max_ratio, ratio_checked)};
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  struct Case {
    double mu, var, lo, hi;
  };
  std::vector<Case> cases;
  const std::pair<double, double> parents[] = {{0.0, 1.0}, {-2.5, 0.25}, {3.0, 4.0}, {1.2, 0.04}};
  const double widths[] = {1e-3, 1e-2, 0.1, 1.0, 4.0};
  for (const auto& [mu, var] : parents) {
    const double sd = std::sqrt(var);
    for (int k = -8; k <= 8; ++k) {
      cases.push_back({mu, var, mu + sd * k, kInf});
      cases.push_back({mu, var, -kInf, mu + sd * k});
      for (double w : widths) {
        const double lo = std::clamp(k - 0.5 * w, -8.0, 8.0 - w);
        cases.push_back({mu, var, mu + sd * lo, mu + sd * (lo + w)});
      }
    }
  }
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  while (cases.size() < 500) {
    const double mu = -5.0 + 10.0 * U(rng), var = std::exp(-4.0 + 6.0 * U(rng)), sd = std::sqrt(var);
    const double w = std::pow(10.0, -3.0 + 3.0 * U(rng));
    const double lo = -8.0 + (16.0 - w) * U(rng);
    cases.push_back({mu, var, mu + sd * lo, mu + sd * (lo + w)});
  }

  double worst_mean = 0, worst_var = 0, worst_mass = 0;
  int nonfinite = 0;
  for (const auto& c : cases) {
    const auto r = trunc_norm_moments(c.mu, c.var, c.lo, c.hi);
    const auto q = oracle::trunc_moments(c.mu, c.var, c.lo, c.hi);
    for (double v : {r.mean, r.variance, r.log_mass, r.entropy, r.lambda, r.chi, r.log_density_at_mean})
      nonfinite += !std::isfinite(v);
    worst_mean = std::max(worst_mean, std::abs(r.mean - q.mean) / std::max(std::abs(q.mean), std::sqrt(c.var)));
    worst_var = std::max(worst_var, std::abs(r.variance - q.variance) / q.variance);
    worst_mass = std::max(worst_mass, std::abs(r.log_mass - q.log_mass) / std::max(1.0, std::abs(q.log_mass)));
  }
  const bool ok = cases.size() == 500 && nonfinite == 0 && worst_mean <= 1e-8 && worst_var <= 1e-8 &&
                  worst_mass <= 1e-8;
  return {ok, fmt("truncated normal vs quadrature on %zu cases: mean %.3g, variance %.3g, log mass %.3g "
                  "(tol 1e-8), %d non-finite",
                  cases.size(), worst_mean, worst_var, worst_mass, nonfinite)};
}

// ---------------------------------------------------------------- 5

Outcome criterion5() {
  auto f = [](long double y, long double eta, long double tau, long double m, long double s) {
    return y * m - std::exp(m + 0.5L * s) - 0.5L * tau * (m - eta) * (m - eta) - 0.5L * tau * s + 0.5L * std::log(s);
  };
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const long double h = 1e-5L;
  double worst_grad = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double y = std::floor(std::exp(std::log(10001.0) * U(rng)) - 1.0);
    const double eta = std::log(y + 1.0) - 2.0 + 4.0 * U(rng);
    const double tau = std::exp(-2.0 + 4.0 * U(rng));
    const double m = std::log(y + 1.0) - 2.0 + 4.0 * U(rng);
    const double s = 0.01 + 2.0 * U(rng);
    const Eigen::Vector2d g = pln_site_gradient(y, eta, tau, m, s);
    const double fdm = static_cast<double>((f(y, eta, tau, m + h, s) - f(y, eta, tau, m - h, s)) / (2 * h));
    const double fds = static_cast<double>((f(y, eta, tau, m, s + h) - f(y, eta, tau, m, s - h)) / (2 * h));
    worst_grad = std::max(worst_grad, std::abs(g[0] - fdm) / std::max(1.0, std::abs(fdm)));
    worst_grad = std::max(worst_grad, std::abs(g[1] - fds) / std::max(1.0, std::abs(fds)));
  }
  double worst_newton = 0.0;
  int unconverged = 0;
  for (int t = 0; t < 50; ++t) {
    const double y = std::floor(std::exp(std::log(10001.0) * U(rng)) - 1.0);
    const double eta = std::log(y + 1.0) - 3.0 + 6.0 * U(rng);
    const double tau = std::exp(-2.0 + 4.0 * U(rng));
    const PlnSiteParams r = update_z_pln(y, eta, tau, PlnSiteParams{});
    const auto o = oracle::pln_site(y, eta, tau);
    unconverged += !r.converged;
    worst_newton = std::max({worst_newton, std::abs(r.m - o.m), std::abs(r.s - o.s)});
  }
  return {worst_grad <= 1e-5 && worst_newton <= 1e-3 && unconverged == 0,
          fmt("PLN gradient vs central differences (200 points): %.3g (tol 1e-5); Newton vs grid oracle "
              "(50 points): %.3g (tol 1e-3); %d unconverged",
              worst_grad, worst_newton, unconverged)};
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
  double worst = 0.0;
  int fits = 0;
  for (Family fam : {Family::kProbit, Family::kTobit, Family::kStar})
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const int n = seed % 2 ? 500 : 2000;
      const Dataset d = testing_support::sim_data(fam, n, 6, 600 + seed, seed % 3 ? "sparse" : "dense");
      const CrossProducts cp = cross_products(d);
      FitConfig cfg;
      const double g = cfg.g_for(n);
      double prev = -INFINITY;
      cfg.on_sweep = [&](const VariationalState& s, int) {
        const double e = master_elbo(s, g);
        worst = std::max(worst, prev - e);
        prev = e;
      };
      const ModelIndex model(6, seed % 2 ? 0x3Fu : 0x15u);
      run_cavi(d, cp, model, cfg);
      ++fits;
    }
  return {worst <= 1e-8 && fits == 30,
          fmt("largest ELBO decrease over %d probit/tobit/STAR fits: %.3g (tol 1e-8)", fits, std::max(worst, 0.0))};
}

// ---------------------------------------------------------------- 7

double enumerate_brier(const SimResult& sim, Method method, double* seconds = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const CrossProducts cp = cross_products(sim.data);
  FitConfig cfg;
  EvaluatorOptions opt;
  opt.method = method;
  opt.prior = ModelPriorSpec::from_expected_size(sim.data.p(), 5.0);
  Evaluator ev(sim.data, cp, cfg, opt);  // AVB builds its null cache here
  const EnumerationTable t = enumerate_models(ev);
  const double b = brier(summarize(t).pip, sim.truth);
  if (seconds) *seconds = seconds_since(t0);
  return b;
}

Outcome criterion7() {
  bool ok = true;
  std::string detail = "sparse p=10 VB-VBC enumeration, 10 replicates, mean Brier n=500 -> n=10000:";
  double grand = 0.0;
  for (Family fam : {Family::kProbit, Family::kTobit, Family::kStar, Family::kPln}) {
    double mean[2] = {0, 0};
    const int ns[2] = {500, 10000};
    for (int k = 0; k < 2; ++k) {
      for (std::uint64_t rep = 0; rep < 10; ++rep)
        mean[k] += enumerate_brier(simulate(make_design(fam, ns[k], 10, "sparse", 700, rep)), Method::kVb);
      mean[k] /= 10.0;
    }
    grand += mean[1] / 4.0;
    const bool fam_ok = mean[1] <= mean[0] && mean[1] <= 0.02;
    ok = ok && fam_ok;
    detail += fmt(" %s %.4f -> %.4f%s;", to_string(fam), mean[0], mean[1], fam_ok ? "" : " (fails)");
    std::fflush(stdout);
  }
  detail += fmt(" grand mean at n=10000 %.4f (bound 0.02 per family)", grand);
  return {ok, detail};
}

// ---------------------------------------------------------------- 8

Outcome criterion8() {
  bool ok = true;
  std::string detail = "STAR n=50000 p=10 enumeration, AVB/VB time and Brier:";
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    const SimResult sim = simulate(make_design(Family::kStar, 50000, 10, "sparse", 800, rep));
    double t_vb = 0, t_avb = 0;
    const double b_vb = enumerate_brier(sim, Method::kVb, &t_vb);
    const double b_avb = enumerate_brier(sim, Method::kAvb, &t_avb);
    const double ratio = t_avb / t_vb;
    const bool rep_ok = ratio <= 0.1 && std::abs(b_avb - b_vb) <= 0.02;
    ok = ok && rep_ok;
    detail += fmt(" rep%d %.1fs/%.1fs=%.3f, Brier %.4f vs %.4f%s;", static_cast<int>(rep), t_avb, t_vb, ratio, b_avb,
                  b_vb, rep_ok ? "" : " (fails)");
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 9

Outcome criterion9() {
  bool ok = true;
  std::string detail = "p=3 probit n=2000, 50000 kept, TV(visits, enumeration):";
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SimDesign d = make_design(Family::kProbit, 2000, 3, "sparse", 900 + seed);
    d.beta_true << 0.3, 0.05, 0.0;  // a posterior with mass on several models
    const SimResult sim = simulate(d);
    const CrossProducts cp = cross_products(sim.data);
    EvaluatorOptions opt;
    opt.prior = ModelPriorSpec::from_expected_size(3, 1.5);
    Evaluator ev(sim.data, cp, FitConfig{}, opt);
    const EnumerationTable table = enumerate_models(ev);
    ChainConfig cc;
    cc.n_keep = 50000;
    cc.burn_in = 2000;
    cc.seed = seed;
    const ExplorationTrace trace = explore(sim.data, cp, FitConfig{}, opt, cc);
    const double tv = total_variation(model_distribution(table), model_distribution(trace));
    double top = 0.0;
    for (double p : table.probabilities) top = std::max(top, p);
    ok = ok && tv <= 0.05;
    detail += fmt(" seed%d %.4f (largest model probability %.3f);", static_cast<int>(seed), tv, top);
  }
  return {ok, detail + " tol 0.05"};
}

// ---------------------------------------------------------------- 10

Outcome criterion10() {
  bool ok = true;
  std::string detail = "full-model RMSE(beta) and mean posterior variance, n=1000 -> n=100000:";
  for (Family fam : {Family::kProbit, Family::kTobit, Family::kStar, Family::kPln}) {
    std::vector<MetricsReport> reports;
    for (int n : {1000, 100000})
      for (std::uint64_t rep = 0; rep < 2; ++rep) {
        const SimResult sim = simulate(make_design(fam, n, 10, "sparse", 1000, rep));
        const CrossProducts cp = cross_products(sim.data);
        const auto r = run_cavi(sim.data, cp, ModelIndex::full_model(10), FitConfig{});
        reports.push_back(consistency_metrics(r.state, sim.design));
      }
    const auto avg = average_by_n(reports);
    const bool fam_ok = avg[1].rmse_beta < avg[0].rmse_beta && avg[1].var_beta < avg[0].var_beta;
    ok = ok && fam_ok;
    detail += fmt(" %s rmse %.4f -> %.4f, var %.3g -> %.3g%s;", to_string(fam), avg[0].rmse_beta, avg[1].rmse_beta,
                  avg[0].var_beta, avg[1].var_beta, fam_ok ? "" : " (fails)");
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 11

Outcome criterion11() {
  double worst = 0.0;
  for (int p : {3, 8, 12}) {
    const double p0 = p / 2.0;
    for (const ModelPriorSpec spec : {ModelPriorSpec{1.0, 1.0}, ModelPriorSpec{1.0, (p - p0) / p0}}) {
      long double total = 0.0L;
      for (std::uint64_t bits = 0; bits < (1ull << p); ++bits)
        total += std::exp(static_cast<long double>(log_model_prior(ModelIndex(p, bits), spec)));
      worst = std::max(worst, static_cast<double>(std::abs(total - 1.0L)));
    }
  }
  return {worst <= 1e-12, fmt("beta-binomial prior mass over all masks, p in {3, 8, 12}: worst |sum - 1| %.3g", worst)};
}

// ---------------------------------------------------------------- 12

Outcome criterion12() {
  Eigen::MatrixXd X(6, 2);
  X << 0.1, 1.0, -0.4, 0.3, 0.9, -1.1, 1.3, 0.2, -0.2, 0.7, 0.5, -0.6;
  struct Case {
    Family family;
    std::vector<double> y;
    const char* expect;
  };
  const Case cases[] = {{Family::kProbit, {1, 1, 1, 1, 1, 1}, "all outcomes equal"},
                        {Family::kTobit, {0, 0, 2.5, 0, 0, 0}, "fewer than two uncensored"},
                        {Family::kStar, {0, 0, 0, 7, 0, 0}, "fewer than two positive"}};
  int rejected = 0;
  for (const auto& c : cases) {
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(c.y.data(), 6);
    try {
      prepare_dataset(X, y, c.family);
    } catch (const DataError& e) {
      rejected += std::string(e.what()).find(c.expect) != std::string::npos;
    } catch (...) {
    }
  }
  return {rejected == 3, fmt("degenerate probit/tobit/STAR datasets rejected with a data error: %d/3", rejected)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4,  criterion5,  criterion6,
      criterion7, criterion8, criterion9, criterion10, criterion11, criterion12};
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::stoi(argv[k]));

  int failures = 0;
  for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) {
    if (!selected.empty() && !selected.count(k)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d: %s  %s  [%.1fs]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
