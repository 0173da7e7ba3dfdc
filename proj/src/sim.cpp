#include "latbma/sim.hpp"

#include <cmath>
#include <map>
#include <random>

#include "latbma/errors.hpp"
#include "latbma/rng.hpp"

namespace latbma {

void SimDesign::validate() const {
  if (n < 2) throw ParameterError("simulation needs n >= 2");
  if (p < 1 || p > ModelIndex::kMaxCovariates) throw ParameterError("simulation needs 1 <= p <= 64");
  if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("rho must lie in [0, 1)");
  if (beta_true.size() != p) throw ParameterError("beta_true length must equal p");
  if (family != Family::kProbit && !(sigma2_true > 0.0))
    throw ParameterError("sigma2_true must be positive");
}

Eigen::VectorXd beta_preset(std::string_view name, int p) {
  if (p < 1) throw ParameterError("preset needs p >= 1");
  const double head[] = {0.5, -0.5, 0.25, -0.25};
  double tail;
  if (name == "sparse") tail = 0.0;
  else if (name == "dense") tail = 0.15;
  else throw ParameterError("unknown beta preset '" + std::string(name) + "' (sparse or dense)");
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = j < 4 ? head[j] : tail;
  return beta;
}

SimDesign make_design(Family family, int n, int p, std::string_view preset, std::uint64_t seed,
                      std::uint64_t replicate) {
  SimDesign d;
  d.family = family;
  d.n = n;
  d.p = p;
  d.beta_true = beta_preset(preset, p);
  d.sigma2_true = family == Family::kPln ? 0.1 : 1.0;
  d.seed = seed;
  d.replicate = replicate;
  d.preset = std::string(preset);
  return d;
}

namespace {

bool draw(const SimDesign& design, std::uint64_t seed, SimResult& out) {
  const int n = design.n, p = design.p;
  Eigen::MatrixXd sigma(p, p);
  for (int j = 0; j < p; ++j)
    for (int k = 0; k < p; ++k) sigma(j, k) = std::pow(design.rho, std::abs(j - k));
  const Eigen::MatrixXd L = sigma.llt().matrixL();

  RngStream cov_rng = make_stream(seed, design.replicate, StreamPurpose::kCovariates);
  RngStream noise_rng = make_stream(seed, design.replicate, StreamPurpose::kNoise);
  RngStream out_rng = make_stream(seed, design.replicate, StreamPurpose::kOutcome);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  Eigen::MatrixXd Z(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) Z(i, j) = std_normal(cov_rng);
  out.raw_X = Z * L.transpose();

  const double sd = design.family == Family::kProbit ? 1.0 : std::sqrt(design.sigma2_true);
  const Eigen::VectorXd lin = (out.raw_X * design.beta_true).array() + design.alpha_true;
  out.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double z = lin[i] + sd * std_normal(noise_rng);
    switch (design.family) {
      case Family::kProbit: out.y[i] = z > 0.0 ? 1.0 : 0.0; break;
      case Family::kTobit: out.y[i] = std::max(design.y_lower, z); break;
      case Family::kStar: out.y[i] = std::floor(std::exp(z)); break;
      case Family::kPln: {
        std::poisson_distribution<long long> pois(std::exp(z));
        out.y[i] = static_cast<double>(pois(out_rng));
        break;
      }
    }
  }
  try {
    PrepareOptions opt;
    opt.y_lower = design.y_lower;
    out.data = prepare_dataset(out.raw_X, out.y, design.family, opt);
  } catch (const DataError&) {
    return false;
  }
  return true;
}

}  // namespace

SimResult simulate(const SimDesign& design) {
  design.validate();
  SimResult out;
  out.design = design;
  std::vector<int> active;
  for (int j = 0; j < design.p; ++j)
    if (design.beta_true[j] != 0.0) active.push_back(j);
  out.truth = ModelIndex::from_indices(design.p, active);
  if (draw(design, design.seed, out)) return out;
  out.resamples = 1;
  if (draw(design, design.seed + 1, out)) return out;
  throw DataError("simulated outcomes violate the existence conditions twice in a row");
}

double brier(const Eigen::VectorXd& pips, const ModelIndex& truth) {
  if (pips.size() != truth.p_total()) throw ParameterError("brier: length mismatch");
  if (pips.size() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < pips.size(); ++j) {
    const double d = pips[j] - (truth.contains(static_cast<int>(j)) ? 1.0 : 0.0);
    total += d * d;
  }
  return total / static_cast<double>(pips.size());
}

MetricsReport consistency_metrics(const VariationalState& state, const SimDesign& design) {
  MetricsReport r;
  r.n = state.n;
  r.rmse_alpha = std::abs(state.mu_alpha - design.alpha_true);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(design.p);
  const auto idx = state.model.included();
  for (std::size_t k = 0; k < idx.size(); ++k) beta[idx[k]] = state.mu_beta[static_cast<Eigen::Index>(k)];
  r.rmse_beta = std::sqrt((beta - design.beta_true).squaredNorm() / design.p);
  r.var_alpha = state.omega_alpha;
  r.var_beta = state.p_k() > 0 ? state.Omega_beta.diagonal().mean() : 0.0;
  if (!state.sigma2_fixed && state.a > 2.0) {
    const double mean = state.b / (state.a - 1.0);
    r.rmse_sigma2 = std::abs(mean - design.sigma2_true);
    r.var_sigma2 = mean * mean / (state.a - 2.0);
  }
  return r;
}

std::vector<MetricsReport> average_by_n(const std::vector<MetricsReport>& reports) {
  std::vector<int> order;
  std::map<int, std::pair<MetricsReport, int>> acc;
  for (const auto& r : reports) {
    auto [it, inserted] = acc.try_emplace(r.n, MetricsReport{}, 0);
    if (inserted) {
      order.push_back(r.n);
      it->second.first.n = r.n;
    }
    auto& a = it->second.first;
    a.brier += r.brier;
    a.rmse_alpha += r.rmse_alpha * r.rmse_alpha;
    a.rmse_beta += r.rmse_beta * r.rmse_beta;
    a.rmse_sigma2 += r.rmse_sigma2 * r.rmse_sigma2;
    a.var_alpha += r.var_alpha;
    a.var_beta += r.var_beta;
    a.var_sigma2 += r.var_sigma2;
    ++it->second.second;
  }
  std::vector<MetricsReport> out;
  for (int n : order) {
    auto [a, k] = acc.at(n);
    a.brier /= k;
    a.rmse_alpha = std::sqrt(a.rmse_alpha / k);
    a.rmse_beta = std::sqrt(a.rmse_beta / k);
    a.rmse_sigma2 = std::sqrt(a.rmse_sigma2 / k);
    a.var_alpha /= k;
    a.var_beta /= k;
    a.var_sigma2 /= k;
    out.push_back(a);
  }
  return out;
}

}  // namespace latbma
