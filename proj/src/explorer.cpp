#include "latbma/explorer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "latbma/errors.hpp"
#include "latbma/parallel.hpp"

namespace latbma {

EnumerationTable enumerate_models(Evaluator& evaluator, int max_p) {
  const int p = evaluator.data().p();
  if (p > max_p)
    throw ParameterError("enumeration over p=" + std::to_string(p) + " covariates exceeds the cap of " +
                         std::to_string(max_p) + "; use explore instead");
  EnumerationTable table;
  table.p = p;
  const std::uint64_t count = std::uint64_t{1} << p;
  table.records.reserve(count);
  const std::int64_t t0 = evaluator.fit_time_ns();
  for (std::uint64_t i = 0; i < count; ++i) {
    const ModelIndex model(p, i ^ (i >> 1));
    if (auto rec = evaluator.evaluate(model)) table.records.push_back(std::move(*rec));
  }
  table.fit_time_ns = evaluator.fit_time_ns() - t0;
  normalize_probabilities(table);
  return table;
}

void normalize_probabilities(EnumerationTable& table) {
  table.probabilities.assign(table.records.size(), 0.0);
  if (table.records.empty()) return;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& r : table.records) top = std::max(top, r.log_posterior_kernel());
  double total = 0.0;
  for (std::size_t k = 0; k < table.records.size(); ++k) {
    table.probabilities[k] = std::exp(table.records[k].log_posterior_kernel() - top);
    total += table.probabilities[k];
  }
  for (auto& w : table.probabilities) w /= total;
  table.log_normalizer = top + std::log(total);
}

double log_acceptance(const EvidenceRecord& current, const EvidenceRecord& proposed,
                      double log_fwd, double log_rev) {
  const double r = (proposed.log_posterior_kernel() + log_rev) - (current.log_posterior_kernel() + log_fwd);
  return std::min(0.0, r);
}

namespace {

struct ChainOutput {
  std::vector<Visit> visits;
  std::unordered_map<ModelIndex, EvidenceRecord, ModelIndexHash> records;
  long proposals = 0;
  long accepted = 0;
  std::int64_t fit_time_ns = 0;
  long fits = 0;
};

ChainOutput run_chain(const Dataset& data, const CrossProducts& cp, const FitConfig& config,
                      const EvaluatorOptions& options, const ChainConfig& chain, int index,
                      std::shared_ptr<const NullCache> cache) {
  ChainOutput out;
  Evaluator evaluator(data, cp, config, options, cache);
  RngStream rng = make_stream(chain.seed, static_cast<std::uint64_t>(index), StreamPurpose::kChain);

  ModelIndex current = ModelIndex::null_model(data.p());
  auto current_rec = evaluator.evaluate(current);
  if (!current_rec) throw DataError("the null model is not admissible");
  out.records.emplace(current, *current_rec);
  std::optional<VariationalState> current_state;
  if (evaluator.last_state()) current_state = *evaluator.last_state();

  const long total = chain.burn_in + chain.n_keep;
  out.visits.reserve(static_cast<std::size_t>(total));
  for (long t = 0; t < total; ++t) {
    const Proposal prop = propose(current, rng);
    const double u = uniform01(rng);
    ++out.proposals;
    bool accepted = false;
    const VariationalState* warm = current_state ? &*current_state : nullptr;
    if (auto rec = evaluator.evaluate(prop.target, warm)) {
      out.records.try_emplace(prop.target, *rec);
      const bool fresh = rec->iters > 0;
      if (std::log(u) < log_acceptance(*current_rec, *rec, prop.log_fwd, prop.log_rev)) {
        accepted = true;
        current = prop.target;
        current_rec = *rec;
        if (fresh && evaluator.last_state()) current_state = *evaluator.last_state();
      }
    }
    out.accepted += accepted;
    Visit v;
    v.model = current;
    v.log_evidence = current_rec->log_evidence;
    v.accepted = accepted;
    v.chain = index;
    v.iteration = t;
    v.kept = t >= chain.burn_in;
    out.visits.push_back(v);
  }
  out.fit_time_ns = evaluator.fit_time_ns();
  out.fits = evaluator.fits();
  return out;
}

Eigen::VectorXd full_beta(const EvidenceRecord& rec) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(rec.model.p_total());
  const auto idx = rec.model.included();
  for (std::size_t k = 0; k < idx.size(); ++k) beta[idx[k]] = rec.mu_beta[static_cast<Eigen::Index>(k)];
  return beta;
}

}  // namespace

ExplorationTrace explore(const Dataset& data, const CrossProducts& cp, const FitConfig& config,
                         const EvaluatorOptions& options, const ChainConfig& chain,
                         std::shared_ptr<const NullCache> cache) {
  if (data.p() < 1) throw ParameterError("exploration needs at least one candidate covariate");
  if (chain.chains < 1 || chain.n_keep < 1 || chain.burn_in < 0)
    throw ParameterError("chains and kept iterations must be positive, burn-in non-negative");

  ExplorationTrace trace;
  trace.p = data.p();
  trace.config = chain;
  if (options.method == Method::kAvb && !cache) {
    const auto t0 = std::chrono::steady_clock::now();
    cache = std::make_shared<const NullCache>(build_null_cache(data, cp, config));
    trace.null_cache_time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
  }

  std::vector<ChainOutput> outputs(chain.chains);
  FitConfig per_chain = config;
  if (chain.threads > 1 && chain.chains > 1) per_chain.latent.threads = 1;
  parallel_for(chain.chains, chain.threads, 1, [&](int lo, int hi) {
    for (int c = lo; c < hi; ++c) outputs[c] = run_chain(data, cp, per_chain, options, chain, c, cache);
  });

  trace.pip_counts = Eigen::VectorXd::Zero(trace.p);
  trace.beta_sum = Eigen::VectorXd::Zero(trace.p);
  for (auto& out : outputs) {
    trace.proposals += out.proposals;
    trace.accepted += out.accepted;
    trace.fit_time_ns += out.fit_time_ns;
    trace.fits += out.fits;
    for (auto& [m, r] : out.records) trace.records.try_emplace(m, r);
    for (const auto& v : out.visits) {
      if (v.kept) {
        ++trace.n_kept;
        const auto& rec = out.records.at(v.model);
        for (int j : v.model.included()) trace.pip_counts[j] += 1.0;
        trace.beta_sum += full_beta(rec);
        const double k = v.model.size();
        trace.size_sum += k;
        trace.size_sum_sq += k * k;
      }
    }
    trace.visited.insert(trace.visited.end(), out.visits.begin(), out.visits.end());
  }
  return trace;
}

ModelIndex median_probability_model(const Eigen::VectorXd& pip) {
  ModelIndex m(static_cast<int>(pip.size()), 0);
  for (Eigen::Index j = 0; j < pip.size(); ++j)
    if (pip[j] > 0.5) m = m.with(static_cast<int>(j));
  return m;
}

namespace {

void finish(Summary& s) {
  std::stable_sort(s.models.begin(), s.models.end(), [](const ModelWeight& a, const ModelWeight& b) {
    return a.record.log_evidence > b.record.log_evidence;
  });
  s.median_model = median_probability_model(s.pip);
  s.top_model = s.models.empty() ? ModelIndex(s.p, 0) : s.models.front().record.model;
}

}  // namespace

Summary summarize(const EnumerationTable& table) {
  if (table.records.empty()) throw ParameterError("nothing to summarize");
  Summary s;
  s.p = table.p;
  s.pip = Eigen::VectorXd::Zero(table.p);
  s.beta_avg = Eigen::VectorXd::Zero(table.p);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < table.records.size(); ++k) {
    const auto& rec = table.records[k];
    const double w = table.probabilities[k];
    for (int j : rec.model.included()) s.pip[j] += w;
    s.beta_avg += w * full_beta(rec);
    m1 += w * rec.model.size();
    m2 += w * rec.model.size() * rec.model.size();
    s.models.push_back({rec, w});
  }
  s.pip = s.pip.cwiseMin(1.0);
  s.size_mean = m1;
  s.size_sd = std::sqrt(std::max(0.0, m2 - m1 * m1));
  finish(s);
  return s;
}

Summary summarize(const ExplorationTrace& trace) {
  if (trace.n_kept == 0) throw ParameterError("nothing to summarize");
  Summary s;
  s.p = trace.p;
  const double n = static_cast<double>(trace.n_kept);
  s.pip = trace.pip_counts / n;
  s.beta_avg = trace.beta_sum / n;
  s.size_mean = trace.size_sum / n;
  s.size_sd = std::sqrt(std::max(0.0, trace.size_sum_sq / n - s.size_mean * s.size_mean));
  const auto freq = model_distribution(trace);
  for (const auto& [m, rec] : trace.records) {
    auto it = freq.find(m);
    s.models.push_back({rec, it == freq.end() ? 0.0 : it->second});
  }
  // Deterministic order before the stable sort.
  std::sort(s.models.begin(), s.models.end(), [](const ModelWeight& a, const ModelWeight& b) {
    return a.record.model.bits() < b.record.model.bits();
  });
  finish(s);
  return s;
}

std::unordered_map<ModelIndex, double, ModelIndexHash> model_distribution(const EnumerationTable& t) {
  std::unordered_map<ModelIndex, double, ModelIndexHash> d;
  for (std::size_t k = 0; k < t.records.size(); ++k) d[t.records[k].model] += t.probabilities[k];
  return d;
}

std::unordered_map<ModelIndex, double, ModelIndexHash> model_distribution(const ExplorationTrace& t) {
  std::unordered_map<ModelIndex, double, ModelIndexHash> d;
  if (t.n_kept == 0) return d;
  for (const auto& v : t.visited)
    if (v.kept) d[v.model] += 1.0;
  for (auto& [m, w] : d) w /= static_cast<double>(t.n_kept);
  return d;
}

double total_variation(const std::unordered_map<ModelIndex, double, ModelIndexHash>& a,
                       const std::unordered_map<ModelIndex, double, ModelIndexHash>& b) {
  double tv = 0.0;
  for (const auto& [m, w] : a) {
    auto it = b.find(m);
    tv += std::abs(w - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [m, w] : b)
    if (!a.count(m)) tv += std::abs(w);
  return 0.5 * tv;
}

}  // namespace latbma
