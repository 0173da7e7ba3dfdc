#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "latbma/evidence.hpp"

namespace latbma {

struct EnumerationTable {
  int p = 0;
  std::vector<EvidenceRecord> records;  // admissible models only
  std::vector<double> probabilities;    // aligned with records
  double log_normalizer = 0.0;
  std::int64_t fit_time_ns = 0;
};

inline constexpr int kDefaultEnumerationCap = 20;

// Every mask in Gray-code order so consecutive VB fits warm-start from a
// neighbouring model.
EnumerationTable enumerate_models(Evaluator& evaluator, int max_p = kDefaultEnumerationCap);

// Normalizes exp(log_evidence + log_prior) with log-sum-exp.
void normalize_probabilities(EnumerationTable& table);

struct ChainConfig {
  long n_keep = 10000;
  long burn_in = 2000;
  int chains = 1;
  std::uint64_t seed = 1;
  int threads = 1;  // chains run concurrently up to this many
};

struct Visit {
  ModelIndex model;
  double log_evidence = 0.0;
  bool accepted = false;
  int chain = 0;
  long iteration = 0;
  bool kept = false;
};

struct ExplorationTrace {
  int p = 0;
  std::vector<Visit> visited;  // every iteration of every chain, burn-in included
  Eigen::VectorXd pip_counts;
  Eigen::VectorXd beta_sum;
  double size_sum = 0.0;
  double size_sum_sq = 0.0;
  long n_kept = 0;
  long proposals = 0;
  long accepted = 0;
  ChainConfig config;
  std::unordered_map<ModelIndex, EvidenceRecord, ModelIndexHash> records;
  std::int64_t null_cache_time_ns = 0;
  std::int64_t fit_time_ns = 0;
  long fits = 0;
};

// Metropolis-Hastings over models from the null model. Each chain owns an
// evaluator (and memo), so a seed reproduces the trace exactly whatever the
// thread count. AVB chains share one null cache.
ExplorationTrace explore(const Dataset& data, const CrossProducts& cp, const FitConfig& config,
                         const EvaluatorOptions& options, const ChainConfig& chain,
                         std::shared_ptr<const NullCache> cache = nullptr);

// Acceptance probability on the log scale, capped at 0.
double log_acceptance(const EvidenceRecord& current, const EvidenceRecord& proposed,
                      double log_fwd, double log_rev);

struct ModelWeight {
  EvidenceRecord record;
  double weight = 0.0;  // posterior probability or visit frequency
};

struct Summary {
  int p = 0;
  Eigen::VectorXd pip;
  Eigen::VectorXd beta_avg;  // excluded covariates contribute zero
  ModelIndex median_model;   // PIP > 0.5; exactly 0.5 is excluded
  ModelIndex top_model;      // largest log_evidence
  double size_mean = 0.0;
  double size_sd = 0.0;
  std::vector<ModelWeight> models;  // sorted by log_evidence, descending
};

Summary summarize(const EnumerationTable& table);
Summary summarize(const ExplorationTrace& trace);

ModelIndex median_probability_model(const Eigen::VectorXd& pip);

// Total-variation distance between two model distributions.
double total_variation(const std::unordered_map<ModelIndex, double, ModelIndexHash>& a,
                       const std::unordered_map<ModelIndex, double, ModelIndexHash>& b);

std::unordered_map<ModelIndex, double, ModelIndexHash> model_distribution(const EnumerationTable& t);
std::unordered_map<ModelIndex, double, ModelIndexHash> model_distribution(const ExplorationTrace& t);

}  // namespace latbma
