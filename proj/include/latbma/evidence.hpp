#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <string_view>
#include <unordered_map>

#include "latbma/cavi.hpp"

namespace latbma {

enum class Method { kVb, kAvb };
enum class Criterion { kVbc, kElbo };

const char* to_string(Method method);
const char* to_string(Criterion criterion);
Method parse_method(std::string_view name);
Criterion parse_criterion(std::string_view name);

struct EvidenceRecord {
  ModelIndex model;
  double log_evidence = 0.0;
  double log_prior = 0.0;
  Criterion criterion = Criterion::kVbc;
  Method method = Method::kVb;
  int iters = 0;
  bool converged = false;
  std::int64_t wall_time_ns = 0;

  // Posterior summaries kept for model averaging.
  double mu_alpha = 0.0;
  Eigen::VectorXd mu_beta;
  double sigma2_hat = 1.0;

  double log_posterior_kernel() const { return log_evidence + log_prior; }
};

// log p(y|z) + log p(z|theta) + log p(theta) - log q(z) - log q(theta) at
// z = m and theta = (mu_alpha, mu_beta, b/(a-1)); sigma^2 = 1 when fixed.
double log_vbc(const VariationalState& state, double g);

// Frozen null-model fit.
struct NullCache {
  VariationalState null_state;
  Eigen::VectorXd xt_mbar;  // X' m_bar, full length p
  double g = 0.0;
  int iterations = 0;
  std::int64_t build_time_ns = 0;

  const LatentField& latent() const { return null_state.latent; }
  double alpha0() const { return null_state.mu_alpha; }
  double sigma2_0() const { return null_state.xi(); }
};

NullCache build_null_cache(const Dataset& data, const CrossProducts& cp, const FitConfig& config);

// Theta-block iterations with q(z) held at the null fit. Only p_k-sized
// quantities are touched per iteration.
CaviResult run_avb(const Dataset& data, const CrossProducts& cp, const ModelIndex& model,
                   const NullCache& cache, const FitConfig& config,
                   const VariationalState* warm = nullptr);

double evaluate_criterion(const VariationalState& state, Criterion criterion, double g);

struct EvaluatorOptions {
  Method method = Method::kVb;
  Criterion criterion = Criterion::kVbc;
  ModelPriorSpec prior;
  bool warm_start = true;
  std::size_t memo_capacity = 0;  // 0 = unbounded
};

// Fits, scores and memoizes models for one dataset. Not thread-safe; each
// chain owns its own evaluator and may share a NullCache.
class Evaluator {
 public:
  Evaluator(const Dataset& data, const CrossProducts& cp, FitConfig config,
            EvaluatorOptions options, std::shared_ptr<const NullCache> cache = nullptr);

  // std::nullopt for inadmissible models. A memo hit returns the stored record
  // with iters = 0 and wall_time_ns = 0.
  // Without an explicit warm start the most recent fit is used.
  std::optional<EvidenceRecord> evaluate(const ModelIndex& model,
                                         const VariationalState* warm = nullptr);
  const VariationalState* last_state() const { return last_.get(); }

  // Fit without memoization, keeping the full state.
  CaviResult fit(const ModelIndex& model, const VariationalState* warm = nullptr);

  const Dataset& data() const { return data_; }
  const FitConfig& config() const { return config_; }
  const EvaluatorOptions& options() const { return options_; }
  std::shared_ptr<const NullCache> null_cache() const { return cache_; }

  std::size_t memo_size() const { return memo_.size(); }
  std::int64_t fit_time_ns() const { return fit_time_ns_; }
  long fits() const { return fits_; }
  long memo_hits() const { return hits_; }

 private:
  const Dataset& data_;
  const CrossProducts& cp_;
  FitConfig config_;
  EvaluatorOptions options_;
  std::shared_ptr<const NullCache> cache_;
  using LruList = std::list<ModelIndex>;
  std::unordered_map<ModelIndex, std::pair<EvidenceRecord, LruList::iterator>, ModelIndexHash> memo_;
  LruList lru_;
  std::unique_ptr<VariationalState> last_;
  std::int64_t fit_time_ns_ = 0;
  long fits_ = 0;
  long hits_ = 0;
};

}  // namespace latbma
