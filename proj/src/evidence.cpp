#include "latbma/evidence.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "latbma/errors.hpp"

namespace latbma {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::int64_t since_ns(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
      .count();
}

void check_term(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericalError(std::string("log_vbc: non-finite ") + term);
}

}  // namespace

const char* to_string(Method method) { return method == Method::kVb ? "vb" : "avb"; }
const char* to_string(Criterion criterion) { return criterion == Criterion::kVbc ? "vbc" : "elbo"; }

Method parse_method(std::string_view name) {
  if (name == "vb") return Method::kVb;
  if (name == "avb") return Method::kAvb;
  throw ParameterError("unknown method '" + std::string(name) + "' (expected vb or avb)");
}

Criterion parse_criterion(std::string_view name) {
  if (name == "vbc") return Criterion::kVbc;
  if (name == "elbo") return Criterion::kElbo;
  throw ParameterError("unknown criterion '" + std::string(name) + "' (expected vbc or elbo)");
}

double log_vbc(const VariationalState& s, double g) {
  const int n = s.n;
  const int pk = s.p_k();
  double sigma2 = 1.0;
  if (!s.sigma2_fixed) {
    if (!(s.a > 1.0)) throw ParameterError("log_vbc needs a > 1 for the inverse-gamma mean");
    sigma2 = s.b / (s.a - 1.0);
  }
  const double log_s2 = std::log(sigma2);

  const double log_lik = s.latent.loglik_at_mean;
  const double log_z = -0.5 * n * (kLog2Pi + log_s2) - 0.5 * s.rss / sigma2;
  double log_theta = -0.5 * pk * (kLog2Pi + std::log(g) + log_s2) + 0.5 * s.log_det_gram -
                     0.5 * s.quad_beta / (g * sigma2);
  if (!s.sigma2_fixed) log_theta -= log_s2;
  const double log_qz = s.latent.log_q_at_mean;
  const double log_det_omega = pk > 0 ? pk * std::log(s.omega_scale) - s.log_det_gram : 0.0;
  double log_qtheta = -0.5 * (kLog2Pi + std::log(s.omega_alpha)) - 0.5 * pk * kLog2Pi -
                      0.5 * log_det_omega;
  if (!s.sigma2_fixed)
    log_qtheta += s.a * std::log(s.b) - std::lgamma(s.a) - (s.a + 1.0) * log_s2 - s.b / sigma2;

  check_term(log_lik, "log p(y|z)");
  check_term(log_z, "log p(z|theta)");
  check_term(log_theta, "log p(theta)");
  check_term(log_qz, "log q(z)");
  check_term(log_qtheta, "log q(theta)");
  return log_lik + log_z + log_theta - log_qz - log_qtheta;
}

NullCache build_null_cache(const Dataset& data, const CrossProducts& cp, const FitConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  NullCache cache;
  CaviResult r = run_cavi(data, cp, ModelIndex::null_model(data.p()), config);
  cache.null_state = std::move(r.state);
  cache.iterations = r.iterations;
  cache.xt_mbar = data.X.transpose() * cache.null_state.latent.m;
  cache.g = config.g_for(data.n());
  cache.build_time_ns = since_ns(t0);
  return cache;
}

CaviResult run_avb(const Dataset& data, const CrossProducts& cp, const ModelIndex& model,
                   const NullCache& cache, const FitConfig& config, const VariationalState* warm) {
  config.validate();
  if (model.p_total() != data.p()) throw ParameterError("model mask length does not match data");
  if (cache.null_state.n != data.n() || cache.xt_mbar.size() != data.p())
    throw ParameterError("null cache was built for a different dataset");
  if (!is_admissible(model, cp, data.n()))
    throw SingularSelectionError("model is not admissible: " + model.to_string());

  const double g = config.g_for(data.n());
  const SubmodelFactor factor(cp, model);

  VariationalState s = cache.null_state;
  s.model = model;
  s.xtm = cache.xt_mbar(model.included());
  s.mu_beta = Eigen::VectorXd::Zero(model.size());
  s.iterations = 0;
  s.converged = false;
  if (warm != nullptr && warm->model == model) {
    s.mu_alpha = warm->mu_alpha;
    s.mu_beta = warm->mu_beta;
    s.a = warm->a;
    s.b = warm->b;
  }

  for (int it = 1; it <= config.max_iter; ++it) {
    VariationalState before;
    before.sigma2_fixed = s.sigma2_fixed;
    before.mu_alpha = s.mu_alpha;
    before.mu_beta = s.mu_beta;
    before.a = s.a;
    before.b = s.b;
    update_theta(s, factor, g);
    s.iterations = it;
    if (config.on_sweep) config.on_sweep(s, it);
    if (max_relative_change(before, s) <= config.tol) {
      s.converged = true;
      break;
    }
  }
  CaviResult out;
  out.iterations = s.iterations;
  out.converged = s.converged;
  out.state = std::move(s);
  return out;
}

double evaluate_criterion(const VariationalState& state, Criterion criterion, double g) {
  return criterion == Criterion::kVbc ? log_vbc(state, g) : master_elbo(state, g);
}

Evaluator::Evaluator(const Dataset& data, const CrossProducts& cp, FitConfig config,
                     EvaluatorOptions options, std::shared_ptr<const NullCache> cache)
    : data_(data), cp_(cp), config_(std::move(config)), options_(options), cache_(std::move(cache)) {
  config_.validate();
  options_.prior.validate();
  if (options_.method == Method::kAvb && !cache_)
    cache_ = std::make_shared<const NullCache>(build_null_cache(data_, cp_, config_));
}

CaviResult Evaluator::fit(const ModelIndex& model, const VariationalState* warm) {
  if (options_.method == Method::kAvb) return run_avb(data_, cp_, model, *cache_, config_, warm);
  return run_cavi(data_, cp_, model, config_, warm);
}

std::optional<EvidenceRecord> Evaluator::evaluate(const ModelIndex& model,
                                                  const VariationalState* warm) {
  if (auto it = memo_.find(model); it != memo_.end()) {
    ++hits_;
    lru_.splice(lru_.begin(), lru_, it->second.second);
    EvidenceRecord rec = it->second.first;
    rec.iters = 0;
    rec.wall_time_ns = 0;
    return rec;
  }
  if (!is_admissible(model, cp_, data_.n())) return std::nullopt;

  const auto t0 = std::chrono::steady_clock::now();
  if (warm == nullptr && options_.warm_start) warm = last_.get();
  CaviResult r;
  try {
    r = fit(model, warm);
  } catch (const SingularSelectionError&) {
    return std::nullopt;
  }
  EvidenceRecord rec;
  rec.model = model;
  rec.method = options_.method;
  rec.criterion = options_.criterion;
  rec.log_evidence = evaluate_criterion(r.state, options_.criterion, config_.g_for(data_.n()));
  rec.log_prior = log_model_prior(model, options_.prior);
  rec.iters = r.iterations;
  rec.converged = r.converged;
  rec.mu_alpha = r.state.mu_alpha;
  rec.mu_beta = r.state.mu_beta;
  rec.sigma2_hat = r.state.sigma2_fixed ? 1.0 : r.state.b / (r.state.a - 1.0);
  rec.wall_time_ns = since_ns(t0);
  fit_time_ns_ += rec.wall_time_ns;
  ++fits_;

  if (options_.warm_start) {
    if (!last_) last_ = std::make_unique<VariationalState>();
    *last_ = std::move(r.state);
  }

  if (options_.memo_capacity > 0 && memo_.size() >= options_.memo_capacity) {
    memo_.erase(lru_.back());
    lru_.pop_back();
  }
  lru_.push_front(model);
  memo_.emplace(model, std::make_pair(rec, lru_.begin()));
  return rec;
}

}  // namespace latbma
