#include "latbma/model_space.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "latbma/data.hpp"
#include "latbma/errors.hpp"

namespace latbma {

ModelIndex::ModelIndex(int p_total, std::uint64_t bits) : bits_(bits), p_total_(p_total) {
  if (p_total < 0 || p_total > kMaxCovariates)
    throw ParameterError("model mask supports 0.." + std::to_string(kMaxCovariates) +
                         " covariates, got " + std::to_string(p_total));
  if (p_total < kMaxCovariates && (bits >> p_total) != 0)
    throw ParameterError("model mask has bits beyond p_total");
}

ModelIndex ModelIndex::full_model(int p_total) {
  const std::uint64_t bits =
      p_total == kMaxCovariates ? ~std::uint64_t{0} : ((std::uint64_t{1} << p_total) - 1);
  return ModelIndex(p_total, bits);
}

ModelIndex ModelIndex::from_indices(int p_total, const std::vector<int>& included) {
  ModelIndex m(p_total, 0);
  for (int j : included) {
    if (j < 0 || j >= p_total) throw ParameterError("covariate index out of range");
    if (m.contains(j)) throw ParameterError("duplicate covariate index in mask");
    m.bits_ |= std::uint64_t{1} << j;
  }
  return m;
}

ModelIndex ModelIndex::from_string(std::string_view mask) {
  if (mask.size() > static_cast<std::size_t>(kMaxCovariates))
    throw ParameterError("mask string longer than 64 characters");
  std::uint64_t bits = 0;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j] == '1')
      bits |= std::uint64_t{1} << j;
    else if (mask[j] != '0')
      throw ParameterError("mask string must contain only '0' and '1'");
  }
  return ModelIndex(static_cast<int>(mask.size()), bits);
}

int ModelIndex::size() const { return std::popcount(bits_); }

ModelIndex ModelIndex::with(int j) const {
  if (j < 0 || j >= p_total_) throw ParameterError("covariate index out of range");
  return ModelIndex(p_total_, bits_ | (std::uint64_t{1} << j));
}

ModelIndex ModelIndex::without(int j) const {
  if (j < 0 || j >= p_total_) throw ParameterError("covariate index out of range");
  return ModelIndex(p_total_, bits_ & ~(std::uint64_t{1} << j));
}

std::vector<int> ModelIndex::included() const {
  std::vector<int> out;
  out.reserve(size());
  for (int j = 0; j < p_total_; ++j)
    if (contains(j)) out.push_back(j);
  return out;
}

std::vector<int> ModelIndex::excluded() const {
  std::vector<int> out;
  out.reserve(p_total_ - size());
  for (int j = 0; j < p_total_; ++j)
    if (!contains(j)) out.push_back(j);
  return out;
}

std::string ModelIndex::to_string() const {
  std::string s(p_total_, '0');
  for (int j = 0; j < p_total_; ++j)
    if (contains(j)) s[j] = '1';
  return s;
}

ModelPriorSpec ModelPriorSpec::from_expected_size(int p, double p0) {
  if (!(p0 > 0.0) || p0 >= p)
    throw ParameterError("prior expected model size must lie in (0, p)");
  ModelPriorSpec spec;
  spec.u = 1.0;
  spec.v = (p - p0) / p0;
  spec.p0 = p0;
  return spec;
}

void ModelPriorSpec::validate() const {
  if (!(u > 0.0) || !(v > 0.0) || !std::isfinite(u) || !std::isfinite(v))
    throw ParameterError("beta-binomial model prior needs u > 0 and v > 0");
}

double log_model_prior(const ModelIndex& model, const ModelPriorSpec& spec) {
  spec.validate();
  const double p = model.p_total();
  const double pk = model.size();
  const double u = spec.u, v = spec.v;
  return std::lgamma(u + v) - std::lgamma(u) - std::lgamma(v) + std::lgamma(u + pk) +
         std::lgamma(v + p - pk) - std::lgamma(u + v + p);
}

const char* to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::kAdd: return "add";
    case MoveKind::kDelete: return "delete";
    case MoveKind::kSwap: return "swap";
  }
  return "?";
}

namespace {

int feasible_kinds(int pk, int p) {
  return (pk < p ? 1 : 0) + (pk > 0 ? 1 : 0) + (pk > 0 && pk < p ? 1 : 0);
}

// log probability of one specific move of the given kind from a model of size pk.
double log_move_prob(MoveKind kind, int pk, int p) {
  const double log_kind = -std::log(static_cast<double>(feasible_kinds(pk, p)));
  switch (kind) {
    case MoveKind::kAdd: return log_kind - std::log(static_cast<double>(p - pk));
    case MoveKind::kDelete: return log_kind - std::log(static_cast<double>(pk));
    case MoveKind::kSwap:
      return log_kind - std::log(static_cast<double>(pk)) - std::log(static_cast<double>(p - pk));
  }
  return -std::numeric_limits<double>::infinity();
}

int pick(const std::vector<int>& from, RngStream& rng) {
  const auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(from.size()));
  return from[std::min(k, from.size() - 1)];
}

}  // namespace

Proposal propose(const ModelIndex& source, RngStream& rng) {
  const int p = source.p_total();
  const int pk = source.size();
  if (p < 1) throw ParameterError("cannot propose moves with no candidate covariates");

  std::vector<MoveKind> kinds;
  if (pk < p) kinds.push_back(MoveKind::kAdd);
  if (pk > 0) kinds.push_back(MoveKind::kDelete);
  if (pk > 0 && pk < p) kinds.push_back(MoveKind::kSwap);
  const auto ki = std::min(static_cast<std::size_t>(uniform01(rng) * kinds.size()), kinds.size() - 1);

  Proposal out;
  out.kind = kinds[ki];
  switch (out.kind) {
    case MoveKind::kAdd:
      out.added = pick(source.excluded(), rng);
      out.target = source.with(out.added);
      break;
    case MoveKind::kDelete:
      out.removed = pick(source.included(), rng);
      out.target = source.without(out.removed);
      break;
    case MoveKind::kSwap:
      out.removed = pick(source.included(), rng);
      out.added = pick(source.excluded(), rng);
      out.target = source.without(out.removed).with(out.added);
      break;
  }
  out.log_fwd = log_move_prob(out.kind, pk, p);
  MoveKind reverse = out.kind == MoveKind::kAdd      ? MoveKind::kDelete
                     : out.kind == MoveKind::kDelete ? MoveKind::kAdd
                                                     : MoveKind::kSwap;
  out.log_rev = log_move_prob(reverse, out.target.size(), p);
  return out;
}

double log_proposal_prob(const ModelIndex& source, const ModelIndex& target) {
  if (source.p_total() != target.p_total())
    throw ParameterError("models over different covariate sets");
  const int p = source.p_total();
  const std::uint64_t gained = target.bits() & ~source.bits();
  const std::uint64_t lost = source.bits() & ~target.bits();
  const int n_gained = std::popcount(gained), n_lost = std::popcount(lost);
  if (n_gained == 1 && n_lost == 0) return log_move_prob(MoveKind::kAdd, source.size(), p);
  if (n_gained == 0 && n_lost == 1) return log_move_prob(MoveKind::kDelete, source.size(), p);
  if (n_gained == 1 && n_lost == 1) return log_move_prob(MoveKind::kSwap, source.size(), p);
  return -std::numeric_limits<double>::infinity();
}

bool is_admissible(const ModelIndex& model, const CrossProducts& cp, int n) {
  const int pk = model.size();
  if (pk + 1 > n) return false;
  if (pk == 0) return true;
  return gram_full_rank(select_gram(cp, model.included()));
}

bool is_admissible(const ModelIndex& model, const Dataset& data) {
  const int pk = model.size();
  if (pk + 1 > data.n()) return false;
  if (pk == 0) return true;
  const auto idx = model.included();
  const Eigen::MatrixXd Xk = data.X(Eigen::all, idx);
  return gram_full_rank(Xk.transpose() * Xk);
}

}  // namespace latbma
