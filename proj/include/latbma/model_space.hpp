#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "latbma/rng.hpp"

namespace latbma {

struct Dataset;
struct CrossProducts;

// Inclusion mask over the p candidate covariates. The intercept is implicit
// and never part of the mask.
//
// Masks are a single 64-bit word, which caps p at 64. Widening to a multiword
// bitset only touches this class and its hash.
class ModelIndex {
 public:
  static constexpr int kMaxCovariates = 64;

  ModelIndex() = default;
  explicit ModelIndex(int p_total, std::uint64_t bits = 0);

  static ModelIndex null_model(int p_total) { return ModelIndex(p_total, 0); }
  static ModelIndex full_model(int p_total);
  static ModelIndex from_indices(int p_total, const std::vector<int>& included);
  // Canonical '0'/'1' string, leftmost character is covariate 0.
  static ModelIndex from_string(std::string_view mask);

  int p_total() const { return p_total_; }
  int size() const;
  bool contains(int j) const { return (bits_ >> j) & 1u; }
  std::uint64_t bits() const { return bits_; }

  ModelIndex with(int j) const;
  ModelIndex without(int j) const;

  std::vector<int> included() const;
  std::vector<int> excluded() const;
  std::string to_string() const;

  friend bool operator==(const ModelIndex&, const ModelIndex&) = default;

 private:
  std::uint64_t bits_ = 0;
  int p_total_ = 0;
};

struct ModelIndexHash {
  std::size_t operator()(const ModelIndex& m) const noexcept {
    return std::hash<std::uint64_t>{}(m.bits() * 0x9e3779b97f4a7c15ull ^
                                      static_cast<std::uint64_t>(m.p_total()));
  }
};

// Beta(u, v) prior on the common inclusion probability.
struct ModelPriorSpec {
  double u = 1.0;
  double v = 1.0;
  double p0 = 0.0;  // expected model size, informational when u, v are set directly

  // u = 1, v = (p - p0) / p0.
  static ModelPriorSpec from_expected_size(int p, double p0);
  void validate() const;
};

double log_model_prior(const ModelIndex& model, const ModelPriorSpec& spec);

enum class MoveKind { kAdd, kDelete, kSwap };

const char* to_string(MoveKind kind);

struct Proposal {
  ModelIndex target;
  double log_fwd = 0.0;  // log r(target | source)
  double log_rev = 0.0;  // log r(source | target)
  MoveKind kind = MoveKind::kAdd;
  int added = -1;
  int removed = -1;
};

// Two-stage add-delete-swap proposal: a move kind uniformly among those
// feasible from the source, then the covariate(s) uniformly among the
// eligible ones.
Proposal propose(const ModelIndex& source, RngStream& rng);

// log r(target | source) under the scheme used by propose(). Returns -inf
// when target is not a single move away from source.
double log_proposal_prob(const ModelIndex& source, const ModelIndex& target);

// [1 | X_k] has full column rank. Uses a pivoted LDLT of the selected block
// of X'X; a column counts as dependent once its pivot drops below 1e-10 of
// the largest pivot.
bool is_admissible(const ModelIndex& model, const CrossProducts& cp, int n);
bool is_admissible(const ModelIndex& model, const Dataset& data);

}  // namespace latbma
