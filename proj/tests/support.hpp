#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "latbma/cavi.hpp"
#include "latbma/sim.hpp"
#include "oracles/oracles.hpp"

namespace testing_support {

inline int family_code(latbma::Family f) {
  switch (f) {
    case latbma::Family::kProbit: return 0;
    case latbma::Family::kTobit: return 1;
    case latbma::Family::kStar: return 2;
    case latbma::Family::kPln: return 3;
  }
  return 0;
}

inline oracle::StatePieces pieces(const latbma::VariationalState& st, const latbma::Dataset& data,
                                  double g) {
  oracle::StatePieces p;
  p.family = family_code(data.family);
  p.Xk = latbma::select_columns(data, st.model);
  p.y = data.y;
  p.y_lower = data.y_lower;
  p.g = g;
  p.mu_alpha = st.mu_alpha;
  p.omega_alpha = st.omega_alpha;
  p.mu_beta = st.mu_beta;
  p.Omega_beta = st.Omega_beta;
  p.a = st.a;
  p.b = st.b;
  p.sigma2_fixed = st.sigma2_fixed;
  p.m = st.latent.m;
  p.s = st.latent.s;
  p.xi_latent = st.xi();
  return p;
}

inline latbma::Dataset sim_data(latbma::Family f, int n, int p, std::uint64_t seed,
                                const char* preset = "sparse") {
  latbma::SimDesign d = latbma::make_design(f, n, p, preset, seed);
  return latbma::simulate(d).data;
}

inline double rel_err(double got, double want, double floor = 0.0) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

}  // namespace testing_support
