#pragma once

#include <cstdint>

#include "gwer/offspring.hpp"
#include "gwer/rng.hpp"
#include "gwer/stats.hpp"
#include "gwer/tree.hpp"

namespace gwer::env {

// The environment seen from the particle: a marked tree plus the vertex the
// walk sits at. Shifting to a neighbor re-anchors the ray implicitly through
// parent pointers; coordinates re-base by rho differences.
struct EnvView {
  TreeArena* tree;
  NodeId current;
};

EnvView shift(EnvView view, NodeId x);  // NotAdjacent unless x neighbors current
inline int view_rho(const EnvView& v, NodeId node) {
  return v.tree->rho(node) - v.tree->rho(v.current);
}

// C_alpha = b/(1-e^alpha) + (1-b)/(1-e^alpha/m); alpha < 0 only.
double c_alpha(const ModelConstants& c, double alpha);

// v_alpha = -m e^{-alpha} / C_alpha; alpha < 0 only.
double v_alpha_closed(const ModelConstants& c, double alpha);

// Truncated stationary-density sample psi_alpha = Z_alpha / C_alpha with
// Z_alpha = sum_{j<=j_max} e^{j alpha} W_{-j}(depth).
struct PsiAlphaEstimate {
  double z_alpha;
  double c_alpha;
  double psi;  // z/c
  int truncation_j;
  int martingale_depth;
  double truncation_bound;  // b e^{alpha (j_max+1)} / (1 - e^alpha)
};

PsiAlphaEstimate z_alpha_sample(const OffspringDist& dist, double alpha, int j_max, int depth,
                                RngStream& rng);

int default_j_max(double alpha);  // ceil(8/|alpha|)

EstimateCI z_alpha_mean(const OffspringDist& dist, double alpha, int j_max, int depth,
                        std::int64_t samples, std::uint64_t seed, int parallelism);

EstimateCI psi_alpha_mean(const OffspringDist& dist, double alpha, int j_max, int depth,
                          std::int64_t samples, std::uint64_t seed, int parallelism);

// Test functions for the stationarity residual <psi_alpha L_alpha f>_0.
enum class TestFn { Degree, MartingaleW, TruncatedDensity };

// Monte Carlo residual; shifted views are evaluated exactly from one
// environment draw (no re-sampling). Should be 0 within noise.
EstimateCI stationarity_residual(const OffspringDist& dist, double alpha, TestFn fn,
                                 std::int64_t samples, std::uint64_t seed, int parallelism,
                                 int j_max = -1, int depth = 24, double cap = 1e3);

// Measures v at lambda ~ 0 and reports which of C = sum p_k/k and 1/C matches.
struct MuInfinityReport {
  double c_harmonic;
  double one_over_c;
  EstimateCI v_sim;
  const char* matches;  // "C", "1/C", or "neither"
};
MuInfinityReport mu_infinity_velocity(const OffspringDist& dist, std::int64_t samples,
                                      std::uint64_t seed, int parallelism, double alpha_large = 8.0,
                                      double horizon = 200.0);

// Mean of the GW-singular density psi(T) = (1-e^alpha) sum_j (m e^{-alpha})^{-j+1}
// prod_{i<j} d_{-i} over iid GW degrees; equals 1. alpha < 0 only.
struct GwSingularPsi {
  EstimateCI mean;
  double truncation_bound;  // e^{alpha j_max}
};
GwSingularPsi gw_singular_psi(const OffspringDist& dist, double alpha, int j_max,
                              std::int64_t samples, std::uint64_t seed, int parallelism);

}  // namespace gwer::env
