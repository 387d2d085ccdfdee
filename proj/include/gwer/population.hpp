#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gwer/offspring.hpp"
#include "gwer/rng.hpp"

namespace gwer::pop {

// Binomial(n, p) draw. Exact CDF inversion while n*min(p,1-p) <= 400,
// Gaussian with continuity correction above. Counts are carried as
// integer-valued doubles (exact below 2^53).
double binomial(double n, double p, RngStream& rng);

// One branching step: total offspring of z independent individuals.
// Beyond kFreeze individuals growth is deterministic (z * m); at that size
// the normalized-population fluctuations are below 1e-6 relative.
double offspring_step(const OffspringDist& dist, double z, RngStream& rng);

inline constexpr double kFreeze = 1e13;

// Level populations z_0 = start, ..., z_levels; out must have levels+1 slots.
void level_counts(const OffspringDist& dist, double start, int levels, std::span<double> out,
                  RngStream& rng);

// W(o, depth) = Z_depth / m^depth for a fresh tree rooted at one individual.
double w_sample(const OffspringDist& dist, int depth, RngStream& rng);

// One environment draw with the root's subtree split per child and j_max
// marked ancestors, enough to evaluate every W_{-j}(depth) and the shifted
// views used by the stationarity residuals.
struct IgwSample {
  int root_degree = 0;
  std::vector<int> child_deg;    // degree of each root child
  std::vector<double> child_w;   // W(child, depth-1)
  std::vector<int> anc_deg;      // d(v_{-j}), j = 1..j_max (size-biased)
  std::vector<double> w_anc;     // W(v_{-j}, depth), j = 0..j_max
  double w_root = 0.0;           // = w_anc[0]

  // sum_{j=0..j_max} e^{j alpha} W_{-j}(depth)
  double z_alpha(double alpha) const;
};

IgwSample igw_sample(const OffspringDist& dist, int depth, int j_max, RngStream& rng);

// Normalized progeny of the root and of the first spine vertex for one tree
// drawn from the size-biased spine measure, evaluated at level n.
struct SpineProgeny {
  double m_root;    // M_n(root)
  double m_spine1;  // M_n(u*_1)
};

SpineProgeny spine_progeny_sample(const OffspringDist& dist, int n, RngStream& rng);

}  // namespace gwer::pop
