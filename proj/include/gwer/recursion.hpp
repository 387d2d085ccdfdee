#pragma once

#include <cstdint>
#include <vector>

#include "gwer/offspring.hpp"
#include "gwer/rng.hpp"
#include "gwer/stats.hpp"
#include "gwer/tree.hpp"

namespace gwer::recursion {

// Exact bottom-up tables on a materialized tree:
//   beta(x)  = sum_i beta(x_i) / (lambda + sum_i beta(x_i)),  beta = 1 at |x| = n
//   gamma(x) = (1 + sum_i gamma(x_i)) / (lambda + sum_i beta(x_i)),  gamma = 0 at |x| = n
// The root is defined by the same formulas.
struct BetaGammaTable {
  std::vector<double> beta;   // indexed by node id
  std::vector<double> gamma;  // time units
  int level_cut = 0;
  double lambda = 0.0;
};

BetaGammaTable solve(const TreeArena& tree, int n, double lambda);

// Path-product profile Phi_n(r), r = 1..r_max, from a solved table:
//   Phi_n(r) = sum_{|u|=r} prod_{i=1..r} 1 / (lambda (1 + B_n(u_i)))
// with B_n(x) = sum_i beta(x_i) / lambda. Accumulated level by level
// (log-space when r_max > 64), plus Gamma_n(o) and B_n(o).
struct PhiProfile {
  std::vector<double> phi;  // phi[r-1] = Phi_n(r)
  double gamma_root = 0.0;  // Gamma_n(o) = sum of children's gamma
  double b_root = 0.0;      // B_n(o)
};

PhiProfile phi_profile(const TreeArena& tree, const BetaGammaTable& table, int r_max);

// ---------------------------------------------------------------------------
// Distributional solver. Generation g of the pool carries the exact marginal
// law of (beta_g(o), gamma_g(o), M_g(o)) on a fresh tree: each new element
// combines d fresh picks from the previous generation. Resampling from a
// finite pool makes draws bootstrap-approximate; pool means are exact up to
// O(1/pool) and O(pool^{-1/2}) shared noise.
// ---------------------------------------------------------------------------
class BetaPool {
 public:
  struct Element {
    double beta;
    double gamma;
    double mart;  // M_g, normalized progeny
  };

  // store_depth: snapshots of generations 0..store_depth are kept for
  // cut-dependent consumers (spine environments, boundary injection).
  BetaPool(const OffspringDist& dist, double alpha, std::size_t pool_size, std::uint64_t seed,
           int store_depth = 0);

  void advance_to(int gen);

  // Doubling schedule on E[beta]: n0, 2 n0, ... until successive values differ
  // by < tol; NoConvergence past `cap`. DomainError unless alpha > 0.
  int converge(double tol, int n0 = 16, int cap = 4096);

  int generation() const { return gen_; }
  bool is_converged() const { return converged_; }
  int converged_generation() const { return converged_gen_; }

  const std::vector<Element>& at(int gen) const;          // stored snapshot
  const std::vector<Element>& current() const { return cur_; }

  double mean_beta() const;
  double mean_beta_at(int gen) const;
  double mean_gamma() const;

  const Element& draw(int gen, RngStream& rng) const;
  const Element& draw_converged(RngStream& rng) const;

  double lambda() const { return lambda_; }
  double alpha() const { return alpha_; }
  const OffspringDist& dist() const { return *dist_; }

 private:
  void step();

  const OffspringDist* dist_;
  double alpha_;
  double lambda_;
  std::size_t size_;
  RngStream rng_;
  int store_depth_;
  int gen_ = 0;
  bool converged_ = false;
  int converged_gen_ = -1;
  std::vector<Element> cur_;
  std::vector<Element> prev_;
  std::vector<std::vector<Element>> snapshots_;  // [gen] for gen <= store_depth
};

// Boundary-injected exact solve: materialize levels 0..cut of a GW tree, draw
// each frontier node's (beta, gamma) from the pool at generation n - cut, and
// run the exact recursion upward. Distribution-exact for the depth-n
// recursion by the branching property.
BetaGammaTable solve_with_pool_boundary(const TreeArena& tree, int cut, int n,
                                        const BetaPool& pool, RngStream& rng);

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

// E[beta(o)] / alpha via K independent pools (batch means give an honest
// stderr despite within-pool resampling).
struct EscapeResponse {
  EstimateCI response;   // E[beta]/alpha
  EstimateCI mean_beta;  // E[beta]
  int generations;       // depth used by the slowest pool
};
EscapeResponse escape_response(const OffspringDist& dist, double alpha, int n_pools,
                               std::size_t pool_size, double tol, std::uint64_t seed,
                               int parallelism);

// Limit escape probability; single pool convenience (DomainError if alpha<=0,
// NoConvergence at the depth cap).
double beta_limit_mean(const OffspringDist& dist, double alpha, double tol, std::uint64_t seed,
                       std::size_t pool_size = 1 << 15, int n0 = 16, int cap = 4096);

struct YMoments {
  EstimateCI ey;    // E[beta/alpha]
  EstimateCI ey2;   // E[(beta/alpha)^2]
  EstimateCI ew2;   // <W_o^2> (population martingale route)
  double gap_moments;    // |EY - EY2|
  double gap_w;          // |EY - 1/EW2|
};
YMoments y_moment_check(const OffspringDist& dist, double alpha, int n_pools,
                        std::size_t pool_size, double tol, std::int64_t w_samples, int w_depth,
                        std::uint64_t seed, int parallelism);

// E[gamma_n(o)]/n and E[Gamma_n(o)]/n = m E[gamma_{n-1}(o)]/n via batch pools.
// E[gamma_n]/n approaches its limit like (limit - c/n); the extrapolated field
// removes the 1/n term with the two-point rule 2 g(n) - g(n/2).
struct GammaGrowth {
  EstimateCI gamma_over_n;
  EstimateCI gamma_over_n_extrap;
  EstimateCI big_gamma_over_n;
};
GammaGrowth gamma_growth(const OffspringDist& dist, double alpha, int n, int n_pools,
                         std::size_t pool_size, std::uint64_t seed, int parallelism);

// Tree-recursion side of the spine representation: mean Phi_n(r) over hybrid
// trees (levels 0..r+1 materialized, boundary from the pool), plus the max of
// Phi_n(r) / (e^{alpha r} W(o,r)) over sampled trees (must stay <= 1).
struct PhiTreeEstimate {
  EstimateCI mean_phi;
  double max_bound_ratio;
};
PhiTreeEstimate phi_tree_estimate(const OffspringDist& dist, double alpha, int n, int r,
                                  std::int64_t trees, const BetaPool& pool, std::uint64_t seed,
                                  int parallelism);

// lhs = lim E[gamma_n(o)]/n (two-point 1/n extrapolation at n), rhs =
// E[beta(o)]/v_alpha with the velocity passed in from the walk module.
struct HittingCross {
  EstimateCI lhs_raw;     // E[gamma_n]/n at n
  EstimateCI lhs;         // extrapolated limit
  double rhs;
  double rhs_sem;
  double sigma;           // |lhs - rhs| in combined sigmas
};
HittingCross hitting_velocity_crosscheck(const OffspringDist& dist, double alpha, int n,
                                         int n_pools, std::size_t pool_size, double tol,
                                         const EstimateCI& v_alpha, std::uint64_t seed,
                                         int parallelism);

}  // namespace gwer::recursion
