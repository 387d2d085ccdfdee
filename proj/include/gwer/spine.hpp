#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gwer/offspring.hpp"
#include "gwer/recursion.hpp"
#include "gwer/rng.hpp"
#include "gwer/stats.hpp"

namespace gwer::spine {

// One-dimensional walk whose weighted path functionals represent products of
// (1 - beta) along the spine: up with probability lambda/(lambda+m^2).
struct StepLaw {
  double p_up;
  double p_down;
};
StepLaw step_law(const ModelConstants& c, double alpha);

// ---------------------------------------------------------------------------
// Exact hitting identity (weighted gambler's ruin)
// ---------------------------------------------------------------------------
// z_n = 0, z_j = 1 / (1 + a_j + b_{j+1} (1 - z_{j+1})); the product
// prod_{j=1..r} z_j equals the expected visit-weighted indicator of hitting 0
// before n for the chain with up-odds b_{j+1} and per-visit weight
// (1+b_{j+1}) / (1+b_{j+1}+a_j) at state j.
struct RuinInstance {
  int n;                  // >= 2
  std::vector<double> a;  // a_0..a_{n-1}, >= 0
  std::vector<double> b;  // b_1..b_n (b[j] holds b_{j+1} for state j), > 0
  int r;                  // start state, 1 <= r < n
};

double ruin_product_recursion(const RuinInstance& inst);
// Exact tridiagonal solve of the absorbed weighted chain; SingularSystem if a
// pivot vanishes (not expected for valid weights).
double ruin_product_oracle(const RuinInstance& inst);

// ---------------------------------------------------------------------------
// Spine environments
// ---------------------------------------------------------------------------
// Random potential f(x) = (m^2+lambda) / (m (1 + lambda + lambda a_x)).
// Finite cut: a_x for spine sites 0..cut-1 come with the coupled normalized
// progeny of the same size-biased tree; sites below 0 are fresh iid. Infinite
// cut: a-values from the converged pool, lazily per site, coupled with the
// progeny and the spine escape probability beta(u*_1).
class SpineEnv {
 public:
  // Finite cut: pool must store generations up to cut + |x_min| - 1.
  static SpineEnv finite_cut(const recursion::BetaPool& pool, int cut, int x_min, RngStream& rng);
  // Infinite cut: pool must be converged; spine_depth sites prebuilt, more on
  // demand.
  static SpineEnv infinite_cut(const recursion::BetaPool& pool, int spine_depth, RngStream& rng);

  double a(int x, RngStream& rng);
  double log_f(int x, RngStream& rng);
  // f(x) = (m^2+lambda) / (m (1 + lambda + lambda a_x))
  double f(int x, RngStream& rng) { return std::exp(log_f(x, rng)); }
  double f_max() const;  // (m^2+lambda)/(m+m lambda)

  double m_root() const { return m_root_; }      // M(o)
  double m_spine1() const { return m_spine1_; }  // M(u*_1)
  double a1() const { return a_spine_.size() > 1 ? a_spine_[1] : 0.0; }
  double beta_spine1() const { return beta_u1_; }  // infinite cut only

  double lambda() const { return lambda_; }
  double m() const { return m_; }

 private:
  SpineEnv() = default;
  double fresh_a(int x, RngStream& rng);
  void extend_spine(int x, RngStream& rng);
  double log_f_of_a(double av) const;

  const recursion::BetaPool* pool_ = nullptr;
  int cut_ = -1;  // -1 = infinite
  double lambda_ = 0.0;
  double m_ = 0.0;
  std::vector<double> a_spine_;    // x >= 0
  std::vector<double> lf_spine_;
  std::vector<double> a_neg_;      // x = -1, -2, ...
  std::vector<double> lf_neg_;
  double m_root_ = 0.0;
  double m_spine1_ = 0.0;
  double beta_u1_ = 0.0;
};

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

// Spine Monte Carlo for the mean path-product profile: Q[Z_n(r)/M_{n-r}] with
// Z_n(r) estimated by `inner` walk replicas per environment.
EstimateCI phi_spine_estimate(const OffspringDist& dist, double alpha, int n, int r,
                              std::int64_t outer, int inner, const recursion::BetaPool& pool,
                              std::uint64_t seed, int parallelism);

// Regeneration decomposition of one long path under the infinite-cut
// potential. Blocks after the first are the iid block-product samples.
struct SpineBlock {
  double zeta;      // product of f over the block
  int displacement;  // S_{R_j} - S_{R_{j-1}} (<= -1)
  int length;       // R_j - R_{j-1}
};
struct BlockSample {
  double zeta1 = 1.0;  // leading block product
  int r1 = 0;          // first regeneration time
  std::vector<SpineBlock> blocks;
};
// PathTooShort if no regeneration is confirmed within max_steps.
BlockSample regeneration_blocks(const recursion::BetaPool& pool, std::int64_t max_steps,
                                int buffer, RngStream& rng, std::size_t want_blocks = 0);

int default_buffer(const ModelConstants& c, double alpha);  // (lambda/m^2)^K < 1e-12

// E[zeta_2] over fixed block counts per path; equals 1.
EstimateCI zeta2_mean(const OffspringDist& dist, double alpha, std::int64_t paths,
                      int blocks_per_path, const recursion::BetaPool& pool, std::uint64_t seed,
                      int parallelism);

// Same estimate over independent pools; the batch stderr includes the pool's
// own law-approximation noise, which a shared pool hides.
EstimateCI zeta2_batched(const OffspringDist& dist, double alpha, int n_pools,
                         std::int64_t paths_per_pool, int blocks_per_path, std::size_t pool_size,
                         double tol, std::uint64_t seed, int parallelism);

// E[zeta_2 |S_{R_2}-S_{R_1}|]; tends to m/(m-1) as alpha -> 0.
EstimateCI renewal_denominator(const OffspringDist& dist, double alpha, std::int64_t paths,
                               int blocks_per_path, const recursion::BetaPool& pool,
                               std::uint64_t seed, int parallelism);

// h(y): block product down to depth y within the first block, under a
// conditioning chosen by rejection sampling. NeverHitUp conditions on
// tau_S(1) = infinity; NeverReturn conditions on the walk never revisiting its
// start site, which is the law of the inter-regeneration pieces and the
// version that closes the renewal identity at fixed alpha (the two laws merge
// as alpha -> 0).
enum class HCondition { NeverHitUp, NeverReturn };
struct HEstimate {
  std::vector<double> h;       // h[y-1], y = 1..y_max
  std::vector<double> h_sem;
  double sum_h;
  double sum_h_sem;
  double acceptance;           // fraction of accepted paths
};
HEstimate h_estimate(const OffspringDist& dist, double alpha, int y_max, std::int64_t samples,
                     const recursion::BetaPool& pool, std::uint64_t seed, int parallelism,
                     HCondition cond = HCondition::NeverHitUp);

// Velocity representation: v = m * E[prod f * beta(u*_1)/M(u*_1)] /
// E[prod f / M(o)], products over the first regeneration block, environments
// shared between numerator and denominator.
struct VelocityRep {
  RatioEstimate ratio;  // numerator/denominator with jackknife stderr
  double v;             // m * ratio
  double sem;           // m * stderr_jack
  EstimateCI numerator;
  EstimateCI denominator;
};
VelocityRep velocity_representation(const OffspringDist& dist, double alpha, std::int64_t samples,
                                    const recursion::BetaPool& pool, std::uint64_t seed,
                                    int parallelism, int spine_depth = 48);

// Two-sided bound on E[B_n(o)] through the shifted spine functional at r.
struct SandwichBounds {
  EstimateCI lower;   // (m/lambda) Q[Z_n(r-1)/M(u*_1) * a_1/(1+a_1)]
  EstimateCI upper;   // (m/lambda) Q[Z_n(r-1)/M(u*_1)]
  EstimateCI middle;  // E[B_n(o)] from the pool law
};
SandwichBounds remark_sandwich(const OffspringDist& dist, double alpha, int n, int r,
                               std::int64_t outer, int inner, const recursion::BetaPool& pool,
                               std::uint64_t seed, int parallelism);

}  // namespace gwer::spine
