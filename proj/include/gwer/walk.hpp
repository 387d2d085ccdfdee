#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gwer/offspring.hpp"
#include "gwer/parallel.hpp"
#include "gwer/rng.hpp"
#include "gwer/stats.hpp"
#include "gwer/tree.hpp"

namespace gwer::walk {

// Holding-time handling. MEAN_TIME advances time by the mean holding 1/(d+lambda)
// (variance reduction for first-moment estimators); EXACT_TIME draws the
// exponential holding and is mandatory wherever time randomness enters second
// moments.
enum class Mode { EXACT_TIME, MEAN_TIME };

struct StopRule {
  enum class Kind { Time, Level, Jumps } kind;
  double t_max = 0.0;
  int level = 0;
  std::int64_t max_jumps = 0;

  static StopRule time(double t) { return {Kind::Time, t, 0, 0}; }
  static StopRule level_hit(int n) { return {Kind::Level, 0.0, n, 0}; }
  static StopRule jumps(std::int64_t n) { return {Kind::Jumps, 0.0, 0, n}; }
};

struct TraceEntry {
  double time;
  int rho;
  int degree;
};

struct WalkSummary {
  int rho_final = 0;
  double elapsed = 0.0;
  std::int64_t n_jumps = 0;
  // first-hitting times of positive levels 1..max recorded level
  std::vector<double> tau_levels;
  // confirmed (level, time) regenerations; filled by level_regenerations
  std::vector<std::pair<int, double>> regen_levels;
  std::vector<TraceEntry> trace;  // only when cfg.record_trace
};

struct RunConfig {
  double alpha = 0.0;
  Mode mode = Mode::EXACT_TIME;
  StopRule stop = StopRule::time(1.0);
  bool record_trace = false;
};

// One jump of the alpha-biased walk at `node`: parent with probability
// lambda/(d+lambda), otherwise a uniform child. Children are grown on demand;
// under IGW so is the ancestor ray. At a GW root only child moves exist.
struct Step {
  NodeId next;
  double holding;
};
Step step(TreeArena& tree, NodeId node, double lambda, RngStream& rng, Mode mode);

WalkSummary run(TreeArena& tree, NodeId start, const RunConfig& cfg, RngStream& rng);

// Hindsight level-regeneration detection: a fresh-level hit is confirmed if the
// recorded path never returns to that level and ends >= buffer levels beyond.
// Needs a recorded trace; fills summary.regen_levels. BufferTooSmall if
// buffer < 1.
std::vector<std::pair<int, double>> level_regenerations(WalkSummary& summary, int buffer);

int default_regen_buffer(const OffspringDist& dist, double alpha);

// rho(X_horizon)/horizon over IGW trees (walk may climb above the root).
EstimateCI estimate_velocity(const OffspringDist& dist, double alpha, double horizon,
                             std::int64_t replicas, std::uint64_t seed, int parallelism,
                             Mode mode = Mode::MEAN_TIME, std::uint64_t stream_base = 0,
                             std::uint64_t node_cap = TreeArena::kDefaultCap);

// rho(X_t)^2/t at alpha = 0; EXACT_TIME is forced.
EstimateCI estimate_diffusivity(const OffspringDist& dist, double horizon, std::int64_t replicas,
                                std::uint64_t seed, int parallelism, std::uint64_t stream_base = 0);

// <m W_o^2 + sum_{children} W_s^2> / <W_o^2>^2 over IGW environments.
struct DiffusivityW {
  RatioEstimate ratio;  // the diffusivity estimate
  EstimateCI w2;        // <W_o^2>, converges to b
};
DiffusivityW estimate_diffusivity_w(const OffspringDist& dist, int depth, std::int64_t replicas,
                                    std::uint64_t seed, int parallelism, std::uint64_t stream_base = 0);

// Monte Carlo oracle for the escape recursion: P(walk from a fresh root child
// reaches level n before the root), averaged over GW trees.
EstimateCI estimate_beta_mc(const OffspringDist& dist, double alpha, int n, std::int64_t replicas,
                            std::uint64_t seed, int parallelism, std::uint64_t stream_base = 0);

// mean(tau_n)/n over GW trees (Level stop); pairs with 1/v_alpha.
EstimateCI estimate_tau_over_n(const OffspringDist& dist, double alpha, int n, std::int64_t replicas,
                               std::uint64_t seed, int parallelism);

// "jump_index,time,rho,node_degree" rows from a recorded trace.
void write_trace_csv(const WalkSummary& summary, std::ostream& os);

}  // namespace gwer::walk
