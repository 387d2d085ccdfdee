#include "gwer/walk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "gwer/error.hpp"
#include "gwer/population.hpp"

namespace gwer::walk {

Step step(TreeArena& tree, NodeId node, double lambda, RngStream& rng, Mode mode) {
  tree.ensure_children(node, rng);
  int d = tree.degree(node);
  NodeId parent = tree.parent_or_grow(node, rng);
  double rate = static_cast<double>(d) + (parent != kNoNode ? lambda : 0.0);
  double holding = mode == Mode::EXACT_TIME ? rng.exponential(rate) : 1.0 / rate;
  double u = rng.uniform() * rate;
  NodeId next;
  if (parent != kNoNode && u < lambda) {
    next = parent;
  } else {
    double v = parent != kNoNode ? u - lambda : u;
    int i = static_cast<int>(v);
    if (i >= d) i = d - 1;
    if (i < 0) i = 0;
    next = tree.child(node, i);
  }
  return {next, holding};
}

WalkSummary run(TreeArena& tree, NodeId start, const RunConfig& cfg, RngStream& rng) {
  double lambda = tree.dist().bias_rate(cfg.alpha);
  WalkSummary s;
  NodeId at = start;
  int max_level = 0;
  if (cfg.record_trace) {
    tree.ensure_children(at, rng);
    s.trace.push_back({0.0, tree.rho(at), tree.degree(at)});
  }
  for (;;) {
    switch (cfg.stop.kind) {
      case StopRule::Kind::Time:
        break;  // handled at the holding-time check below
      case StopRule::Kind::Level:
        if (tree.rho(at) >= cfg.stop.level) goto done;
        break;
      case StopRule::Kind::Jumps:
        if (s.n_jumps >= cfg.stop.max_jumps) goto done;
        break;
    }
    {
      Step st = step(tree, at, lambda, rng, cfg.mode);
      if (cfg.stop.kind == StopRule::Kind::Time && s.elapsed + st.holding >= cfg.stop.t_max) {
        s.elapsed = cfg.stop.t_max;
        goto done;
      }
      s.elapsed += st.holding;
      at = st.next;
      ++s.n_jumps;
      int r = tree.rho(at);
      if (r > max_level) {
        max_level = r;
        s.tau_levels.resize(static_cast<std::size_t>(max_level), 0.0);
        s.tau_levels[static_cast<std::size_t>(max_level - 1)] = s.elapsed;
      }
      if (cfg.record_trace) {
        tree.ensure_children(at, rng);
        s.trace.push_back({s.elapsed, r, tree.degree(at)});
      }
    }
  }
done:
  s.rho_final = tree.rho(at);
  return s;
}

std::vector<std::pair<int, double>> level_regenerations(WalkSummary& summary, int buffer) {
  if (buffer < 1) fail(Errc::BufferTooSmall, "regeneration buffer must be >= 1");
  if (summary.trace.empty()) fail(Errc::DomainError, "level_regenerations needs a recorded trace");
  std::vector<std::pair<int, double>> out;
  const auto& tr = summary.trace;
  int end_level = tr.back().rho;
  std::vector<int> suffmin(tr.size());
  suffmin.back() = tr.back().rho;
  for (std::size_t j = tr.size() - 1; j-- > 0;) suffmin[j] = std::min(tr[j].rho, suffmin[j + 1]);
  int max_level = 0;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    int r = tr[i].rho;
    if (r <= max_level) continue;
    max_level = r;
    if (end_level < r + buffer) continue;  // unconfirmed tail discarded
    if (i + 1 < tr.size() && suffmin[i + 1] > r) out.emplace_back(r, tr[i].time);
  }
  summary.regen_levels = out;
  return out;
}

int default_regen_buffer(const OffspringDist& dist, double alpha) {
  double denom = std::log(dist.mean()) + alpha;
  int k = denom > 0.0 ? static_cast<int>(std::ceil(40.0 / denom)) : 200;
  return std::clamp(k, 20, 200);
}

EstimateCI estimate_velocity(const OffspringDist& dist, double alpha, double horizon,
                             std::int64_t replicas, std::uint64_t seed, int parallelism, Mode mode,
                             std::uint64_t stream_base, std::uint64_t node_cap) {
  if (horizon <= 0.0) fail(Errc::DomainError, "horizon must be > 0");
  RunConfig cfg;
  cfg.alpha = alpha;
  cfg.mode = mode;
  cfg.stop = StopRule::time(horizon);
  auto acc = run_replicated(replicas, parallelism, seed, stream_base,
                            [&](std::int64_t, RngStream& rng) {
                              TreeArena tree(dist, Measure::IGW, node_cap);
                              WalkSummary s = run(tree, tree.root(), cfg, rng);
                              return static_cast<double>(s.rho_final) / horizon;
                            });
  return estimate(acc);
}

EstimateCI estimate_diffusivity(const OffspringDist& dist, double horizon, std::int64_t replicas,
                                std::uint64_t seed, int parallelism, std::uint64_t stream_base) {
  RunConfig cfg;
  cfg.alpha = 0.0;
  cfg.mode = Mode::EXACT_TIME;  // holding-time randomness enters the second moment
  cfg.stop = StopRule::time(horizon);
  auto acc = run_replicated(replicas, parallelism, seed, stream_base,
                            [&](std::int64_t, RngStream& rng) {
                              TreeArena tree(dist, Measure::IGW);
                              WalkSummary s = run(tree, tree.root(), cfg, rng);
                              double r = static_cast<double>(s.rho_final);
                              return r * r / horizon;
                            });
  return estimate(acc);
}

DiffusivityW estimate_diffusivity_w(const OffspringDist& dist, int depth, std::int64_t replicas,
                                    std::uint64_t seed, int parallelism, std::uint64_t stream_base) {
  double m = dist.mean();
  auto cols = run_collect(replicas, 2, parallelism, seed, stream_base,
                          [&](std::int64_t, RngStream& rng, std::span<double> out) {
                            pop::IgwSample s = pop::igw_sample(dist, depth, 0, rng);
                            double sum_ws2 = 0.0;
                            for (double w : s.child_w) sum_ws2 += w * w;
                            out[0] = m * s.w_root * s.w_root + sum_ws2;
                            out[1] = s.w_root * s.w_root;
                          });
  DiffusivityW r;
  MomentAccumulator w2;
  for (double v : cols[1]) w2.add(v);
  r.w2 = estimate(w2);
  // D0 = <m W^2 + sum W_s^2> / <W^2>^2 : jackknife over num/den^2
  std::int64_t n = static_cast<std::int64_t>(cols[0].size());
  double sx = 0.0, sy = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    sx += cols[0][static_cast<std::size_t>(i)];
    sy += cols[1][static_cast<std::size_t>(i)];
  }
  auto ratio2 = [&](double x, double y, std::int64_t cnt) {
    double mx = x / static_cast<double>(cnt);
    double my = y / static_cast<double>(cnt);
    return mx / (my * my);
  };
  RatioEstimate re;
  re.n = n;
  re.ratio = ratio2(sx, sy, n);
  double mean_loo = 0.0;
  std::vector<double> loo(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    loo[static_cast<std::size_t>(i)] =
        ratio2(sx - cols[0][static_cast<std::size_t>(i)], sy - cols[1][static_cast<std::size_t>(i)], n - 1);
    mean_loo += loo[static_cast<std::size_t>(i)];
  }
  mean_loo /= static_cast<double>(n);
  re.ratio_jack = static_cast<double>(n) * re.ratio - static_cast<double>(n - 1) * mean_loo;
  double ss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double d = loo[static_cast<std::size_t>(i)] - mean_loo;
    ss += d * d;
  }
  re.stderr_jack = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
  r.ratio = re;
  return r;
}

EstimateCI estimate_beta_mc(const OffspringDist& dist, double alpha, int n, std::int64_t replicas,
                            std::uint64_t seed, int parallelism, std::uint64_t stream_base) {
  if (n < 1) fail(Errc::DomainError, "level cut must be >= 1");
  RunConfig cfg;
  cfg.alpha = alpha;
  cfg.mode = Mode::MEAN_TIME;
  cfg.stop = StopRule::level_hit(n);
  auto acc = run_replicated(replicas, parallelism, seed, stream_base,
                            [&](std::int64_t, RngStream& rng) {
                              TreeArena tree(dist, Measure::GW);
                              tree.ensure_children(tree.root(), rng);
                              NodeId start = tree.child(tree.root(), 0);
                              double lambda = dist.bias_rate(alpha);
                              NodeId at = start;
                              for (;;) {
                                if (tree.rho(at) >= n) return 1.0;
                                if (at == tree.root()) return 0.0;
                                at = step(tree, at, lambda, rng, Mode::MEAN_TIME).next;
                              }
                            });
  return estimate(acc);
}

void write_trace_csv(const WalkSummary& summary, std::ostream& os) {
  if (summary.trace.empty()) fail(Errc::DomainError, "no trace recorded");
  os << "jump_index,time,rho,node_degree\n";
  char buf[96];
  for (std::size_t i = 0; i < summary.trace.size(); ++i) {
    const TraceEntry& e = summary.trace[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%d,%d\n", i, e.time, e.rho, e.degree);
    os << buf;
  }
}

EstimateCI estimate_tau_over_n(const OffspringDist& dist, double alpha, int n, std::int64_t replicas,
                               std::uint64_t seed, int parallelism) {
  RunConfig cfg;
  cfg.alpha = alpha;
  cfg.mode = Mode::MEAN_TIME;
  cfg.stop = StopRule::level_hit(n);
  auto acc = run_replicated(replicas, parallelism, seed, 0,
                            [&](std::int64_t, RngStream& rng) {
                              TreeArena tree(dist, Measure::GW);
                              WalkSummary s = run(tree, tree.root(), cfg, rng);
                              return s.elapsed / static_cast<double>(n);
                            });
  return estimate(acc);
}

}  // namespace gwer::walk
