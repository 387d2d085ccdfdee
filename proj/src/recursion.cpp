#include "gwer/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwer/error.hpp"
#include "gwer/parallel.hpp"
#include "gwer/population.hpp"

namespace gwer::recursion {

namespace {

// Ids are level-ordered (BFS append), so a reverse-id sweep is post-order.
void solve_range(const TreeArena& tree, int boundary_level, double lambda,
                 std::vector<double>& beta, std::vector<double>& gamma) {
  std::size_t n_nodes = tree.node_count();
  for (std::size_t idx = n_nodes; idx-- > 0;) {
    NodeId v = static_cast<NodeId>(idx);
    int level = tree.rho(v);
    if (level > boundary_level) continue;
    if (level == boundary_level) continue;  // boundary rows pre-filled by caller
    if (!tree.expanded(v))
      fail(Errc::InsufficientDepth,
           "node " + std::to_string(v) + " at level " + std::to_string(level) + " unexpanded");
    double sb = 0.0, sg = 0.0;
    int d = tree.degree(v);
    for (int i = 0; i < d; ++i) {
      NodeId c = tree.child(v, i);
      sb += beta[static_cast<std::size_t>(c)];
      sg += gamma[static_cast<std::size_t>(c)];
    }
    beta[static_cast<std::size_t>(v)] = sb / (lambda + sb);
    gamma[static_cast<std::size_t>(v)] = (1.0 + sg) / (lambda + sb);
  }
}

}  // namespace

BetaGammaTable solve(const TreeArena& tree, int n, double lambda) {
  if (n < 1) fail(Errc::DomainError, "level cut must be >= 1");
  BetaGammaTable t;
  t.level_cut = n;
  t.lambda = lambda;
  t.beta.assign(tree.node_count(), 0.0);
  t.gamma.assign(tree.node_count(), 0.0);
  bool saw_boundary = false;
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    if (tree.rho(static_cast<NodeId>(i)) == n) {
      t.beta[i] = 1.0;
      t.gamma[i] = 0.0;
      saw_boundary = true;
    }
  }
  if (!saw_boundary) fail(Errc::InsufficientDepth, "tree has no nodes at level " + std::to_string(n));
  solve_range(tree, n, lambda, t.beta, t.gamma);
  return t;
}

BetaGammaTable solve_with_pool_boundary(const TreeArena& tree, int cut, int n,
                                        const BetaPool& pool, RngStream& rng) {
  if (cut < 1 || cut > n) fail(Errc::DomainError, "need 1 <= cut <= n");
  BetaGammaTable t;
  t.level_cut = n;
  t.lambda = pool.lambda();
  t.beta.assign(tree.node_count(), 0.0);
  t.gamma.assign(tree.node_count(), 0.0);
  int bgen = n - cut;
  bool saw_boundary = false;
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    if (tree.rho(static_cast<NodeId>(i)) == cut) {
      const BetaPool::Element& e = pool.draw(bgen, rng);
      t.beta[i] = e.beta;
      t.gamma[i] = e.gamma;
      saw_boundary = true;
    }
  }
  if (!saw_boundary) fail(Errc::InsufficientDepth, "tree has no nodes at level " + std::to_string(cut));
  solve_range(tree, cut, t.lambda, t.beta, t.gamma);
  return t;
}

PhiProfile phi_profile(const TreeArena& tree, const BetaGammaTable& table, int r_max) {
  if (r_max < 1 || r_max > table.level_cut - 1)
    fail(Errc::DomainError, "need 1 <= r_max <= n-1");
  double lambda = table.lambda;
  PhiProfile p;
  p.phi.assign(static_cast<std::size_t>(r_max), 0.0);
  bool log_space = r_max > 64;

  // Per-node accumulated path product prod_{i<=|x|} 1/(lambda (1+B(u_i))).
  std::vector<double> acc(tree.node_count(), 0.0);
  NodeId root = tree.root();
  {
    double sb = 0.0;
    int d = tree.degree(root);
    for (int i = 0; i < d; ++i) {
      NodeId c = tree.child(root, i);
      sb += table.beta[static_cast<std::size_t>(c)];
      p.gamma_root += table.gamma[static_cast<std::size_t>(c)];
    }
    p.b_root = sb / lambda;
  }
  acc[static_cast<std::size_t>(root)] = log_space ? 0.0 : 1.0;
  // Ids are level-ordered; parents precede children.
  for (std::size_t i = 0; i < tree.node_count(); ++i) {
    NodeId v = static_cast<NodeId>(i);
    int level = tree.rho(v);
    if (level < 0 || level > r_max) continue;
    if (v != root) {
      // B(v) needs children's beta
      double sb = 0.0;
      int d = tree.degree(v);
      for (int c = 0; c < d; ++c) sb += table.beta[static_cast<std::size_t>(tree.child(v, c))];
      double b = sb / lambda;
      double factor = 1.0 / (lambda * (1.0 + b));
      double par = acc[static_cast<std::size_t>(tree.parent(v))];
      double a = log_space ? par + std::log(factor) : par * factor;
      acc[static_cast<std::size_t>(v)] = a;
      p.phi[static_cast<std::size_t>(level - 1)] += log_space ? std::exp(a) : a;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// BetaPool
// ---------------------------------------------------------------------------

BetaPool::BetaPool(const OffspringDist& dist, double alpha, std::size_t pool_size,
                   std::uint64_t seed, int store_depth)
    : dist_(&dist),
      alpha_(alpha),
      lambda_(dist.bias_rate(alpha)),
      size_(pool_size),
      rng_(seed, 0xb5a1u),
      store_depth_(store_depth) {
  if (pool_size < 2) fail(Errc::DomainError, "pool size must be >= 2");
  cur_.assign(size_, Element{1.0, 0.0, 1.0});  // generation 0 boundary
  if (store_depth_ >= 0) snapshots_.push_back(cur_);
}

void BetaPool::step() {
  prev_.swap(cur_);
  cur_.resize(size_);
  double m = dist_->mean();
  std::size_t psz = prev_.size();
  for (std::size_t i = 0; i < size_; ++i) {
    int d = dist_->sample(rng_);
    double sb = 0.0, sg = 0.0, sm = 0.0;
    for (int k = 0; k < d; ++k) {
      const Element& e = prev_[rng_.below(psz)];
      sb += e.beta;
      sg += e.gamma;
      sm += e.mart;
    }
    cur_[i].beta = sb / (lambda_ + sb);
    cur_[i].gamma = (1.0 + sg) / (lambda_ + sb);
    cur_[i].mart = sm / m;
  }
  ++gen_;
  if (gen_ <= store_depth_) snapshots_.push_back(cur_);
}

void BetaPool::advance_to(int gen) {
  while (gen_ < gen) step();
}

int BetaPool::converge(double tol, int n0, int cap) {
  if (alpha_ <= 0.0)
    fail(Errc::DomainError, "escape probability limit exists only for alpha > 0");
  if (tol <= 0.0) fail(Errc::DomainError, "tol must be > 0");
  advance_to(n0);
  double prev_mean = mean_beta();
  int g = n0;
  while (2 * g <= cap) {
    g *= 2;
    advance_to(g);
    double cur_mean = mean_beta();
    // Pool means drift by resampling noise that accumulates across
    // generations (random-walk bound sqrt(2g) * sem); accept once the
    // decrement is below tol + 3x that floor. The decrement decays
    // geometrically, so the residual gap at stop is a small multiple of it.
    MomentAccumulator acc;
    for (const Element& e : cur_) acc.add(e.beta);
    double noise = 3.0 * acc.sem() * std::sqrt(2.0 * g);
    if (std::abs(prev_mean - cur_mean) < tol + noise) {
      converged_ = true;
      converged_gen_ = g;
      return g;
    }
    prev_mean = cur_mean;
  }
  fail(Errc::NoConvergence, "escape recursion not converged by generation " + std::to_string(cap));
}

const std::vector<BetaPool::Element>& BetaPool::at(int gen) const {
  if (gen < 0 || gen > store_depth_ || gen >= static_cast<int>(snapshots_.size()))
    fail(Errc::DomainError, "generation " + std::to_string(gen) + " not stored");
  return snapshots_[static_cast<std::size_t>(gen)];
}

double BetaPool::mean_beta() const {
  double s = 0.0;
  for (const Element& e : cur_) s += e.beta;
  return s / static_cast<double>(size_);
}

double BetaPool::mean_beta_at(int gen) const {
  const auto& v = at(gen);
  double s = 0.0;
  for (const Element& e : v) s += e.beta;
  return s / static_cast<double>(v.size());
}

double BetaPool::mean_gamma() const {
  double s = 0.0;
  for (const Element& e : cur_) s += e.gamma;
  return s / static_cast<double>(size_);
}

const BetaPool::Element& BetaPool::draw(int gen, RngStream& rng) const {
  const auto& v = at(gen);
  return v[rng.below(v.size())];
}

const BetaPool::Element& BetaPool::draw_converged(RngStream& rng) const {
  if (!converged_) fail(Errc::DomainError, "pool has not converged");
  return cur_[rng.below(cur_.size())];
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

EscapeResponse escape_response(const OffspringDist& dist, double alpha, int n_pools,
                               std::size_t pool_size, double tol, std::uint64_t seed,
                               int parallelism) {
  if (alpha <= 0.0) fail(Errc::DomainError, "escape response needs alpha > 0");
  std::vector<double> means(static_cast<std::size_t>(n_pools));
  std::vector<int> gens(static_cast<std::size_t>(n_pools));
  run_replicated(n_pools, 1, parallelism, seed, 0x1000,
                 [&](std::int64_t i, RngStream& rng, std::span<double> out) {
                   BetaPool pool(dist, alpha, pool_size, rng.next_u64());
                   gens[static_cast<std::size_t>(i)] = pool.converge(tol);
                   means[static_cast<std::size_t>(i)] = pool.mean_beta();
                   out[0] = 0.0;
                 });
  MomentAccumulator beta_acc, resp_acc;
  for (double mu : means) {
    beta_acc.add(mu);
    resp_acc.add(mu / alpha);
  }
  EscapeResponse r;
  r.mean_beta = estimate(beta_acc);
  r.response = estimate(resp_acc);
  r.generations = *std::max_element(gens.begin(), gens.end());
  return r;
}

double beta_limit_mean(const OffspringDist& dist, double alpha, double tol, std::uint64_t seed,
                       std::size_t pool_size, int n0, int cap) {
  BetaPool pool(dist, alpha, pool_size, seed);
  pool.converge(tol, n0, cap);
  return pool.mean_beta();
}

YMoments y_moment_check(const OffspringDist& dist, double alpha, int n_pools,
                        std::size_t pool_size, double tol, std::int64_t w_samples, int w_depth,
                        std::uint64_t seed, int parallelism) {
  if (alpha <= 0.0) fail(Errc::DomainError, "y_moment_check needs alpha > 0");
  MomentAccumulator ey_acc, ey2_acc;
  std::vector<double> ey(static_cast<std::size_t>(n_pools));
  std::vector<double> ey2(static_cast<std::size_t>(n_pools));
  run_replicated(n_pools, 1, parallelism, seed, 0x2000,
                 [&](std::int64_t i, RngStream& rng, std::span<double> out) {
                   BetaPool pool(dist, alpha, pool_size, rng.next_u64());
                   pool.converge(tol);
                   double s = 0.0, s2 = 0.0;
                   for (const auto& e : pool.current()) {
                     double y = e.beta / alpha;
                     s += y;
                     s2 += y * y;
                   }
                   ey[static_cast<std::size_t>(i)] = s / static_cast<double>(pool_size);
                   ey2[static_cast<std::size_t>(i)] = s2 / static_cast<double>(pool_size);
                   out[0] = 0.0;
                 });
  for (int i = 0; i < n_pools; ++i) {
    ey_acc.add(ey[static_cast<std::size_t>(i)]);
    ey2_acc.add(ey2[static_cast<std::size_t>(i)]);
  }
  auto w2_acc = run_replicated(w_samples, parallelism, seed, 0x3000,
                               [&](std::int64_t, RngStream& rng) {
                                 double w = pop::w_sample(dist, w_depth, rng);
                                 return w * w;
                               });
  YMoments r;
  r.ey = estimate(ey_acc);
  r.ey2 = estimate(ey2_acc);
  r.ew2 = estimate(w2_acc);
  r.gap_moments = std::abs(r.ey.mean - r.ey2.mean);
  r.gap_w = std::abs(r.ey.mean - 1.0 / r.ew2.mean);
  return r;
}

GammaGrowth gamma_growth(const OffspringDist& dist, double alpha, int n, int n_pools,
                         std::size_t pool_size, std::uint64_t seed, int parallelism) {
  double m = dist.mean();
  int half = n / 2;
  std::vector<double> g_half(static_cast<std::size_t>(n_pools));
  std::vector<double> g_n(static_cast<std::size_t>(n_pools));
  std::vector<double> g_nm1(static_cast<std::size_t>(n_pools));
  run_replicated(n_pools, 1, parallelism, seed, 0x4000,
                 [&](std::int64_t i, RngStream& rng, std::span<double> out) {
                   BetaPool pool(dist, alpha, pool_size, rng.next_u64());
                   pool.advance_to(half);
                   g_half[static_cast<std::size_t>(i)] = pool.mean_gamma();
                   pool.advance_to(n - 1);
                   g_nm1[static_cast<std::size_t>(i)] = pool.mean_gamma();
                   pool.advance_to(n);
                   g_n[static_cast<std::size_t>(i)] = pool.mean_gamma();
                   out[0] = 0.0;
                 });
  MomentAccumulator acc_n, acc_extrap, acc_big;
  for (int i = 0; i < n_pools; ++i) {
    double gn = g_n[static_cast<std::size_t>(i)] / static_cast<double>(n);
    double gh = g_half[static_cast<std::size_t>(i)] / static_cast<double>(half);
    acc_n.add(gn);
    acc_extrap.add(2.0 * gn - gh);
    acc_big.add(m * g_nm1[static_cast<std::size_t>(i)] / static_cast<double>(n));
  }
  GammaGrowth r;
  r.gamma_over_n = estimate(acc_n);
  r.gamma_over_n_extrap = estimate(acc_extrap);
  r.big_gamma_over_n = estimate(acc_big);
  return r;
}

HittingCross hitting_velocity_crosscheck(const OffspringDist& dist, double alpha, int n,
                                         int n_pools, std::size_t pool_size, double tol,
                                         const EstimateCI& v_alpha, std::uint64_t seed,
                                         int parallelism) {
  if (alpha <= 0.0) fail(Errc::DomainError, "hitting crosscheck needs alpha > 0");
  GammaGrowth g = gamma_growth(dist, alpha, n, n_pools, pool_size, seed, parallelism);
  EscapeResponse er = escape_response(dist, alpha, n_pools, pool_size, tol, seed, parallelism);
  HittingCross h;
  h.lhs_raw = g.gamma_over_n;
  h.lhs = g.gamma_over_n_extrap;
  h.rhs = er.mean_beta.mean / v_alpha.mean;
  h.rhs_sem = h.rhs * std::sqrt(std::pow(er.mean_beta.stderr_mean / er.mean_beta.mean, 2) +
                                std::pow(v_alpha.stderr_mean / v_alpha.mean, 2));
  h.sigma = sigma_distance(h.lhs.mean, h.lhs.stderr_mean, h.rhs, h.rhs_sem);
  return h;
}

PhiTreeEstimate phi_tree_estimate(const OffspringDist& dist, double alpha, int n, int r,
                                  std::int64_t trees, const BetaPool& pool, std::uint64_t seed,
                                  int parallelism) {
  if (r < 1 || r >= n) fail(Errc::DomainError, "need 1 <= r < n");
  int cut = r + 1;
  auto cols = run_collect(trees, 2, parallelism, seed, 0x5000,
                          [&](std::int64_t, RngStream& rng, std::span<double> out) {
                            TreeArena tree = TreeArena::sample_gw(dist, cut, rng);
                            BetaGammaTable table = solve_with_pool_boundary(tree, cut, n, pool, rng);
                            PhiProfile prof = phi_profile(tree, table, r);
                            double phi = prof.phi[static_cast<std::size_t>(r - 1)];
                            double w_r = tree.w_estimate(tree.root(), r);
                            out[0] = phi;
                            out[1] = w_r > 0.0 ? phi / (std::exp(alpha * r) * w_r) : 0.0;
                          });
  MomentAccumulator phi_acc;
  double max_ratio = 0.0;
  for (std::size_t i = 0; i < cols[0].size(); ++i) {
    phi_acc.add(cols[0][i]);
    max_ratio = std::max(max_ratio, cols[1][i]);
  }
  return {estimate(phi_acc), max_ratio};
}

}  // namespace gwer::recursion
