#include "gwer/spine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gwer/error.hpp"
#include "gwer/parallel.hpp"

namespace gwer::spine {

StepLaw step_law(const ModelConstants& c, double alpha) {
  double lambda = c.m * std::exp(-alpha);
  double denom = lambda + c.m * c.m;
  return {lambda / denom, c.m * c.m / denom};
}

// ---------------------------------------------------------------------------
// Weighted gambler's ruin identity
// ---------------------------------------------------------------------------

double ruin_product_recursion(const RuinInstance& inst) {
  if (inst.n < 2 || inst.r < 1 || inst.r >= inst.n)
    fail(Errc::DomainError, "need n >= 2, 1 <= r < n");
  std::vector<double> z(static_cast<std::size_t>(inst.n) + 1, 0.0);
  for (int j = inst.n - 1; j >= 0; --j) {
    double bj1 = inst.b[static_cast<std::size_t>(j)];
    z[static_cast<std::size_t>(j)] =
        1.0 / (1.0 + inst.a[static_cast<std::size_t>(j)] + bj1 * (1.0 - z[static_cast<std::size_t>(j) + 1]));
  }
  double prod = 1.0;
  for (int j = 1; j <= inst.r; ++j) prod *= z[static_cast<std::size_t>(j)];
  return prod;
}

double ruin_product_oracle(const RuinInstance& inst) {
  if (inst.n < 2 || inst.r < 1 || inst.r >= inst.n)
    fail(Errc::DomainError, "need n >= 2, 1 <= r < n");
  int m = inst.n - 1;  // unknowns g(1..n-1)
  // g(j) = w_j [p_j g(j+1) + q_j g(j-1)], g(0) = 1, g(n) = 0,
  // p_j = b_{j+1}/(1+b_{j+1}), q_j = 1 - p_j, w_j = (1+b_{j+1})/(1+b_{j+1}+a_j).
  std::vector<double> sub(static_cast<std::size_t>(m), 0.0), diag(static_cast<std::size_t>(m), 0.0),
      sup(static_cast<std::size_t>(m), 0.0), rhs(static_cast<std::size_t>(m), 0.0);
  for (int j = 1; j <= m; ++j) {
    double bj1 = inst.b[static_cast<std::size_t>(j)];
    double aj = inst.a[static_cast<std::size_t>(j)];
    double p = bj1 / (1.0 + bj1);
    double q = 1.0 - p;
    double w = (1.0 + bj1) / (1.0 + bj1 + aj);
    std::size_t i = static_cast<std::size_t>(j - 1);
    diag[i] = 1.0;
    sup[i] = -w * p;   // couples to g(j+1)
    sub[i] = -w * q;   // couples to g(j-1)
    if (j == 1)
      rhs[i] = w * q;  // g(0) = 1
  }
  // Thomas sweep.
  for (int i = 1; i < m; ++i) {
    std::size_t k = static_cast<std::size_t>(i);
    double piv = diag[k - 1];
    if (std::abs(piv) < 1e-14) fail(Errc::SingularSystem, "zero pivot in ruin oracle");
    double f = sub[k] / piv;
    diag[k] -= f * sup[k - 1];
    rhs[k] -= f * rhs[k - 1];
  }
  std::vector<double> g(static_cast<std::size_t>(m), 0.0);
  if (std::abs(diag[static_cast<std::size_t>(m - 1)]) < 1e-14)
    fail(Errc::SingularSystem, "zero pivot in ruin oracle");
  g[static_cast<std::size_t>(m - 1)] = rhs[static_cast<std::size_t>(m - 1)] / diag[static_cast<std::size_t>(m - 1)];
  for (int i = m - 2; i >= 0; --i) {
    std::size_t k = static_cast<std::size_t>(i);
    if (std::abs(diag[k]) < 1e-14) fail(Errc::SingularSystem, "zero pivot in ruin oracle");
    g[k] = (rhs[k] - sup[k] * g[k + 1]) / diag[k];
  }
  return g[static_cast<std::size_t>(inst.r - 1)];
}

// ---------------------------------------------------------------------------
// SpineEnv
// ---------------------------------------------------------------------------

double SpineEnv::log_f_of_a(double av) const {
  return std::log(m_ * m_ + lambda_) - std::log(m_) - std::log1p(lambda_ + lambda_ * av);
}

double SpineEnv::f_max() const { return (m_ * m_ + lambda_) / (m_ + m_ * lambda_); }

double SpineEnv::fresh_a(int gen, RngStream& rng) {
  int dstar = pool_->dist().sample_size_biased(rng);
  double sb = 0.0;
  for (int k = 0; k < dstar - 1; ++k)
    sb += (gen < 0 ? pool_->draw_converged(rng) : pool_->draw(gen, rng)).beta;
  return sb / lambda_;
}

SpineEnv SpineEnv::finite_cut(const recursion::BetaPool& pool, int cut, int x_min, RngStream& rng) {
  if (cut < 0) fail(Errc::DomainError, "cut must be >= 0");
  SpineEnv e;
  e.pool_ = &pool;
  e.cut_ = cut;
  e.lambda_ = pool.lambda();
  e.m_ = pool.dist().mean();
  double m = e.m_;
  // Spine levels 0..cut-1: a_j coupled with the same subtrees' progeny.
  e.m_root_ = std::pow(m, -cut);
  e.m_spine1_ = cut >= 1 ? std::pow(m, -(cut - 1)) : 1.0;
  for (int j = 0; j < cut; ++j) {
    int dstar = pool.dist().sample_size_biased(rng);
    double sb = 0.0, sm = 0.0;
    for (int k = 0; k < dstar - 1; ++k) {
      const auto& el = pool.draw(cut - j - 1, rng);
      sb += el.beta;
      sm += el.mart;
    }
    e.a_spine_.push_back(sb / e.lambda_);
    e.lf_spine_.push_back(e.log_f_of_a(e.a_spine_.back()));
    e.m_root_ += std::pow(m, -(j + 1)) * sm;
    if (j >= 1) e.m_spine1_ += std::pow(m, -j) * sm;
  }
  // Fresh sites below the root: a_x ~ law at generation cut - x - 1.
  for (int x = -1; x >= x_min; --x) {
    e.a_neg_.push_back(e.fresh_a(cut - x - 1, rng));
    e.lf_neg_.push_back(e.log_f_of_a(e.a_neg_.back()));
  }
  return e;
}

SpineEnv SpineEnv::infinite_cut(const recursion::BetaPool& pool, int spine_depth, RngStream& rng) {
  if (!pool.is_converged()) fail(Errc::DomainError, "infinite-cut environment needs a converged pool");
  SpineEnv e;
  e.pool_ = &pool;
  e.cut_ = -1;
  e.lambda_ = pool.lambda();
  e.m_ = pool.dist().mean();
  double m = e.m_;
  e.m_root_ = std::pow(m, -spine_depth);  // spine tail, keeps E[M] = 1 exactly
  e.m_spine1_ = spine_depth >= 1 ? std::pow(m, -(spine_depth - 1)) : 1.0;
  std::vector<double> level_mart(static_cast<std::size_t>(spine_depth), 0.0);
  for (int j = 0; j < spine_depth; ++j) {
    int dstar = pool.dist().sample_size_biased(rng);
    double sb = 0.0, sm = 0.0;
    for (int k = 0; k < dstar - 1; ++k) {
      const auto& el = pool.draw_converged(rng);
      sb += el.beta;
      sm += el.mart;
    }
    e.a_spine_.push_back(sb / e.lambda_);
    e.lf_spine_.push_back(e.log_f_of_a(e.a_spine_.back()));
    level_mart[static_cast<std::size_t>(j)] = sm;
    e.m_root_ += std::pow(m, -(j + 1)) * sm;
    if (j >= 1) e.m_spine1_ += std::pow(m, -j) * sm;
  }
  // beta(u*_1) by the top-down spine recursion, seeded from the pool law at
  // depth spine_depth (the recursion contracts geometrically in the seed).
  double beta = pool.draw_converged(rng).beta;
  for (int j = spine_depth - 1; j >= 1; --j) {
    double la = e.lambda_ * e.a_spine_[static_cast<std::size_t>(j)];
    beta = (beta + la) / (e.lambda_ + beta + la);
  }
  e.beta_u1_ = beta;
  return e;
}

void SpineEnv::extend_spine(int x, RngStream& rng) {
  while (static_cast<int>(a_spine_.size()) <= x) {
    a_spine_.push_back(fresh_a(cut_ < 0 ? -1 : cut_ - static_cast<int>(a_spine_.size()) - 1, rng));
    lf_spine_.push_back(log_f_of_a(a_spine_.back()));
  }
}

double SpineEnv::a(int x, RngStream& rng) {
  if (x >= 0) {
    if (cut_ >= 0 && x >= cut_) fail(Errc::DomainError, "site beyond finite cut");
    if (x >= static_cast<int>(a_spine_.size())) extend_spine(x, rng);
    return a_spine_[static_cast<std::size_t>(x)];
  }
  int d = -x;
  while (static_cast<int>(a_neg_.size()) < d) {
    int idx = static_cast<int>(a_neg_.size()) + 1;  // site -idx
    a_neg_.push_back(fresh_a(cut_ < 0 ? -1 : cut_ + idx - 1, rng));
    lf_neg_.push_back(log_f_of_a(a_neg_.back()));
  }
  return a_neg_[static_cast<std::size_t>(d - 1)];
}

double SpineEnv::log_f(int x, RngStream& rng) {
  a(x, rng);  // materialize
  return x >= 0 ? lf_spine_[static_cast<std::size_t>(x)] : lf_neg_[static_cast<std::size_t>(-x - 1)];
}

// ---------------------------------------------------------------------------
// Spine path engine
// ---------------------------------------------------------------------------

namespace {

struct Confirmed {
  int site;
  std::int64_t time;
  double cumlog;
};

struct PathOpts {
  int buffer = 20;
  std::size_t needed = 1;       // confirmed regenerations (excluding R_0)
  std::int64_t max_steps = 0;
  int reject_above = 1000000;   // reject when the walk reaches this site (t >= 1)
  int y_max = 0;                // first-arrival products for sites -1..-y_max
};

struct PathResult {
  bool rejected = false;
  std::vector<Confirmed> regs;
  std::vector<double> first_logs;  // log prod at first arrival of -y; NaN if unreached
};

// Regeneration candidates are visits at the running minimum; the last such
// visit to a site becomes the regeneration once the walk descends `buffer`
// levels past it without returning ((lambda/m^2)^buffer residual).
PathResult run_spine_path(SpineEnv& env, double p_up, const PathOpts& opt, RngStream& rng) {
  PathResult res;
  res.first_logs.assign(static_cast<std::size_t>(opt.y_max),
                        std::numeric_limits<double>::quiet_NaN());
  struct Rec {
    std::int64_t time;
    double cumlog;
    bool alive;
  };
  std::vector<Rec> recs;
  recs.push_back({0, 0.0, true});  // site 0 at time 0 (R_0)
  int s = 0;
  int min_site = 0;
  double cum = 0.0;
  for (std::int64_t t = 0; t < opt.max_steps; ++t) {
    cum += env.log_f(s, rng);
    s += rng.bernoulli(p_up) ? 1 : -1;
    std::int64_t tt = t + 1;
    if (s >= opt.reject_above) {
      res.rejected = true;
      return res;
    }
    if (s < min_site) {  // fresh minimum
      min_site = s;
      recs.push_back({tt, cum, true});
      int d = -s;
      if (d >= 1 && d <= opt.y_max) res.first_logs[static_cast<std::size_t>(d - 1)] = cum;
      int confirm_site = min_site + opt.buffer;
      if (confirm_site <= 0) {
        const Rec& r = recs[static_cast<std::size_t>(-confirm_site)];
        if (r.alive && r.time > 0) {
          res.regs.push_back({confirm_site, r.time, r.cumlog});
          if (res.regs.size() >= opt.needed) return res;
        }
      }
    } else if (s <= 0) {  // revisit
      Rec& r = recs[static_cast<std::size_t>(-s)];
      if (s == min_site) {
        r.time = tt;
        r.cumlog = cum;
        r.alive = true;
      } else {
        r.alive = false;
      }
    }
  }
  return res;  // caller decides whether this is PathTooShort
}

std::int64_t default_max_steps(int buffer, std::size_t needed, double p_up) {
  double drift = 1.0 - 2.0 * p_up;  // downward
  return static_cast<std::int64_t>(
      2000.0 + 50.0 * static_cast<double>(buffer + 20) * static_cast<double>(needed + 1) / drift);
}

}  // namespace

int default_buffer(const ModelConstants& c, double alpha) {
  double lambda = c.m * std::exp(-alpha);
  double rho = lambda / (c.m * c.m);  // up-crossing return probability
  return static_cast<int>(std::ceil(-12.0 * std::log(10.0) / std::log(rho))) + 1;
}

BlockSample regeneration_blocks(const recursion::BetaPool& pool, std::int64_t max_steps,
                                int buffer, RngStream& rng, std::size_t want_blocks) {
  if (buffer < 1) fail(Errc::BufferTooSmall, "buffer must be >= 1");
  SpineEnv env = SpineEnv::infinite_cut(pool, 8, rng);
  StepLaw law = step_law(pool.dist().constants(), pool.alpha());
  PathOpts opt;
  opt.buffer = buffer;
  opt.needed = want_blocks + 1;
  opt.max_steps = max_steps > 0 ? max_steps : default_max_steps(buffer, opt.needed, law.p_up);
  PathResult pr = run_spine_path(env, law.p_up, opt, rng);
  if (pr.regs.empty()) fail(Errc::PathTooShort, "no confirmed regeneration");
  if (want_blocks > 0 && pr.regs.size() < want_blocks + 1)
    fail(Errc::PathTooShort, "only " + std::to_string(pr.regs.size()) + " regenerations confirmed");
  BlockSample out;
  out.zeta1 = std::exp(pr.regs[0].cumlog);
  out.r1 = static_cast<int>(pr.regs[0].time);
  for (std::size_t j = 1; j < pr.regs.size(); ++j) {
    SpineBlock b;
    b.zeta = std::exp(pr.regs[j].cumlog - pr.regs[j - 1].cumlog);
    b.displacement = pr.regs[j].site - pr.regs[j - 1].site;
    b.length = static_cast<int>(pr.regs[j].time - pr.regs[j - 1].time);
    out.blocks.push_back(b);
  }
  return out;
}

EstimateCI zeta2_mean(const OffspringDist& dist, double alpha, std::int64_t paths,
                      int blocks_per_path, const recursion::BetaPool& pool, std::uint64_t seed,
                      int parallelism) {
  int buffer = default_buffer(dist.constants(), alpha);
  auto acc = run_replicated(paths, parallelism, seed, 0x6000,
                            [&](std::int64_t, RngStream& rng) {
                              BlockSample bs = regeneration_blocks(pool, 0, buffer, rng,
                                                                   static_cast<std::size_t>(blocks_per_path));
                              double s = 0.0;
                              for (const auto& b : bs.blocks) s += b.zeta;
                              return s / static_cast<double>(bs.blocks.size());
                            });
  return estimate(acc);
}

EstimateCI zeta2_batched(const OffspringDist& dist, double alpha, int n_pools,
                         std::int64_t paths_per_pool, int blocks_per_path, std::size_t pool_size,
                         double tol, std::uint64_t seed, int parallelism) {
  MomentAccumulator batch;
  for (int p = 0; p < n_pools; ++p) {
    recursion::BetaPool pool(dist, alpha, pool_size, seed + 0x12d687u * static_cast<std::uint64_t>(p + 1));
    pool.converge(tol);
    EstimateCI z = zeta2_mean(dist, alpha, paths_per_pool, blocks_per_path, pool,
                              seed + static_cast<std::uint64_t>(p), parallelism);
    batch.add(z.mean);
  }
  return estimate(batch);
}

EstimateCI renewal_denominator(const OffspringDist& dist, double alpha, std::int64_t paths,
                               int blocks_per_path, const recursion::BetaPool& pool,
                               std::uint64_t seed, int parallelism) {
  int buffer = default_buffer(dist.constants(), alpha);
  auto acc = run_replicated(paths, parallelism, seed, 0x7000,
                            [&](std::int64_t, RngStream& rng) {
                              BlockSample bs = regeneration_blocks(pool, 0, buffer, rng,
                                                                   static_cast<std::size_t>(blocks_per_path));
                              double s = 0.0;
                              for (const auto& b : bs.blocks)
                                s += b.zeta * std::abs(static_cast<double>(b.displacement));
                              return s / static_cast<double>(bs.blocks.size());
                            });
  return estimate(acc);
}

HEstimate h_estimate(const OffspringDist& dist, double alpha, int y_max, std::int64_t samples,
                     const recursion::BetaPool& pool, std::uint64_t seed, int parallelism,
                     HCondition cond) {
  int buffer = default_buffer(dist.constants(), alpha);
  StepLaw law = step_law(dist.constants(), alpha);
  // column y-1: product at depth y (0 if unreached); column y_max: sum over y;
  // column y_max+1: acceptance indicator handled by rejection loop count
  int width = y_max + 2;
  auto cols = run_collect(
      samples, width, parallelism, seed, 0x8000,
      [&](std::int64_t, RngStream& rng, std::span<double> out) {
        for (int attempt = 0;; ++attempt) {
          SpineEnv env = SpineEnv::infinite_cut(pool, 8, rng);
          PathOpts opt;
          opt.buffer = buffer;
          opt.needed = 1;
          opt.max_steps = default_max_steps(buffer, 1, law.p_up);
          opt.reject_above = cond == HCondition::NeverHitUp ? 1 : 0;
          opt.y_max = y_max;
          PathResult pr = run_spine_path(env, law.p_up, opt, rng);
          if (pr.rejected) {
            if (attempt > 10000) fail(Errc::PathTooShort, "rejection sampling stuck");
            continue;
          }
          if (pr.regs.empty()) fail(Errc::PathTooShort, "no confirmed regeneration");
          int depth_r1 = -pr.regs[0].site;
          double sum = 0.0;
          for (int y = 1; y <= y_max; ++y) {
            double v = 0.0;
            if (y <= depth_r1 && !std::isnan(pr.first_logs[static_cast<std::size_t>(y - 1)]))
              v = std::exp(pr.first_logs[static_cast<std::size_t>(y - 1)]);
            out[static_cast<std::size_t>(y - 1)] = v;
            sum += v;
          }
          out[static_cast<std::size_t>(y_max)] = sum;
          out[static_cast<std::size_t>(y_max + 1)] = static_cast<double>(attempt + 1);
          return;
        }
      });
  HEstimate r;
  r.h.resize(static_cast<std::size_t>(y_max));
  r.h_sem.resize(static_cast<std::size_t>(y_max));
  for (int y = 0; y < y_max; ++y) {
    MomentAccumulator a;
    for (double v : cols[static_cast<std::size_t>(y)]) a.add(v);
    r.h[static_cast<std::size_t>(y)] = a.mean;
    r.h_sem[static_cast<std::size_t>(y)] = a.sem();
  }
  MomentAccumulator sacc, attempts;
  for (double v : cols[static_cast<std::size_t>(y_max)]) sacc.add(v);
  for (double v : cols[static_cast<std::size_t>(y_max + 1)]) attempts.add(v);
  r.sum_h = sacc.mean;
  r.sum_h_sem = sacc.sem();
  r.acceptance = 1.0 / attempts.mean;
  return r;
}

VelocityRep velocity_representation(const OffspringDist& dist, double alpha, std::int64_t samples,
                                    const recursion::BetaPool& pool, std::uint64_t seed,
                                    int parallelism, int spine_depth) {
  int buffer = default_buffer(dist.constants(), alpha);
  StepLaw law = step_law(dist.constants(), alpha);
  auto cols = run_collect(samples, 2, parallelism, seed, 0x9000,
                          [&](std::int64_t, RngStream& rng, std::span<double> out) {
                            SpineEnv env = SpineEnv::infinite_cut(pool, spine_depth, rng);
                            PathOpts opt;
                            opt.buffer = buffer;
                            opt.needed = 1;
                            opt.max_steps = default_max_steps(buffer, 1, law.p_up);
                            PathResult pr = run_spine_path(env, law.p_up, opt, rng);
                            if (pr.regs.empty())
                              fail(Errc::PathTooShort, "no confirmed regeneration");
                            double prod = std::exp(pr.regs[0].cumlog);
                            out[0] = prod * env.beta_spine1() / env.m_spine1();
                            out[1] = prod / env.m_root();
                          });
  VelocityRep r;
  r.ratio = ratio_jackknife(cols[0], cols[1]);
  double m = dist.mean();
  r.v = m * r.ratio.ratio;
  r.sem = m * r.ratio.stderr_jack;
  MomentAccumulator na, da;
  for (double v : cols[0]) na.add(v);
  for (double v : cols[1]) da.add(v);
  r.numerator = estimate(na);
  r.denominator = estimate(da);
  return r;
}

EstimateCI phi_spine_estimate(const OffspringDist& dist, double alpha, int n, int r,
                              std::int64_t outer, int inner, const recursion::BetaPool& pool,
                              std::uint64_t seed, int parallelism) {
  if (r < 1 || r > n) fail(Errc::DomainError, "need 1 <= r <= n");
  int cut = n - r;
  StepLaw law = step_law(dist.constants(), alpha);
  auto acc = run_replicated(
      outer, parallelism, seed, 0xa000, [&](std::int64_t, RngStream& rng) {
        SpineEnv env = SpineEnv::finite_cut(pool, cut, -(r - 1), rng);
        double sum = 0.0;
        for (int rep = 0; rep < inner; ++rep) {
          int s = 0;
          double lg = 0.0;
          for (;;) {
            if (s == -r) {
              sum += std::exp(lg);
              break;
            }
            if (s == cut) break;
            lg += env.log_f(s, rng);
            s += rng.bernoulli(law.p_up) ? 1 : -1;
          }
        }
        return sum / static_cast<double>(inner) / env.m_root();
      });
  return estimate(acc);
}

SandwichBounds remark_sandwich(const OffspringDist& dist, double alpha, int n, int r,
                               std::int64_t outer, int inner, const recursion::BetaPool& pool,
                               std::uint64_t seed, int parallelism) {
  if (r < 2 || r > n - 1) fail(Errc::DomainError, "need 2 <= r <= n-1");
  int cut = n - r + 1;  // the shifted functional sits at r-1
  StepLaw law = step_law(dist.constants(), alpha);
  double lambda = dist.bias_rate(alpha);
  double m = dist.mean();
  auto cols = run_collect(
      outer, 2, parallelism, seed, 0xb000, [&](std::int64_t, RngStream& rng, std::span<double> out) {
        SpineEnv env = SpineEnv::finite_cut(pool, cut, -(r - 2), rng);
        double sum = 0.0;
        for (int rep = 0; rep < inner; ++rep) {
          int s = 0;
          double lg = 0.0;
          for (;;) {
            if (s == -(r - 1)) {
              sum += std::exp(lg);
              break;
            }
            if (s == cut) break;
            lg += env.log_f(s, rng);
            s += rng.bernoulli(law.p_up) ? 1 : -1;
          }
        }
        double upper = (m / lambda) * sum / static_cast<double>(inner) / env.m_spine1();
        double a1 = env.a1();
        out[0] = upper;
        out[1] = upper * a1 / (1.0 + a1);
      });
  SandwichBounds out;
  MomentAccumulator ua, la;
  for (double v : cols[0]) ua.add(v);
  for (double v : cols[1]) la.add(v);
  out.upper = estimate(ua);
  out.lower = estimate(la);
  // E[B_n(o)] = E[(1/lambda) sum_{i<=d_o} beta_{n-1,i}] sampled from the pool law.
  auto acc = run_replicated(outer, parallelism, seed, 0xc000,
                            [&](std::int64_t, RngStream& rng) {
                              int d = dist.sample(rng);
                              double s = 0.0;
                              for (int i = 0; i < d; ++i) s += pool.draw(n - 1, rng).beta;
                              return s / lambda;
                            });
  out.middle = estimate(acc);
  return out;
}

}  // namespace gwer::spine
