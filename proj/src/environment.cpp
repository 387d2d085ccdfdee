#include "gwer/environment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwer/error.hpp"
#include "gwer/parallel.hpp"
#include "gwer/population.hpp"
#include "gwer/walk.hpp"

namespace gwer::env {

EnvView shift(EnvView view, NodeId x) {
  TreeArena& t = *view.tree;
  NodeId cur = view.current;
  bool adjacent = t.parent(cur) == x || (x != kNoNode && t.parent(x) == cur);
  if (!adjacent) fail(Errc::NotAdjacent, "shift target must neighbor the current root");
  return EnvView{view.tree, x};
}

double c_alpha(const ModelConstants& c, double alpha) {
  if (alpha >= 0.0) fail(Errc::DomainError, "C_alpha defined for alpha < 0");
  double ea = std::exp(alpha);
  return c.b / (1.0 - ea) + (1.0 - c.b) / (1.0 - ea / c.m);
}

double v_alpha_closed(const ModelConstants& c, double alpha) {
  return -c.m * std::exp(-alpha) / c_alpha(c, alpha);
}

int default_j_max(double alpha) { return static_cast<int>(std::ceil(8.0 / std::abs(alpha))); }

PsiAlphaEstimate z_alpha_sample(const OffspringDist& dist, double alpha, int j_max, int depth,
                                RngStream& rng) {
  if (alpha >= 0.0) fail(Errc::DomainError, "Z_alpha defined for alpha < 0");
  pop::IgwSample s = pop::igw_sample(dist, depth, j_max, rng);
  PsiAlphaEstimate e;
  e.z_alpha = s.z_alpha(alpha);
  e.c_alpha = c_alpha(dist.constants(), alpha);
  e.psi = e.z_alpha / e.c_alpha;
  e.truncation_j = j_max;
  e.martingale_depth = depth;
  e.truncation_bound =
      dist.constants().b * std::exp(alpha * (j_max + 1)) / (1.0 - std::exp(alpha));
  return e;
}

EstimateCI z_alpha_mean(const OffspringDist& dist, double alpha, int j_max, int depth,
                        std::int64_t samples, std::uint64_t seed, int parallelism) {
  auto acc = run_replicated(samples, parallelism, seed, 0,
                            [&](std::int64_t, RngStream& rng) {
                              return z_alpha_sample(dist, alpha, j_max, depth, rng).z_alpha;
                            });
  return estimate(acc);
}

EstimateCI psi_alpha_mean(const OffspringDist& dist, double alpha, int j_max, int depth,
                          std::int64_t samples, std::uint64_t seed, int parallelism) {
  auto acc = run_replicated(samples, parallelism, seed, 0,
                            [&](std::int64_t, RngStream& rng) {
                              return z_alpha_sample(dist, alpha, j_max, depth, rng).psi;
                            });
  return estimate(acc);
}

EstimateCI stationarity_residual(const OffspringDist& dist, double alpha, TestFn fn,
                                 std::int64_t samples, std::uint64_t seed, int parallelism,
                                 int j_max, int depth, double cap) {
  if (alpha >= 0.0) fail(Errc::DomainError, "stationary density exists for alpha < 0");
  if (j_max < 0) j_max = default_j_max(alpha);
  double lambda = dist.bias_rate(alpha);
  double c_norm = c_alpha(dist.constants(), alpha);
  double ea = std::exp(alpha);
  auto acc = run_replicated(
      samples, parallelism, seed, 0, [&](std::int64_t, RngStream& rng) {
        pop::IgwSample s = pop::igw_sample(dist, depth, j_max, rng);
        double z = s.z_alpha(alpha);
        double psi = z / c_norm;
        double f_self = 0.0, f_parent = 0.0;
        double sum_children = 0.0;
        switch (fn) {
          case TestFn::Degree:
            f_self = static_cast<double>(s.root_degree);
            f_parent = static_cast<double>(s.anc_deg[1]);
            for (int d : s.child_deg) sum_children += static_cast<double>(d);
            break;
          case TestFn::MartingaleW:
            f_self = s.w_root;
            f_parent = s.w_anc[1];
            for (double w : s.child_w) sum_children += w;
            break;
          case TestFn::TruncatedDensity: {
            // Shift identities: Z(tau_x T) = W_x + e^a Z(T),
            //                   Z(tau^{-1} T) = e^{-a} (Z(T) - W_o).
            f_self = std::min(z, cap);
            f_parent = std::min((z - s.w_root) / ea, cap);
            for (double w : s.child_w) sum_children += std::min(w + ea * z, cap);
            break;
          }
        }
        double lf = (sum_children - static_cast<double>(s.root_degree) * f_self) +
                    lambda * (f_parent - f_self);
        return psi * lf;
      });
  return estimate(acc);
}

MuInfinityReport mu_infinity_velocity(const OffspringDist& dist, std::int64_t samples,
                                      std::uint64_t seed, int parallelism, double alpha_large,
                                      double horizon) {
  MuInfinityReport r;
  r.c_harmonic = dist.constants().c_harmonic;
  r.one_over_c = 1.0 / r.c_harmonic;
  r.v_sim = walk::estimate_velocity(dist, alpha_large, horizon, samples, seed, parallelism,
                                    walk::Mode::EXACT_TIME);
  double sem3 = 3.0 * r.v_sim.stderr_mean;
  bool near_c = std::abs(r.v_sim.mean - r.c_harmonic) <= sem3;
  bool near_inv = std::abs(r.v_sim.mean - r.one_over_c) <= sem3;
  r.matches = near_inv ? "1/C" : (near_c ? "C" : "neither");
  return r;
}

GwSingularPsi gw_singular_psi(const OffspringDist& dist, double alpha, int j_max,
                              std::int64_t samples, std::uint64_t seed, int parallelism) {
  if (alpha >= 0.0) fail(Errc::DomainError, "defined for alpha < 0");
  double me_a = dist.bias_rate(alpha);  // m e^{-alpha}
  double c = 1.0 - std::exp(alpha);
  auto acc = run_replicated(samples, parallelism, seed, 0,
                            [&](std::int64_t, RngStream& rng) {
                              double sum = 0.0;
                              double prod = 1.0;  // prod_{i=1}^{j-1} d_{-i} / (m e^{-alpha})
                              for (int j = 1; j <= j_max; ++j) {
                                sum += prod;
                                prod *= static_cast<double>(dist.sample(rng)) / me_a;
                              }
                              return c * sum;
                            });
  GwSingularPsi r;
  r.mean = estimate(acc);
  r.truncation_bound = std::exp(alpha * j_max);
  return r;
}

}  // namespace gwer::env
