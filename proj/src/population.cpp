#include "gwer/population.hpp"

#include <algorithm>
#include <cmath>

#include "gwer/error.hpp"

namespace gwer::pop {

namespace {

constexpr double kExactMeanMax = 400.0;

// Inversion on the small-probability side; q = min(p, 1-p), n*q <= 400.
double binomial_inversion(double n, double q, RngStream& rng) {
  double u = rng.uniform();
  double pmf = std::exp(n * std::log1p(-q));  // (1-q)^n
  double cdf = pmf;
  double k = 0.0;
  double ratio = q / (1.0 - q);
  double kmax = n * q + 60.0 * std::sqrt(n * q + 1.0) + 200.0;
  if (kmax > n) kmax = n;
  while (u > cdf && k < kmax) {
    pmf *= (n - k) / (k + 1.0) * ratio;
    k += 1.0;
    cdf += pmf;
  }
  return k;
}

}  // namespace

double binomial(double n, double p, RngStream& rng) {
  if (n <= 0.0 || p <= 0.0) return 0.0;
  if (p >= 1.0) return n;
  bool flip = p > 0.5;
  double q = flip ? 1.0 - p : p;
  double k;
  if (n * q <= kExactMeanMax) {
    k = binomial_inversion(n, q, rng);
  } else {
    double mu = n * q;
    double sigma = std::sqrt(mu * (1.0 - q));
    k = std::floor(mu + sigma * rng.normal() + 0.5);
    if (k < 0.0) k = 0.0;
    if (k > n) k = n;
  }
  return flip ? n - k : k;
}

double offspring_step(const OffspringDist& dist, double z, RngStream& rng) {
  if (z <= 0.0) return 0.0;
  const auto& ks = dist.support();
  const auto& ps = dist.probs();
  if (ks.size() == 1) return z * static_cast<double>(ks[0]);
  if (z > kFreeze) return z * dist.mean();
  double remaining = z;
  double mass = 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    if (remaining <= 0.0) break;
    double cond = ps[i] / mass;
    double c = cond >= 1.0 ? remaining : binomial(remaining, cond, rng);
    total += c * static_cast<double>(ks[i]);
    remaining -= c;
    mass -= ps[i];
  }
  total += remaining * static_cast<double>(ks.back());
  return total;
}

void level_counts(const OffspringDist& dist, double start, int levels, std::span<double> out,
                  RngStream& rng) {
  out[0] = start;
  double z = start;
  for (int l = 1; l <= levels; ++l) {
    z = offspring_step(dist, z, rng);
    out[static_cast<std::size_t>(l)] = z;
  }
}

double w_sample(const OffspringDist& dist, int depth, RngStream& rng) {
  double z = 1.0;
  for (int l = 0; l < depth; ++l) z = offspring_step(dist, z, rng);
  return z / std::pow(dist.mean(), depth);
}

double IgwSample::z_alpha(double alpha) const {
  double s = 0.0;
  for (std::size_t j = 0; j < w_anc.size(); ++j)
    s += std::exp(alpha * static_cast<double>(j)) * w_anc[j];
  return s;
}

// Descendant counts of the j-th ancestor satisfy
//   Z_l(v_{-j}) = B_j(l) + Z_{l-1}(v_{-(j-1)}),   Z_0 = 1,
// where B_j is the lumped population of v_{-j}'s off-ray children. A single
// rolling vector of counts by depth carries the chain from the root upward.
IgwSample igw_sample(const OffspringDist& dist, int depth, int j_max, RngStream& rng) {
  if (depth < 1) fail(Errc::DomainError, "igw_sample depth must be >= 1");
  IgwSample s;
  double m = dist.mean();
  double m_pow_n = std::pow(m, depth);

  // Root subtree, one chain per child (keeps each child's W and degree).
  s.root_degree = dist.sample(rng);
  s.child_deg.resize(static_cast<std::size_t>(s.root_degree));
  s.child_w.resize(static_cast<std::size_t>(s.root_degree));
  std::vector<double> zvec(static_cast<std::size_t>(depth) + 1, 0.0);
  zvec[0] = 1.0;
  int chain_len = std::max(depth - 1, 1);
  std::vector<double> chain(static_cast<std::size_t>(chain_len) + 1);
  for (int c = 0; c < s.root_degree; ++c) {
    level_counts(dist, 1.0, chain_len, chain, rng);
    s.child_deg[static_cast<std::size_t>(c)] = static_cast<int>(chain[1]);
    s.child_w[static_cast<std::size_t>(c)] = chain[static_cast<std::size_t>(depth - 1)] / std::pow(m, depth - 1);
    for (int l = 1; l <= depth; ++l) zvec[static_cast<std::size_t>(l)] += chain[static_cast<std::size_t>(l - 1)];
  }

  s.w_anc.resize(static_cast<std::size_t>(j_max) + 1);
  s.anc_deg.resize(static_cast<std::size_t>(j_max) + 1, 0);
  s.w_anc[0] = zvec[static_cast<std::size_t>(depth)] / m_pow_n;
  s.w_root = s.w_anc[0];

  for (int j = 1; j <= j_max; ++j) {
    for (int l = depth; l >= 1; --l) zvec[static_cast<std::size_t>(l)] = zvec[static_cast<std::size_t>(l - 1)];
    zvec[0] = 1.0;
    int dstar = dist.sample_size_biased(rng);
    s.anc_deg[static_cast<std::size_t>(j)] = dstar;
    double b = static_cast<double>(dstar - 1);
    zvec[1] += b;
    for (int l = 2; l <= depth; ++l) {
      b = offspring_step(dist, b, rng);
      zvec[static_cast<std::size_t>(l)] += b;
    }
    s.w_anc[static_cast<std::size_t>(j)] = zvec[static_cast<std::size_t>(depth)] / m_pow_n;
  }
  return s;
}

SpineProgeny spine_progeny_sample(const OffspringDist& dist, int n, RngStream& rng) {
  if (n < 1) fail(Errc::DomainError, "spine_progeny_sample needs n >= 1");
  double m = dist.mean();
  double count_root = 1.0;  // the spine vertex at level n
  double count_spine1 = 1.0;
  for (int j = 0; j < n; ++j) {
    int dstar = dist.sample_size_biased(rng);
    double z = static_cast<double>(dstar - 1);
    for (int l = 0; l < n - j - 1; ++l) z = offspring_step(dist, z, rng);
    count_root += z;
    if (j >= 1) count_spine1 += z;
  }
  return {count_root / std::pow(m, n), count_spine1 / std::pow(m, n - 1)};
}

}  // namespace gwer::pop
