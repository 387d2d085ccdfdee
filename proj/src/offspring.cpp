#include "gwer/offspring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <sstream>

#include "gwer/error.hpp"

namespace gwer {

namespace {

constexpr double kNormTol = 1e-12;

ModelConstants compute_constants(const std::vector<int>& ks, const std::vector<double>& ps) {
  ModelConstants c{};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double k = static_cast<double>(ks[i]);
    c.m += k * ps[i];
    c.m2 += k * k * ps[i];
    c.c_harmonic += ps[i] / k;
  }
  c.edd1 = c.m2 - c.m;
  c.b = c.edd1 / (c.m * (c.m - 1.0));
  c.d0 = 2.0 * c.m * c.m * (c.m - 1.0) / c.edd1;
  return c;
}

}  // namespace

void OffspringDist::Alias::build(const std::vector<double>& weights) {
  std::size_t n = weights.size();
  prob.assign(n, 0.0);
  alias.assign(n, 0);
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] / total * static_cast<double>(n);
  std::deque<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i)
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  while (!small.empty() && !large.empty()) {
    std::uint32_t s = small.front();
    small.pop_front();
    std::uint32_t l = large.front();
    large.pop_front();
    prob[s] = scaled[s];
    alias[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  while (!large.empty()) {
    prob[large.front()] = 1.0;
    large.pop_front();
  }
  while (!small.empty()) {
    prob[small.front()] = 1.0;
    small.pop_front();
  }
}

std::size_t OffspringDist::Alias::draw(RngStream& rng) const {
  std::size_t n = prob.size();
  if (n == 1) return 0;
  double u = rng.uniform() * static_cast<double>(n);
  std::size_t i = static_cast<std::size_t>(u);
  if (i >= n) i = n - 1;
  double f = u - static_cast<double>(i);
  return f < prob[i] ? i : alias[i];
}

OffspringDist::OffspringDist(std::vector<int> ks, std::vector<double> ps)
    : ks_(std::move(ks)), ps_(std::move(ps)), consts_(compute_constants(ks_, ps_)) {
  alias_.build(ps_);
  std::vector<double> sb(ps_.size());
  for (std::size_t i = 0; i < ps_.size(); ++i) sb[i] = static_cast<double>(ks_[i]) * ps_[i];
  alias_sb_.build(sb);
}

OffspringDist OffspringDist::from_map(const std::map<int, double>& probs) {
  std::vector<int> ks;
  std::vector<double> ps;
  double total = 0.0;
  for (auto& [k, p] : probs) {
    if (p < 0.0) fail(Errc::NegativeProbability, "p_" + std::to_string(k) + " < 0");
    if (p == 0.0) continue;
    if (k == 0) fail(Errc::ZeroOffspringMass, "p_0 must be 0 (no leaves)");
    if (k < 0 || k > kMaxSupport)
      fail(Errc::InvalidSupport, "offspring count " + std::to_string(k) + " outside [1, 64]");
    ks.push_back(k);
    ps.push_back(p);
    total += p;
  }
  if (ks.empty()) fail(Errc::NotNormalized, "empty distribution");
  if (std::abs(total - 1.0) > kNormTol)
    fail(Errc::NotNormalized, "probabilities sum to " + std::to_string(total));
  double m = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) m += static_cast<double>(ks[i]) * ps[i];
  if (m <= 1.0) fail(Errc::SubcriticalMean, "mean offspring m = " + std::to_string(m) + " <= 1");
  return OffspringDist(std::move(ks), std::move(ps));
}

OffspringDist OffspringDist::parse(std::string_view text) {
  std::map<int, double> probs;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string_view item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    std::size_t colon = item.find(':');
    if (colon == std::string_view::npos) fail(Errc::ParseError, "expected k:p in '" + std::string(item) + "'");
    int k = 0;
    auto [kp, kec] = std::from_chars(item.data(), item.data() + colon, k);
    if (kec != std::errc() || kp != item.data() + colon)
      fail(Errc::ParseError, "bad offspring count in '" + std::string(item) + "'");
    double p = 0.0;
    const char* pb = item.data() + colon + 1;
    const char* pe = item.data() + item.size();
    auto [pp, pec] = std::from_chars(pb, pe, p);
    if (pec != std::errc() || pp != pe || pb == pe)
      fail(Errc::ParseError, "bad probability in '" + std::string(item) + "'");
    if (probs.count(k)) fail(Errc::ParseError, "duplicate offspring count " + std::to_string(k));
    probs[k] = p;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (probs.empty()) fail(Errc::ParseError, "empty distribution string");
  return from_map(probs);
}

OffspringDist OffspringDist::point_mass(int d) { return from_map({{d, 1.0}}); }

double OffspringDist::prob(int k) const {
  for (std::size_t i = 0; i < ks_.size(); ++i)
    if (ks_[i] == k) return ps_[i];
  return 0.0;
}

OffspringDist OffspringDist::size_biased() const {
  std::map<int, double> sb;
  for (std::size_t i = 0; i < ks_.size(); ++i)
    sb[ks_[i]] = static_cast<double>(ks_[i]) * ps_[i] / consts_.m;
  return from_map(sb);
}

double OffspringDist::bias_rate(double alpha) const {
  if (!std::isfinite(alpha)) fail(Errc::DomainError, "alpha must be finite");
  return consts_.m * std::exp(-alpha);
}

int OffspringDist::sample(RngStream& rng) const { return ks_[alias_.draw(rng)]; }

int OffspringDist::sample_size_biased(RngStream& rng) const { return ks_[alias_sb_.draw(rng)]; }

std::string OffspringDist::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < ks_.size(); ++i) {
    if (i) os << ',';
    os << ks_[i] << ':' << ps_[i];
  }
  return os.str();
}

}  // namespace gwer
