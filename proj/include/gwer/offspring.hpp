#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gwer/rng.hpp"

namespace gwer {

// Closed-form constants of an offspring law {p_k}.
//   m    = sum k p_k            mean offspring
//   m2   = sum k^2 p_k
//   edd1 = E[d(d-1)] = m2 - m
//   b    = (m2 - m) / (m (m-1))        (= second moment of the limit martingale W)
//   d0   = 2 m^2 (m-1) / (m2 - m)      equilibrium diffusivity
//   c_harmonic = sum p_k / k
struct ModelConstants {
  double m;
  double m2;
  double edd1;
  double b;
  double d0;
  double c_harmonic;
};

// Validated offspring distribution: finite support on {1..64}, no leaves
// (p_0 = 0), supercritical (m > 1). Immutable after construction; safe to
// share across threads. Sampling is O(1) via alias tables built once.
class OffspringDist {
 public:
  static OffspringDist from_map(const std::map<int, double>& probs);
  // "k:p,k:p,..." e.g. "2:0.5,3:0.5"; duplicate keys are an error.
  static OffspringDist parse(std::string_view text);
  static OffspringDist point_mass(int d);

  const std::vector<int>& support() const { return ks_; }
  const std::vector<double>& probs() const { return ps_; }
  int max_k() const { return ks_.back(); }
  double prob(int k) const;

  const ModelConstants& constants() const { return consts_; }
  double mean() const { return consts_.m; }

  // Law k -> k p_k / m.
  OffspringDist size_biased() const;

  // Parent jump rate lambda = m e^{-alpha}; alpha must be finite.
  double bias_rate(double alpha) const;

  int sample(RngStream& rng) const;
  int sample_size_biased(RngStream& rng) const;

  std::string to_string() const;

  static constexpr int kMaxSupport = 64;

 private:
  struct Alias {
    std::vector<double> prob;
    std::vector<std::uint32_t> alias;
    void build(const std::vector<double>& weights);
    std::size_t draw(RngStream& rng) const;
  };

  OffspringDist(std::vector<int> ks, std::vector<double> ps);

  std::vector<int> ks_;
  std::vector<double> ps_;
  ModelConstants consts_;
  Alias alias_;
  Alias alias_sb_;
};

}  // namespace gwer
