#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gwer/offspring.hpp"
#include "gwer/stats.hpp"

namespace gwer::exp {

// Column table with echoed configuration; the writers are deterministic
// (fixed float formatting, no timestamps) so reruns are bit-identical.
struct Table {
  std::string command;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, double>> summary;
  bool pass = true;

  void add_meta(const std::string& k, const std::string& v) { meta.emplace_back(k, v); }
  void add_meta(const std::string& k, double v);
  void add_meta(const std::string& k, std::int64_t v);
  void add_meta(const std::string& k, int v) { add_meta(k, static_cast<std::int64_t>(v)); }
  void add_meta(const std::string& k, std::size_t v) { add_meta(k, static_cast<std::int64_t>(v)); }
  void add_summary(const std::string& k, double v) { summary.emplace_back(k, v); }

  void write_csv(std::ostream& os) const;
  void write_json(std::ostream& os) const;
  std::string csv() const;
  std::string json() const;
};

std::string format_double(double v);

struct Common {
  OffspringDist dist = OffspringDist::point_mass(2);
  std::uint64_t seed = 42;
  int parallelism = 0;  // 0 = hardware
  std::string out_path;
  bool json = false;
};

// einstein: two-sided velocity sweep and the fitted slope at 0 vs d0/2.
struct EinsteinConfig {
  Common c;
  std::vector<double> alphas{-0.2, -0.1, -0.05, 0.05, 0.1, 0.2};
  std::int64_t replicas = 10000;
  double horizon = 2000.0;
  double tolerance = 0.10;
};
Table run_einstein(const EinsteinConfig& cfg);

struct VelocityConfig {
  Common c;
  std::vector<double> alphas{0.2};
  std::int64_t replicas = 10000;
  double horizon = 2000.0;
  bool exact_time = false;
  std::uint64_t node_cap = 50'000'000;
};
Table run_velocity(const VelocityConfig& cfg);

// diffusivity two ways: direct rho^2/t and the martingale-moment route.
struct DiffusivityConfig {
  Common c;
  double horizon = 400.0;
  std::int64_t replicas = 20000;
  int depth = 24;
  std::int64_t w_samples = 100000;
};
Table run_diffusivity(const DiffusivityConfig& cfg);

// recursion: escape-probability response table over alphas, plus optional
// companion files: a (r, Phi_n(r)) profile over sampled trees and an
// (n, beta_n, gamma_n) convergence trace from the distributional solver.
struct RecursionConfig {
  Common c;
  std::vector<double> alphas{0.05, 0.1, 0.2};
  int n_pools = 8;
  std::size_t pool_size = 1 << 15;
  double tol = 1e-5;
  int profile_n = 0;  // when >= 2, write mean Phi_n(r), r = 1..n-1
  std::int64_t profile_trees = 200;
  std::string profile_out;
  int trace_n = 0;  // when >= 1, write E beta_g, E gamma_g for g = 1..trace_n
  std::string trace_out;
};
Table run_recursion(const RecursionConfig& cfg);
Table run_phi_profile(const RecursionConfig& cfg);
Table run_beta_trace(const RecursionConfig& cfg);

// env: alpha < 0 sweep "alpha,C_alpha,v_closed,v_sim,stderr", or one of the
// named stationarity checks.
struct EnvConfig {
  Common c;
  std::string check = "sweep";  // sweep | stationarity | gw-psi | mu-infinity
  std::vector<double> alphas{-0.5, -0.3, -0.1};
  std::int64_t replicas = 4000;
  double horizon = 1000.0;
  std::int64_t samples = 50000;
};
Table run_env(const EnvConfig& cfg);

// spine checks.
struct SpineConfig {
  Common c;
  std::string check = "zeta2";  // zeta2 | velocity | h | phi | sandwich
  double alpha = 0.2;
  std::int64_t samples = 20000;
  int n = 20;
  int r = 10;
  int inner = 128;
  std::size_t pool_size = 1 << 15;
  double tol = 1e-5;
  int n_pools = 6;  // zeta2 batches
};
Table run_spine(const SpineConfig& cfg);

struct ZjbisConfig {
  std::uint64_t seed = 42;
  int n_max = 8;
  int trials = 100;
  double tol = 1e-10;
  std::string out_path;
  bool json = false;
};
Table run_zjbis(const ZjbisConfig& cfg);

struct ReportConfig {
  Common c;
};
Table run_report(const ReportConfig& cfg);

// Writes to cfg.out_path if nonempty (else to `fallback`); returns the text.
std::string emit(const Table& t, const std::string& out_path, bool json, std::ostream& fallback);

}  // namespace gwer::exp
