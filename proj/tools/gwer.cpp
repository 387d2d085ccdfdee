// gwer: batch experiment runner for biased random walks on Galton-Watson
// trees. Every experiment is a subcommand producing a deterministic CSV or
// JSON table; exit codes: 0 ok, 1 usage, 2 check failed, 3 overflow/cap.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gwer/error.hpp"
#include "gwer/experiments.hpp"
#include "gwer/offspring.hpp"
#include "gwer/rng.hpp"
#include "gwer/tree.hpp"
#include "gwer/walk.hpp"

namespace {

using gwer::Errc;
using gwer::Error;

struct CommonArgs {
  std::string dist_text;
  std::uint64_t seed = 42;
  int parallelism = 0;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--dist", a.dist_text, "offspring law as k:p,k:p,...")->required();
  cmd->add_option("--seed", a.seed, "rng seed")->envname("GWER_SEED");
  cmd->add_option("--parallelism,-j", a.parallelism, "worker threads (0 = hardware)");
  cmd->add_option("--out,-o", a.out, "output file (default stdout)");
  cmd->add_option("--format", a.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

gwer::exp::Common make_common(const CommonArgs& a) {
  gwer::exp::Common c{gwer::OffspringDist::parse(a.dist_text), a.seed, a.parallelism, a.out,
                      a.format == "json"};
  return c;
}

int emit_and_exit(const gwer::exp::Table& t, const gwer::exp::Common& c) {
  gwer::exp::emit(t, c.out_path, c.json, std::cout);
  if (!c.out_path.empty())
    std::cerr << "gwer " << t.command << ": " << (t.pass ? "ok" : "CHECK FAILED") << ", wrote "
              << c.out_path << "\n";
  return t.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation laboratory for biased random walks on Galton-Watson trees"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command-line flags override");

  CommonArgs ca;

  auto* einstein = app.add_subcommand("einstein", "two-sided velocity sweep and slope vs d0/2");
  add_common(einstein, ca);
  std::vector<double> alphas;
  einstein->add_option("--alphas", alphas, "bias values (comma separated)")->delimiter(',');
  std::int64_t replicas = 10000;
  double horizon = 2000.0, tolerance = 0.10;
  einstein->add_option("--replicas", replicas);
  einstein->add_option("--horizon", horizon);
  einstein->add_option("--tolerance", tolerance);

  auto* velocity = app.add_subcommand("velocity", "velocity estimates at given alphas");
  add_common(velocity, ca);
  velocity->add_option("--alphas", alphas)->delimiter(',');
  velocity->add_option("--replicas", replicas);
  velocity->add_option("--horizon", horizon);
  bool exact_time = false;
  velocity->add_flag("--exact-time", exact_time, "exponential holding times");
  std::string trace_out;
  velocity->add_option("--trace-out", trace_out, "write one replica's jump trace to this CSV");
  std::uint64_t node_cap = 50'000'000;
  velocity->add_option("--node-cap", node_cap, "arena node cap (fail fast on runaway growth)");

  auto* diffusivity = app.add_subcommand("diffusivity", "rho^2/t and martingale-moment routes");
  add_common(diffusivity, ca);
  double dhorizon = 400.0;
  std::int64_t dreplicas = 20000, w_samples = 100000;
  int depth = 24;
  diffusivity->add_option("--horizon", dhorizon);
  diffusivity->add_option("--replicas", dreplicas);
  diffusivity->add_option("--depth", depth);
  diffusivity->add_option("--w-samples", w_samples);

  auto* recursion = app.add_subcommand("recursion", "escape-probability linear response");
  add_common(recursion, ca);
  recursion->add_option("--alphas", alphas)->delimiter(',');
  int n_pools = 8, profile_n = 0, trace_n = 0;
  std::size_t pool_size = 1 << 15;
  double tol = 1e-5;
  std::int64_t profile_trees = 200;
  std::string profile_out, rtrace_out;
  recursion->add_option("--pools", n_pools);
  recursion->add_option("--pool-size", pool_size);
  recursion->add_option("--tol", tol);
  recursion->add_option("--profile-n", profile_n, "write mean Phi_n(r) profile for this n");
  recursion->add_option("--profile-trees", profile_trees);
  recursion->add_option("--profile-out", profile_out, "profile CSV path (default <out>.profile)");
  recursion->add_option("--trace-n", trace_n, "write (n, beta_n, gamma_n) trace up to this depth");
  recursion->add_option("--trace-out", rtrace_out, "trace CSV path (default <out>.trace)");

  auto* envcmd = app.add_subcommand("env", "alpha<0 environment checks");
  add_common(envcmd, ca);
  std::string env_check = "sweep";
  envcmd->add_option("--check", env_check)
      ->check(CLI::IsMember({"sweep", "stationarity", "gw-psi", "mu-infinity"}));
  envcmd->add_option("--alphas", alphas)->delimiter(',');
  std::int64_t ereplicas = 4000, esamples = 50000;
  double ehorizon = 1000.0;
  envcmd->add_option("--replicas", ereplicas);
  envcmd->add_option("--horizon", ehorizon);
  envcmd->add_option("--samples", esamples);

  auto* spinecmd = app.add_subcommand("spine", "spine-walk checks");
  add_common(spinecmd, ca);
  std::string check = "zeta2";
  spinecmd->add_option("--check", check)
      ->check(CLI::IsMember({"zeta2", "velocity", "h", "phi", "sandwich"}));
  double salpha = 0.2;
  std::int64_t ssamples = 20000;
  int sn = 20, sr = 10, sinner = 128, spools = 6;
  std::size_t spool_size = 1 << 15;
  double stol = 1e-5;
  spinecmd->add_option("--alpha", salpha);
  spinecmd->add_option("--samples", ssamples);
  spinecmd->add_option("--n", sn);
  spinecmd->add_option("--r", sr);
  spinecmd->add_option("--inner", sinner);
  spinecmd->add_option("--pools", spools);
  spinecmd->add_option("--pool-size", spool_size);
  spinecmd->add_option("--tol", stol);

  auto* zjbis = app.add_subcommand("zjbis", "spine hitting identity vs linear-system oracle");
  std::uint64_t zseed = 42;
  int zn = 8, ztrials = 100;
  double ztol = 1e-10;
  std::string zout, zformat = "csv";
  zjbis->add_option("--seed", zseed)->envname("GWER_SEED");
  zjbis->add_option("--n", zn);
  zjbis->add_option("--trials", ztrials);
  zjbis->add_option("--tol", ztol);
  zjbis->add_option("--out,-o", zout);
  zjbis->add_option("--format", zformat)->check(CLI::IsMember({"csv", "json"}));

  auto* report = app.add_subcommand("report", "compact battery of cross-checks");
  add_common(report, ca);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }

  try {
    if (einstein->parsed()) {
      gwer::exp::EinsteinConfig cfg;
      cfg.c = make_common(ca);
      if (!alphas.empty()) cfg.alphas = alphas;
      cfg.replicas = replicas;
      cfg.horizon = horizon;
      cfg.tolerance = tolerance;
      return emit_and_exit(gwer::exp::run_einstein(cfg), cfg.c);
    }
    if (velocity->parsed()) {
      gwer::exp::VelocityConfig cfg;
      cfg.c = make_common(ca);
      if (!alphas.empty()) cfg.alphas = alphas;
      cfg.replicas = replicas;
      cfg.horizon = horizon;
      cfg.exact_time = exact_time;
      cfg.node_cap = node_cap;
      if (!trace_out.empty()) {
        gwer::RngStream rng(cfg.c.seed, 0xdeb06);
        gwer::TreeArena tree(cfg.c.dist, gwer::Measure::IGW);
        gwer::walk::RunConfig rc;
        rc.alpha = cfg.alphas.front();
        rc.mode = cfg.exact_time ? gwer::walk::Mode::EXACT_TIME : gwer::walk::Mode::MEAN_TIME;
        rc.stop = gwer::walk::StopRule::time(cfg.horizon);
        rc.record_trace = true;
        gwer::walk::WalkSummary s = gwer::walk::run(tree, tree.root(), rc, rng);
        std::ofstream f(trace_out, std::ios::binary);
        gwer::walk::write_trace_csv(s, f);
        std::cerr << "gwer velocity: wrote trace " << trace_out << "\n";
      }
      return emit_and_exit(gwer::exp::run_velocity(cfg), cfg.c);
    }
    if (diffusivity->parsed()) {
      gwer::exp::DiffusivityConfig cfg;
      cfg.c = make_common(ca);
      cfg.horizon = dhorizon;
      cfg.replicas = dreplicas;
      cfg.depth = depth;
      cfg.w_samples = w_samples;
      return emit_and_exit(gwer::exp::run_diffusivity(cfg), cfg.c);
    }
    if (recursion->parsed()) {
      gwer::exp::RecursionConfig cfg;
      cfg.c = make_common(ca);
      if (!alphas.empty()) cfg.alphas = alphas;
      cfg.n_pools = n_pools;
      cfg.pool_size = pool_size;
      cfg.tol = tol;
      cfg.profile_n = profile_n;
      cfg.profile_trees = profile_trees;
      cfg.trace_n = trace_n;
      if (profile_n >= 2) {
        std::string path = profile_out.empty() ? (ca.out.empty() ? "phi_profile.csv" : ca.out + ".profile") : profile_out;
        gwer::exp::Table p = gwer::exp::run_phi_profile(cfg);
        std::ofstream f(path, std::ios::binary);
        p.write_csv(f);
        std::cerr << "gwer recursion: wrote profile " << path << "\n";
      }
      if (trace_n >= 1) {
        std::string path = rtrace_out.empty() ? (ca.out.empty() ? "beta_trace.csv" : ca.out + ".trace") : rtrace_out;
        gwer::exp::Table p = gwer::exp::run_beta_trace(cfg);
        std::ofstream f(path, std::ios::binary);
        p.write_csv(f);
        std::cerr << "gwer recursion: wrote trace " << path << "\n";
      }
      return emit_and_exit(gwer::exp::run_recursion(cfg), cfg.c);
    }
    if (envcmd->parsed()) {
      gwer::exp::EnvConfig cfg;
      cfg.c = make_common(ca);
      cfg.check = env_check;
      if (!alphas.empty()) cfg.alphas = alphas;
      cfg.replicas = ereplicas;
      cfg.horizon = ehorizon;
      cfg.samples = esamples;
      return emit_and_exit(gwer::exp::run_env(cfg), cfg.c);
    }
    if (spinecmd->parsed()) {
      gwer::exp::SpineConfig cfg;
      cfg.c = make_common(ca);
      cfg.check = check;
      cfg.alpha = salpha;
      cfg.samples = ssamples;
      cfg.n = sn;
      cfg.r = sr;
      cfg.inner = sinner;
      cfg.n_pools = spools;
      cfg.pool_size = spool_size;
      cfg.tol = stol;
      return emit_and_exit(gwer::exp::run_spine(cfg), cfg.c);
    }
    if (zjbis->parsed()) {
      gwer::exp::ZjbisConfig cfg;
      cfg.seed = zseed;
      cfg.n_max = zn;
      cfg.trials = ztrials;
      cfg.tol = ztol;
      cfg.out_path = zout;
      cfg.json = zformat == "json";
      gwer::exp::Table t = gwer::exp::run_zjbis(cfg);
      gwer::exp::emit(t, cfg.out_path, cfg.json, std::cout);
      if (!cfg.out_path.empty())
        std::cerr << "gwer zjbis: max |lhs-rhs| = " << gwer::exp::format_double(t.summary[0].second)
                  << "\n";
      return t.pass ? 0 : 2;
    }
    if (report->parsed()) {
      gwer::exp::ReportConfig cfg;
      cfg.c = make_common(ca);
      return emit_and_exit(gwer::exp::run_report(cfg), cfg.c);
    }
  } catch (const Error& e) {
    std::cerr << "gwer: " << e.what() << "\n";
    if (e.code() == Errc::ArenaOverflow || e.code() == Errc::NoConvergence) return 3;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gwer: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
