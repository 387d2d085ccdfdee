#include "gwer/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gwer/environment.hpp"
#include "gwer/error.hpp"
#include "gwer/parallel.hpp"
#include "gwer/recursion.hpp"
#include "gwer/spine.hpp"
#include "gwer/tree.hpp"
#include "gwer/walk.hpp"

namespace gwer::exp {

namespace {
constexpr const char* kVersion = "0.1.0";

int par(const Common& c) { return c.parallelism > 0 ? c.parallelism : default_parallelism(); }

std::string join_alphas(const std::vector<double>& alphas) {
  std::string s;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (i) s += ',';
    s += format_double(alphas[i]);
  }
  return s;
}

void common_meta(Table& t, const Common& c) {
  t.add_meta("version", kVersion);
  t.add_meta("dist", c.dist.to_string());
  t.add_meta("seed", static_cast<std::int64_t>(c.seed));
}
}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void Table::add_meta(const std::string& k, double v) { meta.emplace_back(k, format_double(v)); }
void Table::add_meta(const std::string& k, std::int64_t v) { meta.emplace_back(k, std::to_string(v)); }

void Table::write_csv(std::ostream& os) const {
  os << "# gwer " << command << "\n";
  for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) os << ',';
    os << columns[i];
  }
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << format_double(row[i]);
    }
    os << "\n";
  }
  for (const auto& [k, v] : summary) os << "# " << k << "=" << format_double(v) << "\n";
  os << "# pass=" << (pass ? 1 : 0) << "\n";
}

void Table::write_json(std::ostream& os) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  nlohmann::ordered_json jm = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta) jm[k] = v;
  j["meta"] = jm;
  j["columns"] = columns;
  j["rows"] = rows;
  nlohmann::ordered_json js = nlohmann::ordered_json::object();
  for (const auto& [k, v] : summary) js[k] = v;
  j["summary"] = js;
  j["pass"] = pass;
  os << j.dump(2) << "\n";
}

std::string Table::csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

std::string Table::json() const {
  std::ostringstream os;
  write_json(os);
  return os.str();
}

std::string emit(const Table& t, const std::string& out_path, bool json, std::ostream& fallback) {
  std::string text = json ? t.json() : t.csv();
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) fail(Errc::DomainError, "cannot open output file " + out_path);
    f << text;
  } else {
    fallback << text;
  }
  return text;
}

// ---------------------------------------------------------------------------

Table run_einstein(const EinsteinConfig& cfg) {
  Table t;
  t.command = "einstein";
  common_meta(t, cfg.c);
  t.add_meta("alphas", join_alphas(cfg.alphas));
  t.add_meta("replicas", cfg.replicas);
  t.add_meta("horizon", cfg.horizon);
  t.add_meta("tolerance", cfg.tolerance);
  t.columns = {"alpha", "v_sim", "stderr", "v_closed", "n"};
  const ModelConstants& mc = cfg.c.dist.constants();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < cfg.alphas.size(); ++i) {
    double a = cfg.alphas[i];
    EstimateCI v = walk::estimate_velocity(cfg.c.dist, a, cfg.horizon, cfg.replicas, cfg.c.seed,
                                           par(cfg.c), walk::Mode::MEAN_TIME,
                                           static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(cfg.replicas));
    double closed = a < 0.0 ? env::v_alpha_closed(mc, a) : std::numeric_limits<double>::quiet_NaN();
    t.rows.push_back({a, v.mean, v.stderr_mean, closed, static_cast<double>(v.n)});
    num += a * v.mean;
    den += a * a;
  }
  double slope = num / den;
  double target = mc.d0 / 2.0;
  double rel = std::abs(slope - target) / target;
  t.add_summary("slope", slope);
  t.add_summary("d0_half", target);
  t.add_summary("rel_err", rel);
  t.pass = rel <= cfg.tolerance;
  return t;
}

Table run_velocity(const VelocityConfig& cfg) {
  Table t;
  t.command = "velocity";
  common_meta(t, cfg.c);
  t.add_meta("alphas", join_alphas(cfg.alphas));
  t.add_meta("replicas", cfg.replicas);
  t.add_meta("horizon", cfg.horizon);
  t.add_meta("mode", cfg.exact_time ? "exact" : "mean");
  t.columns = {"alpha", "v_sim", "stderr", "n"};
  for (std::size_t i = 0; i < cfg.alphas.size(); ++i) {
    EstimateCI v = walk::estimate_velocity(
        cfg.c.dist, cfg.alphas[i], cfg.horizon, cfg.replicas, cfg.c.seed, par(cfg.c),
        cfg.exact_time ? walk::Mode::EXACT_TIME : walk::Mode::MEAN_TIME,
        static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(cfg.replicas), cfg.node_cap);
    t.rows.push_back({cfg.alphas[i], v.mean, v.stderr_mean, static_cast<double>(v.n)});
  }
  return t;
}

Table run_diffusivity(const DiffusivityConfig& cfg) {
  Table t;
  t.command = "diffusivity";
  common_meta(t, cfg.c);
  t.add_meta("horizon", cfg.horizon);
  t.add_meta("replicas", cfg.replicas);
  t.add_meta("depth", cfg.depth);
  t.add_meta("w_samples", cfg.w_samples);
  t.columns = {"estimator", "value", "stderr"};
  double d0 = cfg.c.dist.constants().d0;
  EstimateCI direct = walk::estimate_diffusivity(cfg.c.dist, cfg.horizon, cfg.replicas, cfg.c.seed,
                                                 par(cfg.c));
  walk::DiffusivityW wroute = walk::estimate_diffusivity_w(
      cfg.c.dist, cfg.depth, cfg.w_samples, cfg.c.seed, par(cfg.c),
      static_cast<std::uint64_t>(cfg.replicas));
  t.rows.push_back({0.0, direct.mean, direct.stderr_mean});
  t.rows.push_back({1.0, wroute.ratio.ratio_jack, wroute.ratio.stderr_jack});
  t.add_summary("d0", d0);
  t.add_summary("w2", wroute.w2.mean);
  t.add_summary("b", cfg.c.dist.constants().b);
  bool ok_direct = std::abs(direct.mean - d0) <= 3.0 * direct.stderr_mean;
  bool ok_w = std::abs(wroute.ratio.ratio_jack - d0) <= 3.0 * wroute.ratio.stderr_jack;
  t.pass = ok_direct && ok_w;
  return t;
}

Table run_recursion(const RecursionConfig& cfg) {
  Table t;
  t.command = "recursion";
  common_meta(t, cfg.c);
  t.add_meta("alphas", join_alphas(cfg.alphas));
  t.add_meta("n_pools", cfg.n_pools);
  t.add_meta("pool_size", static_cast<std::int64_t>(cfg.pool_size));
  t.add_meta("tol", cfg.tol);
  t.columns = {"alpha", "e_beta", "e_beta_stderr", "response", "response_stderr", "generations"};
  const ModelConstants& mc = cfg.c.dist.constants();
  bool pass = true;
  for (double a : cfg.alphas) {
    recursion::EscapeResponse er = recursion::escape_response(cfg.c.dist, a, cfg.n_pools,
                                                              cfg.pool_size, cfg.tol, cfg.c.seed,
                                                              par(cfg.c));
    t.rows.push_back({a, er.mean_beta.mean, er.mean_beta.stderr_mean, er.response.mean,
                      er.response.stderr_mean, static_cast<double>(er.generations)});
    // E[B] = (m/lambda) E[beta] must sit between the closed-form envelopes.
    // Point masses sit exactly on the upper bound, so allow the solver's
    // convergence residual (a small multiple of tol) as margin.
    double lambda = cfg.c.dist.bias_rate(a);
    double eb = mc.m / lambda * er.mean_beta.mean;
    double eb_sem = mc.m / lambda * er.mean_beta.stderr_mean;
    double margin = 3.0 * eb_sem + mc.m / lambda * 50.0 * cfg.tol;
    double lower = mc.m * (mc.m - 1.0) / mc.edd1 * (1.0 - std::exp(-a));
    double upper = std::exp(a) - 1.0;
    if (eb < lower - margin || eb > upper + margin) pass = false;
  }
  t.add_summary("response_target", mc.m * (mc.m - 1.0) / mc.edd1);
  t.pass = pass;
  return t;
}

Table run_phi_profile(const RecursionConfig& cfg) {
  Table t;
  t.command = "recursion-profile";
  common_meta(t, cfg.c);
  double alpha = cfg.alphas.front();
  t.add_meta("alpha", alpha);
  t.add_meta("n", cfg.profile_n);
  t.add_meta("trees", cfg.profile_trees);
  t.columns = {"r", "phi", "stderr"};
  if (cfg.profile_n < 2) fail(Errc::DomainError, "profile needs n >= 2");
  double lambda = cfg.c.dist.bias_rate(alpha);
  auto cols = run_collect(
      cfg.profile_trees, cfg.profile_n - 1, par(cfg.c), cfg.c.seed, 0xd000,
      [&](std::int64_t, RngStream& rng, std::span<double> out) {
        TreeArena tree = TreeArena::sample_gw(cfg.c.dist, cfg.profile_n, rng);
        recursion::BetaGammaTable table = recursion::solve(tree, cfg.profile_n, lambda);
        recursion::PhiProfile p = recursion::phi_profile(tree, table, cfg.profile_n - 1);
        for (int r = 1; r < cfg.profile_n; ++r)
          out[static_cast<std::size_t>(r - 1)] = p.phi[static_cast<std::size_t>(r - 1)];
      });
  for (int r = 1; r < cfg.profile_n; ++r) {
    MomentAccumulator acc;
    for (double v : cols[static_cast<std::size_t>(r - 1)]) acc.add(v);
    t.rows.push_back({static_cast<double>(r), acc.mean, acc.sem()});
  }
  return t;
}

Table run_beta_trace(const RecursionConfig& cfg) {
  Table t;
  t.command = "recursion-trace";
  common_meta(t, cfg.c);
  double alpha = cfg.alphas.front();
  t.add_meta("alpha", alpha);
  t.add_meta("pool_size", static_cast<std::int64_t>(cfg.pool_size));
  t.columns = {"n", "beta_root", "gamma_root"};
  if (cfg.trace_n < 1) fail(Errc::DomainError, "trace needs n >= 1");
  recursion::BetaPool pool(cfg.c.dist, alpha, cfg.pool_size, cfg.c.seed ^ 0x7ace, cfg.trace_n);
  pool.advance_to(cfg.trace_n);
  for (int g = 1; g <= cfg.trace_n; ++g) {
    MomentAccumulator b, gm;
    for (const auto& e : pool.at(g)) {
      b.add(e.beta);
      gm.add(e.gamma);
    }
    t.rows.push_back({static_cast<double>(g), b.mean, gm.mean});
  }
  return t;
}

Table run_env(const EnvConfig& cfg) {
  Table t;
  t.command = "env";
  common_meta(t, cfg.c);
  t.add_meta("check", cfg.check);
  const ModelConstants& mc = cfg.c.dist.constants();
  if (cfg.check == "sweep") {
    t.add_meta("alphas", join_alphas(cfg.alphas));
    t.add_meta("replicas", cfg.replicas);
    t.add_meta("horizon", cfg.horizon);
    t.columns = {"alpha", "C_alpha", "v_closed", "v_sim", "stderr"};
    bool pass = true;
    for (std::size_t i = 0; i < cfg.alphas.size(); ++i) {
      double a = cfg.alphas[i];
      if (a >= 0.0) fail(Errc::DomainError, "env sweep needs alpha < 0");
      double c = env::c_alpha(mc, a);
      double vc = env::v_alpha_closed(mc, a);
      EstimateCI v = walk::estimate_velocity(cfg.c.dist, a, cfg.horizon, cfg.replicas, cfg.c.seed,
                                             par(cfg.c), walk::Mode::MEAN_TIME,
                                             static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(cfg.replicas));
      t.rows.push_back({a, c, vc, v.mean, v.stderr_mean});
      if (std::abs(v.mean - vc) > 3.0 * v.stderr_mean) pass = false;
    }
    t.pass = pass;
  } else if (cfg.check == "stationarity") {
    t.add_meta("alphas", join_alphas(cfg.alphas));
    t.add_meta("samples", cfg.samples);
    t.columns = {"alpha", "test_fn", "residual", "stderr"};
    bool pass = true;
    for (double a : cfg.alphas) {
      int fn_id = 0;
      for (env::TestFn fn : {env::TestFn::Degree, env::TestFn::MartingaleW}) {
        EstimateCI r = env::stationarity_residual(cfg.c.dist, a, fn, cfg.samples, cfg.c.seed,
                                                  par(cfg.c));
        t.rows.push_back({a, static_cast<double>(fn_id++), r.mean, r.stderr_mean});
        if (std::abs(r.mean) > 3.0 * r.stderr_mean) pass = false;
      }
    }
    t.pass = pass;
  } else if (cfg.check == "gw-psi") {
    t.add_meta("alphas", join_alphas(cfg.alphas));
    t.add_meta("samples", cfg.samples);
    t.columns = {"alpha", "mean_psi", "stderr", "truncation"};
    bool pass = true;
    for (double a : cfg.alphas) {
      int j_max = env::default_j_max(a) * 2;
      env::GwSingularPsi g = env::gw_singular_psi(cfg.c.dist, a, j_max, cfg.samples, cfg.c.seed,
                                                  par(cfg.c));
      t.rows.push_back({a, g.mean.mean, g.mean.stderr_mean, g.truncation_bound});
      if (std::abs(g.mean.mean - 1.0) > 3.0 * g.mean.stderr_mean + g.truncation_bound) pass = false;
    }
    t.pass = pass;
  } else if (cfg.check == "mu-infinity") {
    t.add_meta("samples", cfg.replicas);
    t.columns = {"c_harmonic", "one_over_c", "v_sim", "stderr"};
    env::MuInfinityReport r = env::mu_infinity_velocity(cfg.c.dist, cfg.replicas, cfg.c.seed,
                                                        par(cfg.c));
    t.rows.push_back({r.c_harmonic, r.one_over_c, r.v_sim.mean, r.v_sim.stderr_mean});
    t.add_meta("matches", r.matches);
    t.pass = std::string(r.matches) != "neither";
  } else {
    fail(Errc::DomainError, "unknown env check " + cfg.check);
  }
  return t;
}

Table run_spine(const SpineConfig& cfg) {
  Table t;
  t.command = "spine";
  common_meta(t, cfg.c);
  t.add_meta("check", cfg.check);
  t.add_meta("alpha", cfg.alpha);
  t.add_meta("samples", cfg.samples);
  t.add_meta("pool_size", static_cast<std::int64_t>(cfg.pool_size));
  const OffspringDist& dist = cfg.c.dist;
  if (cfg.check == "zeta2") {
    EstimateCI z = spine::zeta2_batched(dist, cfg.alpha, cfg.n_pools,
                                        cfg.samples / std::max(1, cfg.n_pools), 6, cfg.pool_size,
                                        cfg.tol, cfg.c.seed, par(cfg.c));
    t.columns = {"alpha", "e_zeta2", "stderr", "n"};
    t.rows.push_back({cfg.alpha, z.mean, z.stderr_mean, static_cast<double>(z.n)});
    t.pass = std::abs(z.mean - 1.0) <= 3.0 * z.stderr_mean;
  } else if (cfg.check == "velocity") {
    recursion::BetaPool pool(dist, cfg.alpha, cfg.pool_size, cfg.c.seed ^ 0x517e);
    pool.converge(cfg.tol);
    spine::VelocityRep rep = spine::velocity_representation(dist, cfg.alpha, cfg.samples, pool,
                                                            cfg.c.seed, par(cfg.c));
    EstimateCI vsim = walk::estimate_velocity(dist, cfg.alpha, 2000.0, 10000, cfg.c.seed + 1,
                                              par(cfg.c));
    t.columns = {"alpha", "v_rep", "v_rep_stderr", "v_sim", "v_sim_stderr"};
    t.rows.push_back({cfg.alpha, rep.v, rep.sem, vsim.mean, vsim.stderr_mean});
    t.add_summary("sigma_distance", sigma_distance(rep.v, rep.sem, vsim.mean, vsim.stderr_mean));
    t.pass = sigma_distance(rep.v, rep.sem, vsim.mean, vsim.stderr_mean) <= 3.0;
  } else if (cfg.check == "h") {
    recursion::BetaPool pool(dist, cfg.alpha, cfg.pool_size, cfg.c.seed ^ 0x517e);
    pool.converge(cfg.tol);
    spine::HEstimate h = spine::h_estimate(dist, cfg.alpha, 30, cfg.samples, pool, cfg.c.seed,
                                           par(cfg.c));
    t.columns = {"y", "h", "stderr"};
    for (std::size_t y = 0; y < h.h.size(); ++y)
      t.rows.push_back({static_cast<double>(y + 1), h.h[y], h.h_sem[y]});
    t.add_summary("sum_h", h.sum_h);
    t.add_summary("sum_h_stderr", h.sum_h_sem);
    t.add_summary("acceptance", h.acceptance);
    double mm1 = dist.mean() / (dist.mean() - 1.0);
    t.add_summary("m_over_m_minus_1", mm1);
    t.pass = true;
  } else if (cfg.check == "phi") {
    recursion::BetaPool pool(dist, cfg.alpha, cfg.pool_size, cfg.c.seed ^ 0x517e, cfg.n);
    pool.converge(cfg.tol);
    pool.advance_to(cfg.n);
    recursion::PhiTreeEstimate tree_side =
        recursion::phi_tree_estimate(dist, cfg.alpha, cfg.n, cfg.r, cfg.samples, pool, cfg.c.seed,
                                     par(cfg.c));
    EstimateCI spine_side = spine::phi_spine_estimate(dist, cfg.alpha, cfg.n, cfg.r, cfg.samples,
                                                      cfg.inner, pool, cfg.c.seed, par(cfg.c));
    t.columns = {"side", "mean_phi", "stderr"};
    t.rows.push_back({0.0, tree_side.mean_phi.mean, tree_side.mean_phi.stderr_mean});
    t.rows.push_back({1.0, spine_side.mean, spine_side.stderr_mean});
    double sd = sigma_distance(tree_side.mean_phi.mean, tree_side.mean_phi.stderr_mean,
                               spine_side.mean, spine_side.stderr_mean);
    t.add_summary("sigma_distance", sd);
    t.add_summary("max_bound_ratio", tree_side.max_bound_ratio);
    t.pass = sd <= 3.0 && tree_side.max_bound_ratio <= 1.0 + 1e-12;
  } else if (cfg.check == "sandwich") {
    recursion::BetaPool pool(dist, cfg.alpha, cfg.pool_size, cfg.c.seed ^ 0x517e, cfg.n);
    pool.converge(cfg.tol);
    pool.advance_to(cfg.n);
    spine::SandwichBounds sb = spine::remark_sandwich(dist, cfg.alpha, cfg.n, cfg.r, cfg.samples,
                                                      cfg.inner, pool, cfg.c.seed, par(cfg.c));
    t.columns = {"bound", "value", "stderr"};
    t.rows.push_back({-1.0, sb.lower.mean, sb.lower.stderr_mean});
    t.rows.push_back({0.0, sb.middle.mean, sb.middle.stderr_mean});
    t.rows.push_back({1.0, sb.upper.mean, sb.upper.stderr_mean});
    bool ok_low = sb.middle.mean >= sb.lower.mean - 3.0 * std::hypot(sb.lower.stderr_mean, sb.middle.stderr_mean);
    bool ok_up = sb.middle.mean <= sb.upper.mean + 3.0 * std::hypot(sb.upper.stderr_mean, sb.middle.stderr_mean);
    t.pass = ok_low && ok_up;
  } else {
    fail(Errc::DomainError, "unknown spine check " + cfg.check);
  }
  return t;
}

Table run_zjbis(const ZjbisConfig& cfg) {
  Table t;
  t.command = "zjbis";
  t.add_meta("version", kVersion);
  t.add_meta("seed", static_cast<std::int64_t>(cfg.seed));
  t.add_meta("n_max", cfg.n_max);
  t.add_meta("trials", cfg.trials);
  t.add_meta("tol", cfg.tol);
  t.columns = {"trial", "n", "r", "lhs", "rhs", "abs_diff"};
  RngStream rng(cfg.seed, 0x2b15);
  double max_diff = 0.0;
  for (int i = 0; i < cfg.trials; ++i) {
    spine::RuinInstance inst;
    inst.n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_max - 1)));
    inst.a.resize(static_cast<std::size_t>(inst.n));
    inst.b.resize(static_cast<std::size_t>(inst.n));
    for (int j = 0; j < inst.n; ++j) {
      inst.a[static_cast<std::size_t>(j)] = 2.0 * rng.uniform();
      inst.b[static_cast<std::size_t>(j)] = 2.0 * rng.uniform_pos();
    }
    inst.r = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(inst.n - 1)));
    double lhs = spine::ruin_product_recursion(inst);
    double rhs = spine::ruin_product_oracle(inst);
    double d = std::abs(lhs - rhs);
    max_diff = std::max(max_diff, d);
    t.rows.push_back({static_cast<double>(i), static_cast<double>(inst.n),
                      static_cast<double>(inst.r), lhs, rhs, d});
  }
  t.add_summary("max_abs_diff", max_diff);
  t.pass = max_diff < cfg.tol;
  return t;
}

Table run_report(const ReportConfig& cfg) {
  Table t;
  t.command = "report";
  common_meta(t, cfg.c);
  t.columns = {"check", "value", "target", "pass"};
  const ModelConstants& mc = cfg.c.dist.constants();
  bool all = true;

  ZjbisConfig zc;
  zc.seed = cfg.c.seed;
  Table z = run_zjbis(zc);
  t.rows.push_back({0.0, z.summary[0].second, 0.0, z.pass ? 1.0 : 0.0});
  all = all && z.pass;

  EinsteinConfig ec;
  ec.c = cfg.c;
  ec.replicas = 2000;
  ec.horizon = 500.0;
  ec.tolerance = 0.15;
  Table e = run_einstein(ec);
  t.rows.push_back({1.0, e.summary[0].second, mc.d0 / 2.0, e.pass ? 1.0 : 0.0});
  all = all && e.pass;

  DiffusivityConfig dc;
  dc.c = cfg.c;
  dc.replicas = 5000;
  dc.horizon = 200.0;
  dc.w_samples = 20000;
  Table d = run_diffusivity(dc);
  t.rows.push_back({2.0, d.rows[0][1], mc.d0, d.pass ? 1.0 : 0.0});
  all = all && d.pass;

  SpineConfig sc;
  sc.c = cfg.c;
  sc.samples = 4000;
  sc.alpha = 0.2;
  Table s = run_spine(sc);
  t.rows.push_back({3.0, s.rows[0][1], 1.0, s.pass ? 1.0 : 0.0});
  all = all && s.pass;

  t.pass = all;
  return t;
}

}  // namespace gwer::exp
