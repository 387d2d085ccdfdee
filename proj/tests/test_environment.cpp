#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gwer/environment.hpp"
#include "gwer/error.hpp"
#include "gwer/offspring.hpp"
#include "gwer/rng.hpp"
#include "gwer/stats.hpp"
#include "gwer/tree.hpp"
#include "gwer/walk.hpp"

using namespace gwer;

TEST_CASE("normalization constant") {
  ModelConstants c2 = OffspringDist::point_mass(2).constants();
  CHECK(env::c_alpha(c2, -0.5) == doctest::Approx(1.0 / (1.0 - std::exp(-0.5))).epsilon(1e-12));
  CHECK(env::c_alpha(c2, -0.5) == doctest::Approx(2.541494).epsilon(1e-6));

  ModelConstants c = OffspringDist::parse("2:0.5,3:0.5").constants();
  CHECK(env::c_alpha(c, -0.5) == doctest::Approx(2.6229052).epsilon(1e-6));
  // equivalent three-term arrangement of the same function
  double a = -0.37, ea = std::exp(a);
  double three = 1.0 + c.b * ea / (1.0 - ea) + (1.0 - c.b) * (ea / c.m) / (1.0 - ea / c.m);
  CHECK(env::c_alpha(c, a) == doctest::Approx(three).epsilon(1e-12));
  CHECK(env::c_alpha(c, -30.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS((void)env::c_alpha(c, 0.0), Error);
}

TEST_CASE("closed-form velocity and its slope at 0") {
  ModelConstants c2 = OffspringDist::point_mass(2).constants();
  CHECK(env::v_alpha_closed(c2, -0.5) == doctest::Approx(2.0 * (1.0 - std::exp(0.5))).epsilon(1e-12));
  ModelConstants c = OffspringDist::parse("2:0.5,3:0.5").constants();
  CHECK(env::v_alpha_closed(c, -0.5) == doctest::Approx(-1.5714648).epsilon(1e-6));
  // the slope approaches -m^2(m-1)/(m2-m) linearly in alpha
  double s01 = env::v_alpha_closed(c, -0.01) / 0.01;
  double s005 = env::v_alpha_closed(c, -0.005) / 0.005;
  CHECK(std::abs(s01 - (-2.34375)) / 2.34375 < 0.007);
  CHECK(std::abs(s005 - (-2.34375)) / 2.34375 < 0.0035);
  CHECK(std::abs(s005 + 2.34375) < std::abs(s01 + 2.34375));
}

TEST_CASE("Z_alpha on regular trees is the truncated geometric sum") {
  OffspringDist pm = OffspringDist::point_mass(3);
  RngStream rng(91, 0);
  double alpha = -0.4;
  int j_max = 20;
  env::PsiAlphaEstimate e = env::z_alpha_sample(pm, alpha, j_max, 12, rng);
  double ea = std::exp(alpha);
  double target = (1.0 - std::pow(ea, j_max + 1)) / (1.0 - ea);
  CHECK(e.z_alpha == doctest::Approx(target).epsilon(1e-12));
  CHECK_THROWS_AS((void)env::z_alpha_sample(pm, 0.1, 5, 12, rng), Error);
}

TEST_CASE("mean of Z_alpha meets the normalization constant") {
  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  double alpha = -0.5;
  int j_max = 16;
  EstimateCI z = env::z_alpha_mean(d, alpha, j_max, 20, 40000, 92, 2);
  double c = env::c_alpha(d.constants(), alpha);
  double trunc = d.constants().b * std::exp(alpha * (j_max + 1)) / (1.0 - std::exp(alpha));
  CHECK(std::abs(z.mean - c) < 3.0 * z.stderr_mean + trunc);
}

TEST_CASE("|alpha| Z_alpha concentrates near b as alpha -> 0-") {
  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  double alpha = -0.02;
  int j_max = env::default_j_max(alpha);  // 400
  RngStream rng(90, 0);
  std::vector<double> vals;
  for (int i = 0; i < 400; ++i)
    vals.push_back(std::abs(alpha) * env::z_alpha_sample(d, alpha, j_max, 16, rng).z_alpha);
  std::sort(vals.begin(), vals.end());
  double median = vals[vals.size() / 2];
  double b = d.constants().b;
  CHECK(std::abs(median - b) / b < 0.20);
}

TEST_CASE("psi concentrates at 1 as alpha goes to 0-") {
  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  // E|psi - 1| shrinks toward 0 (psi -> 1 pointwise); means stay at 1
  double dev_prev = 1e9;
  for (double alpha : {-0.2, -0.1, -0.05}) {
    RngStream rng(93, 7);
    MomentAccumulator abs_dev, mean_psi;
    int j_max = env::default_j_max(alpha);
    for (int i = 0; i < 4000; ++i) {
      env::PsiAlphaEstimate e = env::z_alpha_sample(d, alpha, j_max, 20, rng);
      abs_dev.add(std::abs(e.psi - 1.0));
      mean_psi.add(e.psi);
    }
    CHECK(std::abs(mean_psi.mean - 1.0) < 3.0 * mean_psi.sem() + 1e-3);
    CHECK(abs_dev.mean < dev_prev - 3.0 * abs_dev.sem());
    dev_prev = abs_dev.mean;
  }
}

TEST_CASE("stationarity residuals vanish") {
  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  SUBCASE("regular tree, degree function: exactly zero") {
    OffspringDist pm = OffspringDist::point_mass(2);
    EstimateCI r = env::stationarity_residual(pm, -0.3, env::TestFn::Degree, 500, 94, 2);
    CHECK(r.mean == 0.0);
  }
  SUBCASE("degree function") {
    EstimateCI r = env::stationarity_residual(d, -0.3, env::TestFn::Degree, 30000, 95, 2);
    CHECK(std::abs(r.mean) < 3.0 * r.stderr_mean);
  }
  SUBCASE("martingale function on the half-half law") {
    EstimateCI r = env::stationarity_residual(d, -0.3, env::TestFn::MartingaleW, 30000, 96, 2);
    CHECK(std::abs(r.mean) < 3.0 * r.stderr_mean);
  }
  SUBCASE("truncated density function") {
    EstimateCI r = env::stationarity_residual(d, -0.3, env::TestFn::TruncatedDensity, 30000, 97, 2);
    CHECK(std::abs(r.mean) < 3.0 * r.stderr_mean + 2e-3);
  }
}

TEST_CASE("lambda -> 0 invariant measure report") {
  OffspringDist pm = OffspringDist::point_mass(3);
  env::MuInfinityReport r3 = env::mu_infinity_velocity(pm, 2000, 98, 2);
  CHECK(r3.c_harmonic == doctest::Approx(1.0 / 3.0));
  CHECK(std::string(r3.matches) == "1/C");

  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  env::MuInfinityReport r = env::mu_infinity_velocity(d, 4000, 99, 2);
  CHECK(r.c_harmonic == doctest::Approx(5.0 / 12.0));
  CHECK(std::string(r.matches) != "neither");

  // normalization of the density 1/(C d): mean of 1/(C d) under GW is 1
  RngStream rng(100, 0);
  MomentAccumulator acc;
  for (int i = 0; i < 40000; ++i)
    acc.add(1.0 / (r.c_harmonic * static_cast<double>(d.sample(rng))));
  CHECK(std::abs(acc.mean - 1.0) < 3.0 * acc.sem());
}

TEST_CASE("GW-singular density has mean one") {
  OffspringDist pm = OffspringDist::point_mass(2);
  env::GwSingularPsi g2 = env::gw_singular_psi(pm, -0.5, 60, 200, 101, 2);
  CHECK(g2.mean.mean == doctest::Approx(1.0 - std::exp(-0.5 * 60)).epsilon(1e-12));

  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  env::GwSingularPsi g = env::gw_singular_psi(d, -0.5, 80, 40000, 102, 2);
  CHECK(std::abs(g.mean.mean - 1.0) < 3.0 * g.mean.stderr_mean + g.truncation_bound);
  CHECK(g.truncation_bound == doctest::Approx(std::exp(-40.0)));
  CHECK_THROWS_AS((void)env::gw_singular_psi(d, 0.2, 10, 10, 103, 1), Error);
}

TEST_CASE("simulated velocity matches the closed form at alpha < 0") {
  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  double alpha = -0.3;
  EstimateCI v = walk::estimate_velocity(d, alpha, 500.0, 4000, 104, 2);
  double target = env::v_alpha_closed(d.constants(), alpha);
  CHECK(std::abs(v.mean - target) < 3.0 * v.stderr_mean);
}

TEST_CASE("environment views shift and re-base") {
  OffspringDist d = OffspringDist::parse("2:0.5,3:0.5");
  RngStream rng(105, 0);
  TreeArena t = TreeArena::sample_igw(d, 2, 3, rng);
  env::EnvView root_view{&t, t.root()};
  NodeId x = t.child(t.root(), 0);
  env::EnvView child_view = env::shift(root_view, x);
  CHECK(child_view.current == x);
  CHECK(env::view_rho(child_view, x) == 0);
  CHECK(env::view_rho(child_view, t.root()) == -1);
  env::EnvView back = env::shift(child_view, t.root());
  CHECK(back.current == root_view.current);
  env::EnvView up = env::shift(root_view, t.parent(t.root()));
  CHECK(env::view_rho(up, t.root()) == 1);
  NodeId grandchild = t.child(x, 0);
  CHECK_THROWS_AS((void)env::shift(root_view, grandchild), Error);
  // the martingale value seen from a shifted view is the vertex's own W
  CHECK(t.w_estimate(child_view.current, 2) == t.w_estimate(x, 2));
}
