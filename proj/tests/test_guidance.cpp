#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pilotwave/conditional.hpp"
#include "pilotwave/guidance.hpp"

using namespace pilotwave;

namespace {

WaveField analytic_packet(const Grid1D& g, double t, double sigma, double x0 = 0.0) {
  std::vector<cplx> v(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) v[i] = oracle::free_gaussian(g.coord(i), t, sigma, x0);
  return WaveField(g, v, t);
}

double final_x(VelocitySource& src, double x0, double dt, std::size_t steps) {
  const Configuration c{x0, std::nullopt, 0.0};
  return integrate_ensemble(src, std::span(&c, 1), dt, steps).front().x;
}

}  // namespace

TEST_CASE("velocity of simple fields") {
  SUBCASE("real Gaussian has zero velocity") {
    const Grid1D g(256, -20.0, 20.0);
    const auto v = velocity_from_field(gaussian_1d(g, 1.0, 3.0));
    for (std::size_t i = 0; i < g.n(); ++i) CHECK(v.vx(i) == 0.0);
  }
  SUBCASE("plane wave moves at k") {
    const Grid1D g(512, -12.8, 12.75);
    std::vector<cplx> w(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) w[i] = std::polar(1.0, 0.5 * g.coord(i));
    const auto v = velocity_from_field(WaveField(g, w));
    for (std::size_t i = 0; i < g.n(); ++i) CHECK(std::abs(v.vx(i) - 0.5) < 1e-3 * 0.5);
    CHECK(v.masked_count() == 0);
  }
  SUBCASE("spreading Gaussian matches the analytic velocity") {
    const double sigma = 3.0;
    const Grid1D g(1601, -40.0, 40.0);
    for (double t : {0.0, 4.5, 9.0, 27.0}) {
      const auto v = velocity_from_field(analytic_packet(g, t, sigma));
      for (std::size_t i = 0; i < g.n(); i += 5) {
        const double x = g.coord(i);
        if (std::abs(x) > 2.0 * oracle::spread(t, sigma)) continue;
        CHECK(std::abs(v.vx(i) - oracle::free_velocity(x, t, sigma)) < 1e-3);
      }
    }
  }
  SUBCASE("mass divides the velocity") {
    const Grid1D g(256, -12.8, 12.7);
    std::vector<cplx> w(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) w[i] = std::polar(1.0, 0.3 * g.coord(i));
    Hamiltonian h;
    h.mass_x = 4.0;
    const auto a = velocity_from_field(WaveField(g, w));
    const auto b = velocity_from_field(WaveField(g, w), h);
    CHECK(b.vx(100) == doctest::Approx(a.vx(100) / 4.0));
  }
  SUBCASE("zero field") {
    const Grid1D g(16, 0.0, 1.0);
    try {
      velocity_from_field(WaveField(g, std::vector<cplx>(16)));
      FAIL("expected AllNodes");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AllNodes);
    }
  }
}

TEST_CASE("plane-wave trajectory is uniform motion") {
  const Grid1D g(512, -12.8, 12.75);
  const double k = 0.5;
  std::vector<cplx> w(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) w[i] = std::polar(1.0, k * g.coord(i));
  const WaveField f(g, w);
  FieldFunctionSource src([&](double t) {
    WaveField o = f;
    for (auto& z : o.values()) z *= std::polar(1.0, -0.5 * k * k * t);
    return o;
  });
  const Trajectory tr = integrate_trajectory(src, {-5.0, std::nullopt, 0.0}, 0.1, 200);
  REQUIRE(tr.samples.size() == 201);
  CHECK(tr.is_uniform());
  CHECK(std::abs(tr.back().x - (-5.0 + k * 20.0)) < 1e-3 * k * 20.0);

  SUBCASE("running off the grid") {
    FieldFunctionSource again([&](double) { return f; });
    try {
      integrate_trajectory(again, {10.0, std::nullopt, 0.0}, 0.1, 200);
      FAIL("expected LeftGrid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LeftGrid);
    }
  }
}

TEST_CASE("free Gaussian trajectories scale with the packet width") {
  const double sigma = 3.0;
  const Grid1D g(1601, -40.0, 40.0);
  FieldFunctionSource src([&](double t) { return analytic_packet(g, t, sigma); });
  const double t_end = std::sqrt(3.0) * sigma * sigma;
  const std::size_t steps = 200;
  std::vector<Configuration> starts;
  for (double x0 : {-4.0, -1.5, 0.5, 2.0, 3.5}) starts.push_back({x0, std::nullopt, 0.0});
  const auto end = integrate_ensemble(src, starts, t_end / steps, steps);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const double expect = starts[i].x * oracle::spread(t_end, sigma) / sigma;
    CHECK(std::abs(end[i].x - expect) < 1e-3 * std::abs(expect));
    CHECK(end[i].t == doctest::Approx(t_end));
  }
}

TEST_CASE("RK4 error drops at least eightfold when dt halves") {
  // On the free Gaussian the velocity is linear in x, so spatial interpolation adds
  // nothing and the reference differs from the coarse runs only through dt.
  const double sigma = 3.0;
  const Grid1D g(1601, -40.0, 40.0);
  const double t_end = std::sqrt(3.0) * sigma * sigma;
  const auto run = [&](std::size_t steps) {
    FieldFunctionSource src([&](double t) { return analytic_packet(g, t, sigma); });
    return final_x(src, 2.5, t_end / static_cast<double>(steps), steps);
  };
  const double ref = run(1024);
  const double e1 = std::abs(run(4) - ref);
  const double e2 = std::abs(run(8) - ref);
  const double e3 = std::abs(run(16) - ref);
  MESSAGE("errors " << e1 << " " << e2 << " " << e3);
  CHECK(e1 / e2 >= 8.0);
  CHECK(e2 / e3 >= 8.0);
  CHECK(std::abs(ref - 2.5 * oracle::spread(t_end, sigma) / sigma) < 1e-3 * 5.0);
}

TEST_CASE("trajectories do not cross") {
  const Grid1D g(1024, -64.0, 63.875);
  std::vector<cplx> v(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) {
    const double x = g.coord(i);
    v[i] = std::exp(-(x + 6.0) * (x + 6.0) / 8.0) * std::polar(1.0, 1.0 * x) +
           std::exp(-(x - 6.0) * (x - 6.0) / 8.0) * std::polar(1.0, -1.0 * x);
  }
  const WaveField f0 = normalize(WaveField(g, v));
  OnTheFlyEvolver src(f0, {}, Method::SplitOperator, 0.01);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> d(0.0, 1.4);
  std::vector<Configuration> starts;
  for (int i = 0; i < 100; ++i) {
    const double c = i % 2 == 0 ? -6.0 : 6.0;
    starts.push_back({c + d(rng), std::nullopt, 0.0});
  }
  auto batch = integrate_trajectories(src, starts, 0.02, 300);
  const auto report = single_trajectory_no_crossing_check(batch);
  CHECK(report.ok());
  CHECK(report.min_distance > 0.0);
  CHECK(src.max_norm_drift() < 1e-10);

  SUBCASE("swapping a pair halfway is detected") {
    // Exchange the later halves of the two trajectories that start farthest apart.
    const auto [lo, hi] = std::minmax_element(starts.begin(), starts.end(),
                                              [](const auto& a, const auto& b) { return a.x < b.x; });
    const auto i = static_cast<std::size_t>(lo - starts.begin());
    const auto j = static_cast<std::size_t>(hi - starts.begin());
    for (std::size_t s = 150; s < batch[i].samples.size(); ++s) {
      std::swap(batch[i].samples[s], batch[j].samples[s]);
    }
    const auto bad = single_trajectory_no_crossing_check(batch);
    CHECK_FALSE(bad.ok());
    CHECK(std::find(bad.swapped_pairs.begin(), bad.swapped_pairs.end(), std::pair{std::min(i, j), std::max(i, j)}) !=
          bad.swapped_pairs.end());
  }
}

TEST_CASE("narrow packets amplify initial offsets") {
  const double t_end = 20.0;
  const auto factor = [&](const Grid1D& g, double sigma) {
    FieldFunctionSource src([&](double t) { return analytic_packet(g, t, sigma); });
    const std::vector<Configuration> starts{{0.2, std::nullopt, 0.0}, {0.3, std::nullopt, 0.0}};
    const auto end = integrate_ensemble(src, starts, 0.05, 400);
    return (end[1].x - end[0].x) / 0.1;
  };
  // Scenario grid: dx = 0.125, four points per sigma at the narrowest packet.
  const Grid1D coarse(4096, -255.9375, 255.9375);
  std::vector<double> growth;
  for (double sigma : {2.0, 1.0, 0.5}) growth.push_back(factor(coarse, sigma));
  CHECK(growth[0] > 1.0);
  CHECK(growth[0] < growth[1]);
  CHECK(growth[1] < growth[2]);
  CHECK(growth[2] >= 10.0);
  CHECK(growth[0] == doctest::Approx(oracle::spread(t_end, 2.0) / 2.0).epsilon(5e-3));
  CHECK(growth[2] == doctest::Approx(oracle::spread(t_end, 0.5) / 0.5).epsilon(0.06));
  // Resolving the narrow packet recovers the analytic factor s(t) / sigma.
  const Grid1D fine(8192, -64.0, 63.984375);
  CHECK(factor(fine, 0.5) == doctest::Approx(oracle::spread(t_end, 0.5) / 0.5).epsilon(5e-3));
}

TEST_CASE("x velocity on a pointer row equals the conditional slice velocity") {
  const Grid1D gx(128, -16.0, 15.75);
  const Grid1D gy(64, -8.0, 7.75);
  std::vector<cplx> v(gx.n() * gy.n());
  for (std::size_t i = 0; i < gx.n(); ++i) {
    for (std::size_t j = 0; j < gy.n(); ++j) {
      const double x = gx.coord(i), y = gy.coord(j);
      v[i * gy.n() + j] = std::exp(-x * x / 20.0 - y * y / 4.0) * std::polar(1.0, 0.4 * x * y + 0.2 * x) +
                          0.5 * std::exp(-(x - 3.0) * (x - 3.0) / 6.0 - (y + 1.0) * (y + 1.0) / 2.0);
    }
  }
  const WaveField joint = normalize(WaveField(Grid2D{gx, gy}, v));
  const auto vj = velocity_from_field(joint);
  for (std::size_t j : {10u, 31u, 40u}) {
    const auto vs = velocity_from_field(conditional_slice(joint, gy.coord(j)));
    double m = 0.0;
    for (std::size_t i = 0; i < gx.n(); ++i) {
      if (vj.masked(i, j)) continue;
      m = std::max(m, std::abs(vj.vx(i, j) - vs.vx(i)));
    }
    CHECK(m < 1e-10);
  }
}

TEST_CASE("impulsive coupling moves the pointer only") {
  const Grid1D gx(128, -63.5, 63.5);
  const Grid1D gy(256, -25.5, 25.5);
  const WaveField f0 = product_gaussian(Grid2D{gx, gy}, 0.0, 10.0, 0.0, 0.5);
  Hamiltonian h;
  h.coupling = staircase_coupling(gx, 0.86, 15.0);
  h.coupling->t_off = 2.0;

  const auto v = velocity_from_field(f0, h);
  CHECK_FALSE(v.has_kinetic());
  CHECK(v.has_drift());
  for (double x : {-20.0, -3.0, 7.0, 16.2}) {
    const auto s = v.sample(x, 0.3);
    REQUIRE(s);
    CHECK((*s)[0] == 0.0);
    CHECK((*s)[1] == doctest::Approx(0.86 * Staircase{15.0}(x)));
  }

  OnTheFlyEvolver src(f0, h, Method::SplitOperator, 0.05);
  const std::vector<Configuration> starts{{7.0, 0.1, 0.0}, {20.0, -0.2, 0.0}, {-14.0, 0.0, 0.0}};
  const auto end = integrate_ensemble(src, starts, 0.1, 20);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    CHECK(end[i].x == doctest::Approx(starts[i].x).epsilon(1e-12));
    CHECK(*end[i].y == doctest::Approx(*starts[i].y + 0.86 * Staircase{15.0}(starts[i].x) * 2.0).epsilon(1e-9));
  }
  // After the window the kinetic terms return.
  const auto after = velocity_from_field(src.field_at(2.5), h);
  CHECK(after.has_kinetic());
  CHECK_FALSE(after.has_drift());
}

TEST_CASE("snapshot history") {
  const double sigma = 2.0;
  const Grid1D g(512, -32.0, 31.875);
  std::vector<WaveField> snaps;
  for (int k = 0; k <= 10; ++k) snaps.push_back(analytic_packet(g, 0.5 * k, sigma));
  SnapshotHistory hist(snaps, {});

  SUBCASE("exact at snapshot times, linear between") {
    const auto& a = hist.velocity_at(1.0);
    CHECK(a.vx(300) == doctest::Approx(velocity_from_field(snaps[2]).vx(300)));
    const double va = velocity_from_field(snaps[2]).vx(300);
    const double vb = velocity_from_field(snaps[3]).vx(300);
    CHECK(hist.velocity_at(1.2).vx(300) == doctest::Approx(0.6 * va + 0.4 * vb));
  }
  SUBCASE("trajectory from snapshots approaches the exact one") {
    const double x = final_x(hist, 1.5, 0.05, 100);
    CHECK(x == doctest::Approx(1.5 * oracle::spread(5.0, sigma) / sigma).epsilon(2e-2));
  }
  SUBCASE("times outside the history") {
    try {
      hist.velocity_at(5.5);
      FAIL("expected MismatchedTimes");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MismatchedTimes);
    }
  }
}

TEST_CASE("node handling") {
  const Grid1D g(257, -16.0, 16.0);
  std::vector<cplx> v(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) v[i] = g.coord(i) * std::exp(-g.coord(i) * g.coord(i) / 8.0);
  const WaveField f = normalize(WaveField(g, v));
  const auto vel = velocity_from_field(f);
  CHECK(vel.masked(128));
  CHECK_FALSE(vel.sample(0.01));
  CHECK(vel.sample(1.0));

  FieldFunctionSource src([&](double) { return f; });
  try {
    integrate_trajectory(src, {0.0, std::nullopt, 0.0}, 0.1, 5);
    FAIL("expected HitNode");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HitNode);
  }
  // A static real field has no velocity; trajectories off the node stay put.
  CHECK(final_x(src, 3.0, 0.1, 5) == 3.0);
}

TEST_CASE("ensemble input validation") {
  const Grid1D g(64, -8.0, 7.75);
  FieldFunctionSource src([&](double t) { return analytic_packet(g, t, 1.0); });
  const std::vector<Configuration> mixed{{0.0, std::nullopt, 0.0}, {0.1, std::nullopt, 0.5}};
  CHECK_THROWS_AS(integrate_ensemble(src, mixed, 0.1, 3), Error);
  const Configuration c{0.0, std::nullopt, 0.0};
  CHECK_THROWS_AS(integrate_ensemble(src, std::span(&c, 1), 0.0, 3), Error);
  CHECK(integrate_ensemble(src, {}, 0.1, 3).empty());

  std::vector<Trajectory> uneven(2);
  uneven[0].samples.resize(3);
  uneven[1].samples.resize(4);
  CHECK_THROWS_AS(single_trajectory_no_crossing_check(uneven), Error);
}
