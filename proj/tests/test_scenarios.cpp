#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "pilotwave/scenarios.hpp"

using namespace pilotwave;

namespace {

ScenarioConfig small_free() {
  ScenarioConfig c;
  c.name = "small-free";
  c.grid = {512, -32.0, 31.875, 0, 0.0, 0.0};
  c.initial.components = {{0.0, 3.0, 0.0, 1.0}};
  c.evolution.t_final = 9.0;
  c.evolution.steps = 180;
  c.sampling = {2000, 3, 0};
  c.trajectory.highlight_x = 1.0;
  return c;
}

// A reduced staircase measurement: sigma_x = 4 over bins of 4, pointer read out at g t = 2.
ScenarioConfig small_staircase() {
  ScenarioConfig c;
  c.name = "small-staircase";
  c.grid = {128, -31.75, 31.75, 256, -25.5, 25.5};
  c.initial.components = {{0.0, 4.0, 0.0, 1.0}};
  c.initial.sigma_y = 0.5;
  c.interaction.kind = InteractionKind::Staircase;
  c.interaction.g = 1.0;
  c.interaction.delta = 4.0;
  c.interaction.t_on = 0.0;
  c.interaction.t_off = 2.0;
  c.evolution.t_final = 2.0;
  c.evolution.steps = 40;
  c.sampling = {3000, 5, 0};
  c.trajectory.highlight_x = 5.0;
  c.trajectory.highlight_y = 0.0;
  return c;
}

ErrorCode code_of(const ScenarioConfig& c) {
  try {
    run_scenario(c);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::string message_of(const ScenarioConfig& c) {
  try {
    validate(c);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("builtin registry") {
  const auto all = builtin_scenarios();
  REQUIRE(all.size() == 7);
  std::set<std::string> names;
  for (const auto& c : all) {
    names.insert(c.name);
    CHECK_NOTHROW(validate(c));
  }
  for (const char* n : {"position-measurement", "fake-measurement", "superposition-nonmeasurability",
                        "near-delta-sensitivity", "free-gaussian-equivariance", "classical-impulse",
                        "classical-simultaneous"}) {
    CHECK(names.count(n) == 1);
  }
  const auto pm = builtin_scenario("position-measurement");
  CHECK(pm.grid.nx == 512);
  CHECK(pm.grid.ny == 512);
  // g t_off is the 6.7 nm pointer readout per unit of A.
  CHECK(pm.interaction.g * pm.interaction.t_off == doctest::Approx(6.6667).epsilon(1e-6));
  try {
    builtin_scenario("nope");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}

TEST_CASE("validation names the offending field") {
  auto c = small_staircase();
  c.initial.components[0].sigma = -1.0;
  CHECK(message_of(c).find("initial.c1_sigma_x") != std::string::npos);

  c = small_staircase();
  c.initial.components.push_back({3.0, 1.0, 0.0, 0.5});
  CHECK(message_of(c).find("initial.weights") != std::string::npos);

  c = small_free();
  c.interaction.kind = InteractionKind::Staircase;
  CHECK(message_of(c).find("interaction.kind") != std::string::npos);

  c = small_staircase();
  c.interaction.t_off = -1.0;
  CHECK(message_of(c).find("interaction.t_on") != std::string::npos);

  c = small_staircase();
  c.trajectory.highlight_x = 99.0;
  CHECK(message_of(c).find("trajectory.highlight_x") != std::string::npos);

  c = small_staircase();
  c.grid.ny = 4;
  CHECK(message_of(c).find("grid.ny") != std::string::npos);

  c = builtin_scenario("classical-impulse");
  c.classical.coupling = "tan(x)";
  CHECK(message_of(c).find("interaction.coupling") != std::string::npos);
  CHECK(code_of(c) == ErrorCode::ConfigError);
}

TEST_CASE("classical scenarios") {
  SUBCASE("impulse") {
    const auto r = run_scenario(builtin_scenario("classical-impulse"));
    CHECK(r.scalars.at("x_disturbance") == 0.0);
    CHECK(r.scalars.at("p_x_disturbance") == 0.0);
    CHECK(r.scalars.at("y_final") == doctest::Approx(2.0).epsilon(1e-12));
    // With A = x, dp_x/dt = -g p_y: the kick is eps t.
    for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
      char key[64];
      std::snprintf(key, sizeof key, "disturbance_p_x_eps_%g", eps);
      CHECK(r.scalars.at(key) == doctest::Approx(eps).epsilon(1e-9));
    }
    CHECK_FALSE(r.classical_path.empty());
  }
  SUBCASE("simultaneous") {
    const auto r = run_scenario(builtin_scenario("classical-simultaneous"));
    CHECK(r.scalars.at("inferred_x0") == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.scalars.at("inferred_p_x0") == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.scalars.at("max_relative_inference_error") < 1e-8);
    CHECK(r.scalars.at("random_cases") == 100.0);
    // Pointer momenta eps bias both readings by eps t / 2 with g = h = t = 1.
    CHECK(r.scalars.at("inference_error_x_eps_0.1") == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(r.scalars.at("inference_error_p_x_eps_0.05") == doctest::Approx(0.025).epsilon(1e-9));
  }
}

TEST_CASE("one-dimensional run") {
  const auto c = small_free();
  const auto r = run_scenario(c);
  REQUIRE(r.snapshots.size() == 1 + c.trajectory.checkpoints);
  REQUIRE(r.ensemble.size() == 1 + c.trajectory.checkpoints);
  CHECK(r.snapshots.front().t() == 0.0);
  CHECK(r.snapshots.back().t() == doctest::Approx(9.0));
  for (std::size_t k = 1; k < r.ensemble.size(); ++k) {
    CHECK(r.ensemble[k].t == doctest::Approx(r.snapshots[k].t()).epsilon(1e-12));
    CHECK(r.ensemble[k].configurations.size() == 2000);
  }
  REQUIRE(r.highlight);
  CHECK(r.highlight->samples.size() == 180 / c.trajectory.stride + 1);
  // Free spreading maps x0 to x0 s(t) / s(0).
  CHECK(r.highlight->back().x == doctest::Approx(oracle::spread(9.0, 3.0) / 3.0).epsilon(1e-3));
  CHECK(r.scalars.at("final_norm_error") < 1e-8);
  CHECK(r.channels.empty());
  CHECK(r.reports.size() == 2 * r.ensemble.size());
  for (const auto& rep : r.reports) CHECK(rep.pass);

  // Same seed, same numbers.
  const auto again = run_scenario(c);
  CHECK(again.highlight->back().x == r.highlight->back().x);
  CHECK(again.ensemble.back().configurations.back().x == r.ensemble.back().configurations.back().x);
  CHECK(again.reports.back().statistic == r.reports.back().statistic);
}

TEST_CASE("reduced staircase measurement") {
  const auto r = run_scenario(small_staircase());
  REQUIRE(r.channels.size() >= 3);
  double total = 0.0;
  for (const auto& ch : r.channels) total += ch.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(2e-2));
  // Start at x = 5 lies in the bin [4, 8) with A = 3: the pointer ends near 6.
  CHECK(r.scalars.at("highlight_final_x") == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(r.scalars.at("highlight_final_y") == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(r.scalars.at("highlight_slice_fidelity") < 0.5);
  CHECK(r.scalars.at("highlight_effective_exists") == 1.0);
  CHECK(r.scalars.at("unassigned_fraction") == 0.0);
  CHECK(r.scalars.at("x_marginal_l1") < 1e-10);
  for (const auto& rep : r.reports) {
    if (rep.test.rfind("equivariance", 0) == 0) CHECK(rep.pass);
  }
  const auto has = [&](const std::string& t) {
    return std::any_of(r.reports.begin(), r.reports.end(), [&](const StatReport& s) { return s.test == t; });
  };
  CHECK(has("conditional-probability"));
  CHECK(has("equivariance-chi2"));
}

TEST_CASE("splitter run keeps the object untouched") {
  auto c = small_staircase();
  c.name = "small-splitter";
  c.interaction = {};
  c.interaction.kind = InteractionKind::Splitter;
  c.interaction.displacements = {-8.0, 8.0};
  c.interaction.weights = {0.5, 0.5};
  c.evolution.t_final = 0.05;
  c.evolution.steps = 20;
  // The exact pointer median falls in the empty gap between the copies.
  c.trajectory.highlight_y = 0.2;
  const auto r = run_scenario(c);
  REQUIRE(r.channels.size() == 2);
  CHECK(r.scalars.at("x_marginal_l1") < 1e-3);
  CHECK(r.scalars.at("min_channel_slice_fidelity") > 0.99);
  std::size_t against_initial = 0;
  for (const auto& rep : r.reports) {
    if (rep.test == "conditional-vs-initial") {
      ++against_initial;
      CHECK(rep.pass);
    }
  }
  CHECK(against_initial == 2);
}

TEST_CASE("superposition linearity and numerical errors carry the scenario name") {
  auto c = small_staircase();
  c.initial.components = {{2.0, 0.7, 0.0, 0.5}, {6.0, 0.7, 0.0, 0.5}};
  c.sampling.n = 2000;
  const auto r = run_scenario(c);
  CHECK(r.scalars.at("linearity_residual") < 1e-9);
  REQUIRE(r.channels.size() == 2);
  CHECK(r.scalars.at("channel_0_frequency") + r.scalars.at("channel_1_frequency") == doctest::Approx(1.0));

  auto edge = small_free();
  edge.name = "edge";
  edge.initial.components = {{20.0, 3.0, 3.0, 1.0}};
  try {
    run_scenario(edge);
    FAIL("expected a boundary abort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BoundaryMassExceeded);
    CHECK(std::string(e.what()).find("scenario 'edge'") != std::string::npos);
    CHECK(is_numerical(e.code()));
  }
}
