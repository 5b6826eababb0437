#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "pilotwave/io.hpp"

using namespace pilotwave;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pilotwave_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::string message_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

WaveField random_field_2d() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Grid2D g{Grid1D(24, -3.0, 4.5), Grid1D(10, -1.0, 1.25)};
  std::vector<cplx> v(24 * 10);
  for (auto& z : v) z = cplx(nd(rng), nd(rng) * 1e-300);
  v[5] = cplx(-0.0, 1.0 / 3.0);
  return WaveField(g, std::move(v), 0.123456789);
}

}  // namespace

TEST_CASE("quantities") {
  const UnitSystem u;
  CHECK(parse_quantity("15 nm", Dimension::Length, u) == doctest::Approx(15.0).epsilon(1e-14));
  CHECK(parse_quantity("15nm", Dimension::Length, u) == doctest::Approx(15.0).epsilon(1e-14));
  CHECK(parse_quantity("1.5e-8 m", Dimension::Length, u) == doctest::Approx(15.0).epsilon(1e-14));
  CHECK(parse_quantity("1e5 m/s", Dimension::Velocity, u) == doctest::Approx(1e5 / u.velocity_unit()));
  CHECK(parse_quantity("66.667 fs", Dimension::Time, u) == doctest::Approx(66.667e-15 / u.time_unit()));
  CHECK(code_of([&] { parse_quantity("15", Dimension::Length, u); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { parse_quantity("15 s", Dimension::Length, u); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { parse_quantity("15 furlong", Dimension::Length, u); }) == ErrorCode::ConfigError);
  CHECK(code_of([&] { parse_quantity("abc nm", Dimension::Length, u); }) == ErrorCode::ConfigError);
}

TEST_CASE("config parsing") {
  const std::string text = R"(# a reduced measurement
name = small
kind = quantum

[grid]
nx = 128
x_min = -31.75 nm
x_max = 31.75 nm
ny = 256
y_min = -25.5 nm
y_max = 25.5 nm

[initial]
x0 = 0 nm
sigma_x = 4 nm
y0 = 0 nm
sigma_y = 0.5 nm

[interaction]
kind = staircase
g = 1e5 m/s
delta = 4 nm
t_on = 0 s
t_off = 20 fs

[sampling]
n = 300
seed = 12

[trajectory]
t_final = 20 fs
steps = 40
highlight_x = 5 nm
highlight_y = 0 nm
)";
  const auto c = parse_config(text);
  CHECK(c.name == "small");
  CHECK(c.grid.nx == 128);
  CHECK(c.grid.ny == 256);
  CHECK(c.initial.components.size() == 1);
  CHECK(c.initial.components[0].sigma == doctest::Approx(4.0));
  CHECK(c.interaction.kind == InteractionKind::Staircase);
  CHECK(c.interaction.delta == doctest::Approx(4.0));
  CHECK(c.sampling.seed == 12);
  CHECK(c.evolution.steps == 40);
  REQUIRE(c.trajectory.highlight_x);
  CHECK(*c.trajectory.highlight_x == doctest::Approx(5.0));

  SUBCASE("round trip through the writer") {
    const auto again = parse_config(format_config(c));
    CHECK(format_config(again) == format_config(c));
    CHECK(again.interaction.g == c.interaction.g);
    CHECK(again.interaction.t_off == c.interaction.t_off);
    CHECK(again.grid.x_min == c.grid.x_min);
  }
  SUBCASE("every builtin round-trips") {
    for (const auto& b : builtin_scenarios()) {
      const auto again = parse_config(format_config(b), b.name);
      CHECK(format_config(again) == format_config(b));
    }
  }
  SUBCASE("unknown key") {
    const auto msg = message_of([&] { parse_config(text + "ball_colour = red\n"); });
    CHECK(msg.find("trajectory.ball_colour") != std::string::npos);
  }
  SUBCASE("unknown section") {
    CHECK(code_of([&] { parse_config(text + "[plot]\nx = 1\n"); }) == ErrorCode::ConfigError);
  }
  SUBCASE("wrong unit names the field") {
    std::string bad = text;
    bad.replace(bad.find("delta = 4 nm"), 12, "delta = 4 fs");
    const auto msg = message_of([&] { parse_config(bad); });
    CHECK(msg.find("interaction.delta") != std::string::npos);
  }
  SUBCASE("validation failures are config errors") {
    std::string bad = text;
    bad.replace(bad.find("sigma_x = 4 nm"), 14, "sigma_x = -4 nm");
    CHECK(code_of([&] { parse_config(bad); }) == ErrorCode::ConfigError);
  }
  SUBCASE("base scenario with overrides") {
    const auto d = parse_config("base = position-measurement\nname = pm-small\n[sampling]\nn = 50\n");
    CHECK(d.name == "pm-small");
    CHECK(d.sampling.n == 50);
    CHECK(d.grid.ny == 512);
  }
  SUBCASE("superposition components") {
    const auto d = parse_config(
        "base = superposition-nonmeasurability\n[initial]\ncomponents = 2\nc1_x0 = 5 nm\nc2_weight = 0.5\n");
    REQUIRE(d.initial.components.size() == 2);
    CHECK(d.initial.components[0].x0 == doctest::Approx(5.0));
    CHECK(d.initial.components[1].x0 == doctest::Approx(22.5));
  }
  SUBCASE("inline comments") {
    std::string commented = text;
    commented.replace(commented.find("kind = staircase"), 16, "kind = staircase   # none | staircase | splitter");
    CHECK(parse_config(commented).interaction.kind == InteractionKind::Staircase);
  }
  SUBCASE("missing file") {
    CHECK(code_of([] { load_config("/nonexistent/missing.conf"); }) == ErrorCode::ConfigError);
  }
}

TEST_CASE("field dump round trip") {
  const auto dir = scratch("field");
  const auto f = random_field_2d();
  const auto paths = write_field_dump(f, dir / "snap");
  REQUIRE(paths.size() == 2);
  const auto back = read_field_dump(paths[0]);
  REQUIRE(back.dims() == 2);
  CHECK(back.nx() == f.nx());
  CHECK(back.ny() == f.ny());
  CHECK(back.t() == f.t());
  CHECK(back.y_axis().x_max() == f.y_axis().x_max());
  bool exact = true;
  for (std::size_t i = 0; i < f.size(); ++i) {
    exact = exact && back.values()[i] == f.values()[i] &&
            std::signbit(back.values()[i].real()) == std::signbit(f.values()[i].real());
  }
  CHECK(exact);

  SUBCASE("1D") {
    const auto g = gaussian_1d(Grid1D(64, -8.0, 8.0), 1.0, 2.0, 0.5);
    const auto p = write_field_dump(g, dir / "one");
    const auto h = read_field_header(p[0]);
    CHECK(h.ny == 0);
    const auto b = read_field_dump(p[0]);
    CHECK(b.dims() == 1);
    CHECK(b.values()[17] == g.values()[17]);
  }
  SUBCASE("payload is little-endian re/im pairs") {
    std::ifstream in(paths[1], std::ios::binary);
    unsigned char bytes[16];
    in.read(reinterpret_cast<char*>(bytes), 16);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(bytes[b]) << (8 * b);
    CHECK(std::bit_cast<double>(bits) == f.values()[0].real());
  }
  SUBCASE("truncated payload") {
    fs::resize_file(paths[1], fs::file_size(paths[1]) - 8);
    CHECK(code_of([&] { read_field_dump(paths[0]); }) == ErrorCode::TruncatedPayload);
  }
  SUBCASE("missing payload") {
    fs::remove(paths[1]);
    CHECK(code_of([&] { read_field_dump(paths[0]); }) == ErrorCode::MissingArtifact);
  }
  SUBCASE("corrupt header") {
    std::ofstream(paths[0]) << "{\"format\": \"pilotwave-field\", \"version\": 1";
    CHECK(code_of([&] { read_field_dump(paths[0]); }) == ErrorCode::CorruptHeader);
  }
  SUBCASE("header disagreeing with the grid") {
    std::ifstream in(paths[0]);
    std::string s((std::istreambuf_iterator<char>(in)), {});
    in.close();
    s.replace(s.find("\"nx\": 24"), 8, "\"nx\": 25");
    std::ofstream(paths[0]) << s;
    CHECK(code_of([&] { read_field_dump(paths[0]); }) == ErrorCode::CorruptHeader);
  }
  SUBCASE("missing header") {
    CHECK(code_of([&] { read_field_dump(dir / "nothing.json"); }) == ErrorCode::MissingArtifact);
  }
}

TEST_CASE("trajectory table round trip") {
  const auto dir = scratch("traj");
  const UnitSystem u;
  Trajectory tr;
  tr.dt = 0.1;
  for (int i = 0; i < 50; ++i) {
    tr.samples.push_back({std::sin(0.3 * i) * 7.0, 0.1 * i * i / 3.0, 0.1 * i});
  }
  const auto table = to_table(tr, u);
  write_trajectory_table(table, dir / "t.csv");
  CHECK(read_trajectory_table(dir / "t.csv") == table);

  const auto back = from_table(table, u);
  REQUIRE(back.samples.size() == tr.samples.size());
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    CHECK(back.samples[i].x == doctest::Approx(tr.samples[i].x).epsilon(1e-14));
    CHECK(*back.samples[i].y == doctest::Approx(*tr.samples[i].y).epsilon(1e-14));
  }

  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,t[s],X[m],Y[m]");

  std::ofstream(dir / "bad.csv") << "step,t,X\n0,0,0\n";
  CHECK(code_of([&] { read_trajectory_table(dir / "bad.csv"); }) == ErrorCode::CorruptHeader);
  std::ofstream(dir / "bad2.csv") << "step,t[s],X[m]\n0,0,zero\n";
  CHECK(code_of([&] { read_trajectory_table(dir / "bad2.csv"); }) == ErrorCode::CorruptHeader);
}

TEST_CASE("bundle and manifest") {
  const auto dir = scratch("bundle");
  ScenarioConfig c;
  c.name = "tiny";
  c.grid = {256, -16.0, 15.875, 0, 0.0, 0.0};
  c.initial.components = {{0.0, 2.0, 0.0, 1.0}};
  c.evolution.t_final = 2.0;
  c.evolution.steps = 40;
  c.sampling = {500, 1, 0};
  c.trajectory.highlight_x = 0.5;
  const auto r = run_scenario(c);
  const auto files = write_bundle(r, dir);
  write_manifest(dir, {"tiny", 1, 500}, c, files, {});
  CHECK(verify_manifest(dir).empty());
  CHECK(bundle_snapshots(dir).size() == r.snapshots.size());
  CHECK(bundle_units(dir).length_unit == c.units.length_unit);

  const auto ens = read_ensemble_table(dir / "ensemble.csv", c.units);
  REQUIRE(ens.size() == r.ensemble.size());
  CHECK(ens.back().configurations.size() == 500);
  CHECK(ens.back().configurations[3].x == doctest::Approx(r.ensemble.back().configurations[3].x).epsilon(1e-14));

  // A second run into another directory is byte-identical.
  const auto dir2 = scratch("bundle2");
  write_manifest(dir2, {"tiny", 1, 500}, c, write_bundle(run_scenario(c), dir2), {});
  for (const auto& f : files) CHECK(sha256_file(dir / f) == sha256_file(dir2 / f));
  CHECK(sha256_file(dir / "manifest.json") == sha256_file(dir2 / "manifest.json"));

  std::ofstream(dir / "reports.csv", std::ios::app) << "tampered\n";
  const auto bad = verify_manifest(dir);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0] == "reports.csv");

  // sha256 of "abc"
  std::ofstream(dir / "abc.txt") << "abc";
  CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
