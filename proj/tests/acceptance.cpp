// Acceptance run: one line per primary criterion, nonzero exit if any fails.
// Tolerances are fixed here; reference values come from tests/oracles.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pilotwave/cli.hpp"
#include "pilotwave/guidance.hpp"
#include "pilotwave/io.hpp"
#include "pilotwave/scenarios.hpp"

using namespace pilotwave;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void line(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Timed {
  ScenarioResult result;
  double seconds;
};

Timed timed_run(const ScenarioConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = run_scenario(c);
  return {std::move(r), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
}

double scalar(const ScenarioResult& r, const std::string& k) {
  const auto it = r.scalars.find(k);
  return it == r.scalars.end() ? std::nan("") : it->second;
}

// "y in [a, b]" -> [a, b]
std::pair<double, double> window_of(const std::string& label) {
  double a = 0.0, b = 0.0;
  std::sscanf(label.c_str(), "y in [%lf, %lf]", &a, &b);
  return {a, b};
}

double std_of_density(const WaveField& f) {
  const auto& g = f.x_axis();
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) {
    const double x = g.coord(i);
    const double p = std::norm(f(i));
    m0 += p;
    m1 += p * x;
    m2 += p * x * x;
  }
  const double mean = m1 / m0;
  return std::sqrt(m2 / m0 - mean * mean);
}

WaveField analytic_packet(const Grid1D& g, double t, double sigma) {
  std::vector<cplx> v(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) v[i] = oracle::free_gaussian(g.coord(i), t, sigma);
  return WaveField(g, std::move(v), t);
}

void unitarity(const std::map<std::string, Timed>& runs) {
  double worst = 0.0, slowest = 0.0;
  bool sizes = true;
  for (const auto& [name, t] : runs) {
    const auto& r = t.result;
    if (r.config.kind != ScenarioKind::Quantum) continue;
    worst = std::max({worst, scalar(r, "final_norm_error"), scalar(r, "norm_drift")});
    if (r.scalars.count("sensitivity_norm_drift")) worst = std::max(worst, scalar(r, "sensitivity_norm_drift"));
    slowest = std::max(slowest, t.seconds);
    if (r.config.grid.ny > 0) {
      sizes = sizes && r.config.grid.nx == 512 && r.config.grid.ny == 512 && scalar(r, "field_steps") <= 2000.0;
    }
  }
  line("unitarity", worst < 1e-8 && slowest < 60.0 && sizes,
       fmt("max |norm^2 - 1| = %.2e (< 1e-8), 2D runs 512x512 with <= 2000 steps: %s, slowest scenario %.1f s (< 60)",
           worst, sizes ? "yes" : "no", slowest));
}

void classical(const std::map<std::string, Timed>& runs) {
  const auto& imp = runs.at("classical-impulse");
  const auto& sim = runs.at("classical-simultaneous");
  const double err = scalar(sim.result, "max_relative_inference_error");
  const double cases = scalar(sim.result, "random_cases");
  double worst_ratio = 0.0;
  const std::vector<double> eps = imp.result.config.classical.pointer_momenta;
  for (std::size_t i = 0; i + 1 < eps.size(); ++i) {
    for (const char* key : {"disturbance_p_x_eps_%g", "inference_error_x_eps_%g", "inference_error_p_x_eps_%g"}) {
      const auto& r = std::string(key).rfind("disturbance", 0) == 0 ? imp.result : sim.result;
      const double a = scalar(r, fmt(key, eps[i]));
      const double b = scalar(r, fmt(key, eps[i + 1]));
      const double ratio = (a / b) / (eps[i] / eps[i + 1]);
      worst_ratio = std::max(worst_ratio, std::abs(ratio - 1.0));
    }
  }
  const double secs = imp.seconds + sim.seconds;
  line("classical-exactness", err < 1e-8 && cases == 100.0 && worst_ratio < 0.05 && secs < 1.0,
       fmt("inference rel. error %.1e over %.0f cases (< 1e-8), linear-in-p_y ratio off by %.1e (< 5%%), %.3f s",
           err, cases, worst_ratio, secs));
}

void free_packet(const ScenarioResult& r) {
  const double sigma = r.config.initial.components.at(0).sigma;
  double width_err = 0.0;
  for (const auto& s : r.snapshots) {
    width_err = std::max(width_err, std::abs(std_of_density(s) / oracle::density_std(s.t(), sigma) - 1.0));
  }

  // Every member that stays clear of the periodic images, against x0 s(t) / s(0).
  double traj_err = 0.0;
  std::size_t compared = 0;
  const auto& first = r.ensemble.front().configurations;
  for (std::size_t k = 1; k < r.ensemble.size(); ++k) {
    const double t = r.ensemble[k].t;
    const double scale = oracle::spread(t, sigma) / sigma;
    for (std::size_t m = 0; m < first.size(); ++m) {
      const double x0 = first[m].x;
      if (std::abs(x0) < 1.0 || std::abs(x0) > 2.0 * sigma) continue;
      const double expect = x0 * scale;
      traj_err = std::max(traj_err, std::abs(r.ensemble[k].configurations[m].x - expect) / std::abs(expect));
      ++compared;
    }
  }

  const double s3 = 3.0;
  const Grid1D g(1601, -40.0, 40.0);
  const double t_end = std::sqrt(3.0) * s3 * s3;
  const auto end_x = [&](std::size_t steps) {
    FieldFunctionSource src([&](double t) { return analytic_packet(g, t, s3); });
    return integrate_trajectory(src, {2.5, std::nullopt, 0.0}, t_end / static_cast<double>(steps), steps).back().x;
  };
  const double ref = end_x(1024);
  const double e4 = std::abs(end_x(4) - ref), e8 = std::abs(end_x(8) - ref), e16 = std::abs(end_x(16) - ref);
  const double gain = std::min(e4 / e8, e8 / e16);

  line("free-packet", width_err < 1e-4 && traj_err < 1e-3 && compared > 0 && gain >= 8.0,
       fmt("width rel. error %.1e (< 1e-4), trajectory rel. error %.1e over %zu points (< 1e-3), "
           "RK4 gain per halving %.1f (>= 8)",
           width_err, traj_err, compared, gain));
}

void equivariance(const std::map<std::string, Timed>& runs) {
  std::string detail;
  bool ok = true;
  for (const char* name : {"free-gaussian-equivariance", "position-measurement"}) {
    const auto& r = runs.at(name).result;
    std::set<double> times;
    double worst = 0.0, crit = 0.0;
    std::size_t n = 0;
    for (const auto& rep : r.reports) {
      if (rep.test != "equivariance-ks" || rep.t <= 0.0) continue;
      times.insert(rep.t);
      ok = ok && rep.pass;
      worst = std::max(worst, rep.statistic / rep.critical);
      crit = rep.critical;
      n = rep.n;
    }
    ok = ok && times.size() >= 3 && n == 10000;
    detail += fmt("%s: %zu times, n = %zu, max KS/critical %.2f (critical %.4f); ", name, times.size(), n, worst, crit);
  }
  line("equivariance", ok, detail);
}

void measurement_channels(const ScenarioResult& r) {
  const auto& c = r.config;
  const double sigma = c.initial.components.at(0).sigma;
  const double reading = c.interaction.g * c.interaction.t_off;
  double worst = 0.0;
  bool disjoint = true;
  for (std::size_t k = 0; k < r.channels.size(); ++k) {
    const auto& ch = r.channels[k];
    if (k > 0) disjoint = disjoint && ch.y_lo > r.channels[k - 1].y_hi;
    // Centroid reading (2p + 1) g t identifies the bin [p delta, (p + 1) delta).
    const double p = std::round((ch.centroid / reading - 1.0) / 2.0);
    const double mass = oracle::gaussian_mass(p * c.interaction.delta, (p + 1.0) * c.interaction.delta, sigma);
    worst = std::max(worst, std::abs(ch.weight - mass));
  }
  const double hx = scalar(r, "highlight_final_x");
  const double hy = scalar(r, "highlight_final_y");
  double width = 0.0;
  for (const auto& ch : r.channels) {
    if (ch.contains(20.0)) width = ch.width();
  }
  const double fid = scalar(r, "highlight_slice_fidelity");
  const bool ok = r.channels.size() >= 3 && disjoint && worst < 0.02 && hx >= 15.0 && hx < 30.0 && width > 0.0 &&
                  std::abs(hy - 20.0) <= width && fid < 0.5;
  line("measurement-channels", ok,
       fmt("%zu disjoint channels, weight vs bin mass max |diff| %.1e (< 0.02), X(t_f) = %.4f nm in [15, 30), "
           "Y(t_f) = %.4f nm (channel width %.2f), slice fidelity %.3f (< 0.5)",
           r.channels.size(), worst, hx, hy, width, fid));
}

void null_measurement(const ScenarioResult& r) {
  const double l1 = scalar(r, "x_marginal_l1");
  std::size_t n = 0, passed = 0;
  double worst = 0.0;
  for (const auto& rep : r.reports) {
    if (rep.test != "conditional-vs-initial") continue;
    ++n;
    passed += rep.pass;
    worst = std::max(worst, rep.statistic / rep.critical);
  }
  line("null-measurement", l1 < 1e-3 && n >= 2 && passed == n,
       fmt("x-marginal L1 change %.1e (< 1e-3), conditional X vs |phi(x,0)|^2 KS passes %zu/%zu channels "
           "(max KS/critical %.2f)",
           l1, passed, n, worst));
}

void nonmeasurability(const ScenarioResult& r) {
  const double lin = scalar(r, "linearity_residual");
  const double f0 = scalar(r, "channel_0_frequency");
  const double f1 = scalar(r, "channel_1_frequency");
  const double un = scalar(r, "unassigned_fraction");
  // Each channel must sit on a reading that one of the components alone would give.
  const double reading = r.config.interaction.g * r.config.interaction.t_off;
  bool readings = r.channels.size() == 2;
  for (const auto& ch : r.channels) {
    bool matches = false;
    for (const auto& comp : r.config.initial.components) {
      const double a = 2.0 * std::floor(comp.x0 / r.config.interaction.delta) + 1.0;
      matches = matches || std::abs(ch.centroid - a * reading) < 0.5;
    }
    readings = readings && matches;
  }
  const bool ok = lin < 1e-9 && std::abs(f0 - 0.5) <= 0.02 && std::abs(f1 - 0.5) <= 0.02 && un == 0.0 &&
                  readings && r.config.sampling.n == 10000;
  line("non-measurability", ok,
       fmt("linearity residual %.1e (< 1e-9), frequencies %.4f / %.4f (0.5 +- 0.02), unassigned %.0f, "
           "every run reads psi1 or psi2: %s",
           lin, f0, f1, un, readings ? "yes" : "no"));
}

void conditional(const std::map<std::string, Timed>& runs) {
  const auto& pm = runs.at("position-measurement").result;
  const auto& fake = runs.at("fake-measurement").result;
  std::string detail;
  bool ok = true;

  const auto pick = [](const ScenarioResult& r, auto&& want) {
    std::vector<StatReport> out;
    for (const auto& rep : r.reports) {
      if (rep.test == "conditional-probability" && want(rep)) out.push_back(rep);
    }
    return out;
  };
  const auto summarize = [&](const char* what, const std::vector<StatReport>& reps) {
    bool all = !reps.empty();
    std::size_t min_n = reps.empty() ? 0 : reps.front().n;
    for (const auto& rep : reps) {
      all = all && rep.pass && rep.n >= 200;
      min_n = std::min(min_n, rep.n);
    }
    ok = ok && all;
    detail += fmt("%s %zu window(s) %s (min selected %zu); ", what, reps.size(), all ? "pass" : "FAIL", min_n);
  };

  summarize("product t=0:", pick(pm, [](const StatReport& r) { return r.t == 0.0; }));
  summarize("staircase y=20:", pick(pm, [](const StatReport& r) {
              const auto [a, b] = window_of(r.label);
              return r.t > 0.0 && a <= 20.0 && 20.0 <= b;
            }));
  summarize("splitter channels:", pick(fake, [](const StatReport& r) { return r.t > 0.0; }));
  const double w = pm.config.initial.sigma_y / 4.0;
  line("conditional-probability", ok, detail + fmt("window width %.3f nm", w));
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "pilotwave_acceptance";
  fs::remove_all(root);
  std::ostringstream out, err;
  const auto a = root / "a", b = root / "b";
  const int ca = cli_run({"run", "position-measurement", "--seed", "7", "--traj", "10000", "--out", a.string(), "-q"},
                         out, err);
  const int cb = cli_run({"run", "position-measurement", "--seed", "7", "--traj", "10000", "--out", b.string(), "-q"},
                         out, err);
  std::size_t files = 0, same = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    ++files;
    same += fs::exists(b / rel) && sha256_file(e.path()) == sha256_file(b / rel);
  }
  const bool verified = verify_manifest(a).empty() && verify_manifest(b).empty();
  line("determinism", ca == 0 && cb == 0 && files > 0 && same == files && verified,
       fmt("two seeded runs: %zu/%zu files byte-identical, manifests verify: %s", same, files,
           verified ? "yes" : "no"));
  fs::remove_all(root);
}

}  // namespace

int main() {
  std::map<std::string, Timed> runs;
  try {
    for (const auto& c : builtin_scenarios()) {
      runs.emplace(c.name, timed_run(c));
      std::fprintf(stderr, "ran %s in %.1f s\n", c.name.c_str(), runs.at(c.name).seconds);
    }
  } catch (const std::exception& e) {
    std::printf("FAIL  scenario run aborted: %s\n", e.what());
    return 1;
  }
  const auto guard = [&](const char* name, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      line(name, false, std::string("threw: ") + e.what());
    }
  };
  guard("unitarity", [&] { unitarity(runs); });
  guard("classical-exactness", [&] { classical(runs); });
  guard("free-packet", [&] { free_packet(runs.at("free-gaussian-equivariance").result); });
  guard("equivariance", [&] { equivariance(runs); });
  guard("measurement-channels", [&] { measurement_channels(runs.at("position-measurement").result); });
  guard("null-measurement", [&] { null_measurement(runs.at("fake-measurement").result); });
  guard("non-measurability", [&] { nonmeasurability(runs.at("superposition-nonmeasurability").result); });
  guard("conditional-probability", [&] { conditional(runs); });
  guard("determinism", [&] { determinism(); });
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
