#include "pilotwave/cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <ostream>

#include "pilotwave/io.hpp"

namespace pilotwave {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path default_out(const std::string& name) {
  if (const char* root = std::getenv("PILOTWAVE_OUT"); root && *root) return fs::path(root) / name;
  return fs::path("runs") / name;
}

bool looks_like_path(const std::string& target) {
  return target.find('/') != std::string::npos || fs::path(target).has_extension() || fs::exists(target);
}

int exit_code_for(const Error& e) {
  if (e.code() == ErrorCode::ConfigError) return kExitConfig;
  if (is_numerical(e.code())) return kExitNumerical;
  return kExitFailed;
}

const char* status_for(int code) {
  switch (code) {
    case kExitOk:
      return "ok";
    case kExitConfig:
      return "config-error";
    case kExitNumerical:
      return "numerical-error";
    default:
      return "error";
  }
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string target;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> traj;
};

int do_run(const RunArgs& a, spdlog::logger& log, std::ostream& out) {
  RunInputs inputs{a.target, 0, 0};
  std::optional<ScenarioConfig> cfg;
  fs::path dir = a.out.empty() ? default_out(fs::path(a.target).stem().string()) : fs::path(a.out);
  std::vector<std::string> files;
  ManifestStatus status;
  try {
    ScenarioConfig c = looks_like_path(a.target) ? load_config(a.target) : builtin_scenario(a.target);
    if (a.seed) c.sampling.seed = *a.seed;
    if (a.traj) c.sampling.n = *a.traj;
    validate(c);
    inputs.seed = c.sampling.seed;
    inputs.traj = c.sampling.n;
    if (a.out.empty()) dir = default_out(c.name);
    cfg = c;
    log.info("running '{}' (seed {}, {} trajectories) into {}", c.name, c.sampling.seed, c.sampling.n,
             dir.string());
    const ScenarioResult r = run_scenario(c);
    files = write_bundle(r, dir);
    std::size_t failed = 0;
    for (const auto& rep : r.reports) {
      if (!rep.pass) {
        ++failed;
        log.warn("report {} [{}] at t = {:.6g}: statistic {:.4g} above critical {:.4g}", rep.test, rep.label, rep.t,
                 rep.statistic, rep.critical);
      }
    }
    log.info("{} reports, {} failed; {} files", r.reports.size(), failed, files.size());
    status.message = std::to_string(r.reports.size() - failed) + "/" + std::to_string(r.reports.size()) +
                     " statistical reports pass";
  } catch (const Error& e) {
    status.exit_code = exit_code_for(e);
    status.status = status_for(status.exit_code);
    status.message = e.what();
    log.error("{}", e.what());
  } catch (const std::exception& e) {
    status.exit_code = kExitFailed;
    status.status = "error";
    status.message = e.what();
    log.error("{}", e.what());
  }
  try {
    write_manifest(dir, inputs, cfg, files, status);
    out << (dir / "manifest.json").string() << "\n";
  } catch (const std::exception& e) {
    log.error("could not write the manifest: {}", e.what());
    if (status.exit_code == kExitOk) status.exit_code = kExitFailed;
  }
  return status.exit_code;
}

// ---------------------------------------------------------------- bundle helpers

struct Bundle {
  fs::path dir;
  UnitSystem units;
  std::vector<fs::path> snapshots;

  explicit Bundle(const fs::path& d) : dir(d) {
    if (!fs::is_directory(d)) throw Error(ErrorCode::MissingArtifact, "no bundle at " + d.string());
    units = bundle_units(d);
    snapshots = bundle_snapshots(d);
  }

  WaveField snapshot(std::size_t i) const {
    if (i >= snapshots.size()) {
      throw Error(ErrorCode::MissingArtifact, "snapshot " + std::to_string(i) + " not in bundle (" +
                                                  std::to_string(snapshots.size()) + " snapshots)");
    }
    return read_field_dump(snapshots[i]);
  }

  std::vector<EnsembleCheckpoint> ensemble() const {
    if (!fs::exists(dir / "ensemble.csv")) throw Error(ErrorCode::MissingArtifact, "bundle has no ensemble.csv");
    return read_ensemble_table(dir / "ensemble.csv", units);
  }

  std::optional<Trajectory> highlight() const {
    const fs::path p = dir / "trajectories" / "highlight.csv";
    if (!fs::exists(p)) return std::nullopt;
    return from_table(read_trajectory_table(p), units);
  }
};

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

// Ensemble configurations at the snapshot's time, retimed to it exactly.
std::optional<std::vector<Configuration>> ensemble_at(const std::vector<EnsembleCheckpoint>& ens, double t) {
  for (const auto& e : ens) {
    if (same_time(e.t, t)) {
      auto c = e.configurations;
      for (auto& x : c) x.t = t;
      return c;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- check

int do_check_equivariance(const std::string& dir, spdlog::logger& log, std::ostream& out) {
  const Bundle b(dir);
  const auto ens = b.ensemble();
  std::size_t checked = 0;
  bool all = true;
  for (std::size_t i = 0; i < b.snapshots.size(); ++i) {
    const auto hdr = read_field_header(b.snapshots[i]);
    const auto pts = ensemble_at(ens, hdr.t);
    if (!pts) continue;
    const WaveField f = b.snapshot(i);
    for (const auto& rep : check_equivariance(*pts, f)) {
      char line[256];
      std::snprintf(line, sizeof line, "snapshot %zu t=%.6g s axis=%s n=%zu ks=%.6f critical=%.6f %s\n", i,
                    convert_scaled_to_si(b.units, f.t(), Dimension::Time), rep.label.c_str(), rep.n, rep.statistic,
                    rep.critical, rep.pass ? "pass" : "FAIL");
      out << line;
      all = all && rep.pass;
      ++checked;
    }
  }
  if (checked == 0) {
    log.error("no ensemble checkpoint matches a snapshot in {}", dir);
    return kExitFailed;
  }
  return all ? kExitOk : kExitFailed;
}

int do_check_manifest(const std::string& dir, std::ostream& out) {
  const auto bad = verify_manifest(dir);
  for (const auto& f : bad) out << "mismatch " << f << "\n";
  if (bad.empty()) out << "manifest ok\n";
  return bad.empty() ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------- render-data

double nm(const UnitSystem& u, double scaled) { return convert_scaled_to_si(u, scaled, Dimension::Length) * 1e9; }

json axis_nm(const Grid1D& g, const UnitSystem& u) {
  json a = json::array();
  for (std::size_t i = 0; i < g.n(); ++i) a.push_back(nm(u, g.coord(i)));
  return a;
}

// Density per nm along an axis (scaled lengths are converted, so the curve integrates to 1 in nm).
json marginal_nm(const WaveField& f, Axis axis, const UnitSystem& u) {
  const double per_nm = 1.0 / nm(u, 1.0);
  json d = json::array();
  for (double v : marginal_density(f, axis)) d.push_back(v * per_nm);
  return d;
}

std::optional<Configuration> marker_at(const std::optional<Trajectory>& h, double t) {
  if (!h || h->samples.empty()) return std::nullopt;
  const auto it = std::min_element(h->samples.begin(), h->samples.end(), [&](const auto& a, const auto& b) {
    return std::abs(a.t - t) < std::abs(b.t - t);
  });
  if (!same_time(it->t, t)) return std::nullopt;
  return *it;
}

json point_nm(const Configuration& c, const UnitSystem& u) {
  json p{{"x_nm", nm(u, c.x)}};
  if (c.y) p["y_nm"] = nm(u, *c.y);
  return p;
}

json read_channels(const Bundle& b) {
  json ch = json::array();
  std::ifstream in(b.dir / "summary.json");
  if (!in) return ch;
  const json s = json::parse(in);
  for (const auto& c : s.value("channels", json::array())) {
    ch.push_back(json{{"y_lo_nm", nm(b.units, c.at("y_lo").get<double>())},
                      {"y_hi_nm", nm(b.units, c.at("y_hi").get<double>())},
                      {"weight", c.at("weight")},
                      {"centroid_nm", nm(b.units, c.at("centroid").get<double>())}});
  }
  return ch;
}

json histogram(std::vector<double> xs, const Grid1D& g, std::size_t bins, const UnitSystem& u) {
  const double lo = g.x_min(), hi = g.x_max();
  const double w = (hi - lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double x : xs) {
    const auto k = static_cast<std::size_t>(std::clamp((x - lo) / w, 0.0, static_cast<double>(bins) - 1.0));
    counts[k] += 1.0;
  }
  json edges = json::array(), dens = json::array();
  for (std::size_t k = 0; k <= bins; ++k) edges.push_back(nm(u, lo + w * static_cast<double>(k)));
  const double scale = 1.0 / (static_cast<double>(xs.size()) * nm(u, w));
  for (double c : counts) dens.push_back(c * scale);
  return json{{"edges_nm", edges}, {"density_per_nm", dens}, {"n", xs.size()}};
}

int do_render_data(const std::string& dir, const std::string& kind, std::size_t index, const std::string& path,
                   std::ostream& out) {
  const Bundle b(dir);
  const UnitSystem& u = b.units;
  json j;
  j["kind"] = kind;
  j["snapshot"] = index;

  if (kind == "trajectories") {
    const auto h = b.highlight();
    const auto ens = b.ensemble();
    json hl = json::array();
    if (h) {
      for (const auto& s : h->samples) {
        json p = point_nm(s, u);
        p["t_s"] = convert_scaled_to_si(u, s.t, Dimension::Time);
        hl.push_back(p);
      }
    }
    j["highlight"] = hl;
    json times = json::array();
    for (const auto& e : ens) times.push_back(convert_scaled_to_si(u, e.t, Dimension::Time));
    j["checkpoint_t_s"] = times;
    const std::size_t members = ens.empty() ? 0 : std::min<std::size_t>(200, ens.front().configurations.size());
    json paths = json::array();
    for (std::size_t m = 0; m < members; ++m) {
      json p = json::array();
      for (const auto& e : ens) p.push_back(point_nm(e.configurations.at(m), u));
      paths.push_back(p);
    }
    j["members"] = paths;
  } else {
    const WaveField f = b.snapshot(index);
    j["t_s"] = convert_scaled_to_si(u, f.t(), Dimension::Time);
    if (kind == "joint-density") {
      j["x_nm"] = axis_nm(f.x_axis(), u);
      if (f.dims() == 2) {
        j["y_nm"] = axis_nm(f.y_axis(), u);
        const double per_nm2 = 1.0 / (nm(u, 1.0) * nm(u, 1.0));
        json rows = json::array();
        for (std::size_t ix = 0; ix < f.nx(); ++ix) {
          json row = json::array();
          for (std::size_t iy = 0; iy < f.ny(); ++iy) row.push_back(std::norm(f(ix, iy)) * per_nm2);
          rows.push_back(row);
        }
        j["density_per_nm2"] = rows;
        j["layout"] = "density_per_nm2[ix][iy]";
      } else {
        j["density_per_nm"] = marginal_nm(f, Axis::X, u);
      }
      if (const auto m = marker_at(b.highlight(), f.t())) j["marker"] = point_nm(*m, u);
      j["channels"] = read_channels(b);
    } else if (kind == "histogram-vs-density") {
      const auto pts = ensemble_at(b.ensemble(), f.t());
      if (!pts) throw Error(ErrorCode::MissingArtifact, "no ensemble checkpoint at snapshot " + std::to_string(index));
      json axes = json::array();
      for (Axis a : {Axis::X, Axis::Y}) {
        if (a == Axis::Y && f.dims() == 1) break;
        const Grid1D& g = a == Axis::X ? f.x_axis() : f.y_axis();
        std::vector<double> xs;
        for (const auto& c : *pts) xs.push_back(a == Axis::X ? c.x : *c.y);
        axes.push_back(json{{"axis", a == Axis::X ? "x" : "y"},
                            {"grid_nm", axis_nm(g, u)},
                            {"density_per_nm", marginal_nm(f, a, u)},
                            {"histogram", histogram(std::move(xs), g, 100, u)}});
      }
      j["axes"] = axes;
    } else if (kind == "channels") {
      if (f.dims() != 2) throw Error(ErrorCode::MissingArtifact, "channels need a two-dimensional snapshot");
      j["y_nm"] = axis_nm(f.y_axis(), u);
      j["y_density_per_nm"] = marginal_nm(f, Axis::Y, u);
      json ch = read_channels(b);
      if (const auto pts = ensemble_at(b.ensemble(), f.t())) {
        for (auto& c : ch) {
          std::size_t hits = 0;
          for (const auto& p : *pts) {
            const double y = nm(u, *p.y);
            hits += y >= c["y_lo_nm"].get<double>() && y <= c["y_hi_nm"].get<double>();
          }
          c["frequency"] = static_cast<double>(hits) / static_cast<double>(pts->size());
        }
      }
      j["channels"] = ch;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown kind '" + kind + "'");
    }
  }

  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream o(p, std::ios::trunc);
  if (!o) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  o << j.dump() << "\n";
  out << path << "\n";
  return kExitOk;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pilot-wave dynamics lab", "pilotwave"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "Only log errors");
  app.add_flag("-v,--verbose", verbose, "Log debug detail");

  RunArgs run;
  std::uint64_t seed = 0;
  std::size_t traj = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a builtin scenario or a config file");
  run_cmd->add_option("target", run.target, "Builtin name or config path")->required();
  run_cmd->add_option("--out", run.out, "Output directory (default $PILOTWAVE_OUT/<name> or runs/<name>)");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Sampling seed");
  auto* traj_opt = run_cmd->add_option("--traj", traj, "Number of trajectories")->check(CLI::PositiveNumber);

  app.add_subcommand("list", "List builtin scenarios");

  auto* check = app.add_subcommand("check", "Verify a bundle");
  check->require_subcommand(1);
  std::string bundle;
  auto* eq = check->add_subcommand("equivariance", "KS of the stored ensemble against the stored fields");
  eq->add_option("--bundle", bundle)->required();
  auto* man = check->add_subcommand("manifest", "Recompute the manifest checksums");
  man->add_option("--bundle", bundle)->required();

  auto* render = app.add_subcommand("render-data", "Export plotting data from a bundle as JSON");
  std::string kind, render_out;
  std::size_t snapshot = 0;
  render->add_option("--bundle", bundle)->required();
  render->add_option("--kind", kind)
      ->required()
      ->check(CLI::IsMember({"joint-density", "trajectories", "histogram-vs-density", "channels"}));
  render->add_option("--snapshot", snapshot);
  render->add_option("--out", render_out)->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  spdlog::logger log("pilotwave", sink);
  log.set_pattern("[%l] %v");
  log.set_level(quiet ? spdlog::level::err : verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run_cmd) {
      if (*seed_opt) run.seed = seed;
      if (*traj_opt) run.traj = traj;
      return do_run(run, log, out);
    }
    if (app.got_subcommand("list")) {
      for (const auto& c : builtin_scenarios()) out << c.name << "\t" << c.description << "\n";
      return kExitOk;
    }
    if (*eq) return do_check_equivariance(bundle, log, out);
    if (*man) return do_check_manifest(bundle, out);
    if (*render) return do_render_data(bundle, kind, snapshot, render_out, out);
  } catch (const Error& e) {
    log.error("{}", e.what());
    return e.code() == ErrorCode::InvalidArgument ? kExitConfig : exit_code_for(e);
  } catch (const std::exception& e) {
    log.error("{}", e.what());
    return kExitFailed;
  }
  return kExitConfig;
}

}  // namespace pilotwave
