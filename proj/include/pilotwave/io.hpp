#pragma once

// Config files, field dumps, delimited tables and result bundles.
//
// Bundle layout (all paths relative to the run directory):
//   manifest.json             inputs, seed, versions, sha256 of every other file
//   config.conf               the configuration that was run
//   summary.json              scalars, reports and channels
//   reports.csv, channels.csv
//   ensemble.csv              trajectory ensemble at the checkpoints (SI)
//   trajectories/highlight.csv
//   classical.csv             classical scenarios only
//   fields/snap_NNNN.json + .bin

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pilotwave/scenarios.hpp"

namespace pilotwave {

// ---------------------------------------------------------------- config

/// Parses the sectioned key = value format. Physical quantities carry SI
/// suffixes ("15 nm", "1e5 m/s"); unknown keys, bad units and malformed
/// numbers raise ConfigError naming section.key. `origin` labels messages.
ScenarioConfig parse_config(std::string_view text, const std::string& origin = "config");
ScenarioConfig load_config(const std::filesystem::path& path);
/// Inverse of parse_config (SI output, shortest round-trip decimal form).
std::string format_config(const ScenarioConfig& cfg);

/// "15 nm" -> 15 (scaled), checked against the expected dimension.
double parse_quantity(std::string_view text, Dimension expected, const UnitSystem& units);

// ---------------------------------------------------------------- field dump

struct FieldHeader {
  std::size_t nx = 0;
  std::size_t ny = 0;  // 0 for 1D
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double t = 0.0;  // scaled
  UnitSystem units;
  std::string payload;  // file name of the payload, relative to the header
};

/// Writes stem.json (header) and stem.bin (little-endian float64 re/im pairs,
/// x-major). Returns the two paths.
std::vector<std::filesystem::path> write_field_dump(const WaveField& f, const std::filesystem::path& stem,
                                                    const UnitSystem& units = {});
FieldHeader read_field_header(const std::filesystem::path& header_path);
/// Errors: MissingArtifact, CorruptHeader, TruncatedPayload.
WaveField read_field_dump(const std::filesystem::path& header_path);

// ---------------------------------------------------------------- tables

struct TrajectoryRow {
  std::size_t step = 0;
  double t = 0.0;  // s
  double x = 0.0;  // m
  std::optional<double> y;  // m
  friend bool operator==(const TrajectoryRow&, const TrajectoryRow&) = default;
};

struct TrajectoryTable {
  std::vector<TrajectoryRow> rows;
  bool two_d() const { return !rows.empty() && rows.front().y.has_value(); }
  friend bool operator==(const TrajectoryTable&, const TrajectoryTable&) = default;
};

TrajectoryTable to_table(const Trajectory& tr, const UnitSystem& units);
Trajectory from_table(const TrajectoryTable& table, const UnitSystem& units);
void write_trajectory_table(const TrajectoryTable& table, const std::filesystem::path& path);
/// Errors: MissingArtifact, CorruptHeader (bad header row or malformed row).
TrajectoryTable read_trajectory_table(const std::filesystem::path& path);

/// Ensemble checkpoints as rows step, t, member, X, Y in SI.
void write_ensemble_table(const std::vector<EnsembleCheckpoint>& ens, const UnitSystem& units,
                          const std::filesystem::path& path);
std::vector<EnsembleCheckpoint> read_ensemble_table(const std::filesystem::path& path, const UnitSystem& units);

void write_reports_table(const std::vector<StatReport>& reports, const UnitSystem& units,
                         const std::filesystem::path& path);

// ---------------------------------------------------------------- bundles

struct RunInputs {
  std::string target;  // builtin name or config path as given
  std::uint64_t seed = 0;
  std::size_t traj = 0;
};

/// Writes every artifact except the manifest; returns paths relative to dir.
std::vector<std::string> write_bundle(const ScenarioResult& r, const std::filesystem::path& dir);

struct ManifestStatus {
  int exit_code = 0;
  std::string status = "ok";  // ok | config-error | numerical-error | error
  std::string message;
};

/// manifest.json: inputs, versions, status and the sha256 of each listed file.
void write_manifest(const std::filesystem::path& dir, const RunInputs& in, const std::optional<ScenarioConfig>& cfg,
                    const std::vector<std::string>& files, const ManifestStatus& status);

std::string sha256_file(const std::filesystem::path& path);

/// Recomputes the listed checksums; returns the files that differ or are missing.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

/// Snapshot dumps of a bundle in index order.
std::vector<std::filesystem::path> bundle_snapshots(const std::filesystem::path& dir);

/// Unit system recorded in a bundle's config.
UnitSystem bundle_units(const std::filesystem::path& dir);

}  // namespace pilotwave
