#pragma once

// Named experiments: each binds an initial state, an interaction and an
// ensemble to the solver, guidance and statistics modules and produces a
// results bundle.
//
// Quantities in ScenarioConfig are in scaled units (see UnitSystem); the
// config file layer converts from SI.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pilotwave/classical.hpp"
#include "pilotwave/conditional.hpp"
#include "pilotwave/core.hpp"
#include "pilotwave/equilibrium.hpp"
#include "pilotwave/schrodinger.hpp"

namespace pilotwave {

enum class ScenarioKind { Quantum, ClassicalImpulse, ClassicalSimultaneous };

struct GridSpec {
  std::size_t nx = 512;
  double x_min = -127.75;
  double x_max = 127.75;
  std::size_t ny = 0;  // 0: one-dimensional run
  double y_min = 0.0;
  double y_max = 0.0;
};

struct PacketSpec {
  double x0 = 0.0;
  double sigma = 1.0;
  double k0 = 0.0;
  double weight = 1.0;  // probability weight; amplitudes are sqrt(weight)
};

struct InitialSpec {
  std::vector<PacketSpec> components{PacketSpec{}};
  double y0 = 0.0;
  double sigma_y = 0.5;
};

enum class InteractionKind { None, Staircase, Splitter };

struct InteractionSpec {
  InteractionKind kind = InteractionKind::None;
  // staircase
  double g = 0.0;
  double delta = 15.0;
  double t_on = 0.0;
  double t_off = 0.0;
  bool impulsive = true;
  // splitter, applied at t = 0
  std::vector<double> displacements;
  std::vector<double> weights;
};

struct EvolutionSpec {
  double t_final = 0.0;
  std::size_t steps = 0;  // 0: derived from the default dt rule
  Method method = Method::SplitOperator;
  double mass = 1.0;      // of both particles, in units of the reference mass
};

struct SamplingSpec {
  std::size_t n = 10000;
  std::uint64_t seed = 7;
  std::size_t conditional_n = 0;  // larger ensemble for the conditional test; 0: use n
};

struct TrajectorySpec {
  std::size_t stride = 2;  // trajectory step = stride field steps
  std::optional<double> highlight_x;
  std::optional<double> highlight_y;
  std::size_t checkpoints = 3;
  std::vector<double> ball_sigmas;  // sensitivity runs: packet widths to compare
  double ball_radius = 0.1;
  std::size_t ball_points = 21;
};

struct ClassicalSpec {
  std::string coupling = "x";
  double g = 1.0;
  double h = 1.0;
  ClassicalState start{2.0, 3.0, 0.0, 0.0, std::nullopt, std::nullopt};
  double t_final = 1.0;
  double dt = 0.01;
  std::size_t random_cases = 100;
  std::vector<double> pointer_momenta{0.1, 0.05, 0.025, 0.0125};
};

struct OutputSpec {
  std::size_t snapshot_stride = 0;  // 0: checkpoints only
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  ScenarioKind kind = ScenarioKind::Quantum;
  UnitSystem units;
  GridSpec grid;
  InitialSpec initial;
  InteractionSpec interaction;
  EvolutionSpec evolution;
  SamplingSpec sampling;
  TrajectorySpec trajectory;
  ClassicalSpec classical;
  OutputSpec output;
};

/// Throws ConfigError naming the offending field.
void validate(const ScenarioConfig& cfg);

/// The seven registered scenarios.
std::vector<ScenarioConfig> builtin_scenarios();
/// Throws ConfigError for an unknown name.
ScenarioConfig builtin_scenario(const std::string& name);

struct EnsembleCheckpoint {
  std::size_t step = 0;  // trajectory step
  double t = 0.0;
  std::vector<Configuration> configurations;
};

struct ScenarioResult {
  ScenarioConfig config;
  std::vector<WaveField> snapshots;        // initial state first, then checkpoints
  std::optional<Trajectory> highlight;
  std::vector<EnsembleCheckpoint> ensemble;  // first config.sampling.n members
  std::vector<Channel> channels;           // of the final state (2D runs)
  std::vector<StatReport> reports;
  std::map<std::string, double> scalars;
  std::vector<ClassicalState> classical_path;
};

/// Runs a validated configuration. Module errors are rethrown with the
/// scenario name attached.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Initial wave function of a quantum scenario, normalized.
WaveField initial_field(const ScenarioConfig& cfg);
Hamiltonian scenario_hamiltonian(const ScenarioConfig& cfg, const WaveField& shape);

}  // namespace pilotwave
