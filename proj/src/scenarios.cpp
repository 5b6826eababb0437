#include "pilotwave/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "pilotwave/guidance.hpp"

namespace pilotwave {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::ConfigError, field + ": " + why);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double si_time(const UnitSystem& u, double seconds) {
  return convert_si_to_scaled(u, seconds, Dimension::Time);
}

double si_velocity(const UnitSystem& u, double m_per_s) {
  return convert_si_to_scaled(u, m_per_s, Dimension::Velocity);
}

ScenarioConfig measurement_base(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.grid = {512, -127.75, 127.75, 512, -51.1, 51.1};
  c.initial.components = {{0.0, 15.0, 0.0, 1.0}};
  c.initial.y0 = 0.0;
  c.initial.sigma_y = 0.5;
  c.interaction.kind = InteractionKind::Staircase;
  c.interaction.g = si_velocity(c.units, 1e5);
  c.interaction.delta = 15.0;
  c.interaction.t_on = 0.0;
  // g t_off = 20/3 nm, so the A = 3 bin lands at y = 20 nm.
  c.interaction.t_off = si_time(c.units, 6.6667e-14);
  c.interaction.impulsive = true;
  c.evolution.t_final = c.interaction.t_off;
  c.evolution.steps = 200;
  c.sampling = {10000, 7, 0};
  c.trajectory.stride = 2;
  c.trajectory.checkpoints = 3;
  return c;
}

}  // namespace

void validate(const ScenarioConfig& c) {
  if (c.name.empty()) bad("name", "must not be empty");
  if (c.kind != ScenarioKind::Quantum) {
    const auto& k = c.classical;
    try {
      named_coupling(k.coupling, k.g, k.h);
    } catch (const Error& e) {
      bad("interaction.coupling", e.detail());
    }
    if (!(k.dt > 0.0)) bad("trajectory.dt", "must be positive");
    if (!(k.t_final >= k.dt)) bad("evolution.t_final", "must be at least trajectory.dt");
    if (c.kind == ScenarioKind::ClassicalSimultaneous && (k.g == 0.0 || k.h == 0.0)) {
      bad("interaction.g", "both g and h must be nonzero for the simultaneous readout");
    }
    return;
  }
  const auto& g = c.grid;
  if (g.nx < 8) bad("grid.nx", "needs at least 8 points");
  if (!(g.x_min < g.x_max)) bad("grid.x_min", "must be below grid.x_max");
  const bool two_d = g.ny > 0;
  if (two_d) {
    if (g.ny < 8) bad("grid.ny", "needs at least 8 points");
    if (!(g.y_min < g.y_max)) bad("grid.y_min", "must be below grid.y_max");
  }
  if (c.initial.components.empty()) bad("initial.components", "need at least one packet");
  double wsum = 0.0;
  for (std::size_t i = 0; i < c.initial.components.size(); ++i) {
    const auto& p = c.initial.components[i];
    const std::string key = "initial.c" + std::to_string(i + 1);
    if (!(p.sigma > 0.0)) bad(key + "_sigma_x", "must be positive");
    if (!(p.weight > 0.0)) bad(key + "_weight", "must be positive");
    if (!(p.x0 > g.x_min && p.x0 < g.x_max)) bad(key + "_x0", "outside the grid");
    wsum += p.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) bad("initial.weights", "must sum to 1 (got " + num(wsum) + ")");
  if (two_d) {
    if (!(c.initial.sigma_y > 0.0)) bad("initial.sigma_y", "must be positive");
    if (!(c.initial.y0 > g.y_min && c.initial.y0 < g.y_max)) bad("initial.y0", "outside the grid");
  }

  const auto& in = c.interaction;
  if (in.kind != InteractionKind::None && !two_d) bad("interaction.kind", "needs a 2D grid");
  if (in.kind == InteractionKind::Staircase) {
    if (in.g == 0.0) bad("interaction.g", "must be nonzero");
    if (!(in.delta > 0.0)) bad("interaction.delta", "must be positive");
    if (!(in.t_on < in.t_off)) bad("interaction.t_on", "must precede interaction.t_off");
  }
  if (in.kind == InteractionKind::Splitter) {
    if (in.displacements.empty()) bad("interaction.displacements", "must not be empty");
    if (in.displacements.size() != in.weights.size()) {
      bad("interaction.weights", "need one weight per displacement");
    }
    const double s = std::accumulate(in.weights.begin(), in.weights.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-9) bad("interaction.weights", "must sum to 1");
  }

  if (!(c.evolution.t_final > 0.0)) bad("evolution.t_final", "must be positive");
  if (!(c.evolution.mass > 0.0)) bad("evolution.mass", "must be positive");
  if (c.trajectory.stride < 1) bad("trajectory.stride", "must be at least 1");
  if (c.trajectory.checkpoints < 1) bad("trajectory.checkpoints", "must be at least 1");
  if (c.trajectory.highlight_x &&
      !(*c.trajectory.highlight_x > g.x_min && *c.trajectory.highlight_x < g.x_max)) {
    bad("trajectory.highlight_x", "outside the grid");
  }
  if (c.trajectory.highlight_y && !two_d) bad("trajectory.highlight_y", "only for 2D runs");
  if (two_d && c.trajectory.highlight_x && !c.trajectory.highlight_y) {
    bad("trajectory.highlight_y", "required with highlight_x on a 2D grid");
  }
  for (double s : c.trajectory.ball_sigmas) {
    if (!(s > 0.0)) bad("trajectory.ball_sigmas", "must be positive");
  }
  if (!c.trajectory.ball_sigmas.empty()) {
    if (two_d) bad("trajectory.ball_sigmas", "only for 1D runs");
    if (!(c.trajectory.ball_radius > 0.0)) bad("trajectory.ball_radius", "must be positive");
    if (c.trajectory.ball_points < 2) bad("trajectory.ball_points", "need at least 2");
  }
}

std::vector<ScenarioConfig> builtin_scenarios() {
  std::vector<ScenarioConfig> out;

  {
    ScenarioConfig c;
    c.name = "classical-impulse";
    c.description = "classical object and pointer, H = g A(x) p_y";
    c.kind = ScenarioKind::ClassicalImpulse;
    c.classical.coupling = "x";
    out.push_back(c);
  }
  {
    ScenarioConfig c;
    c.name = "classical-simultaneous";
    c.description = "position and momentum read by two pointers, H = g x p_y + h p_x p_z";
    c.kind = ScenarioKind::ClassicalSimultaneous;
    c.classical.coupling = "x";
    c.classical.start.z = 0.0;
    c.classical.start.p_z = 0.0;
    out.push_back(c);
  }
  {
    ScenarioConfig c = measurement_base("position-measurement");
    c.description = "staircase coupling of a Gaussian object to a narrow pointer";
    c.sampling.conditional_n = 50000;
    c.trajectory.highlight_x = 20.0;
    c.trajectory.highlight_y = 0.0;
    out.push_back(c);
  }
  {
    ScenarioConfig c = measurement_base("fake-measurement");
    c.description = "x-independent pointer splitter followed by free evolution";
    c.grid.y_min = -25.55;
    c.grid.y_max = 25.55;
    c.interaction = {};
    c.interaction.kind = InteractionKind::Splitter;
    c.interaction.displacements = {-12.0, 0.0, 12.0};
    c.interaction.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    c.evolution.t_final = si_time(c.units, 2e-15);
    c.evolution.steps = 0;
    c.trajectory.highlight_x = 20.0;
    c.trajectory.highlight_y = 0.0;
    out.push_back(c);
  }
  {
    ScenarioConfig c = measurement_base("superposition-nonmeasurability");
    c.description = "equal superposition of packets in two staircase bins";
    c.initial.components = {{7.5, 2.0, 0.0, 0.5}, {22.5, 2.0, 0.0, 0.5}};
    c.trajectory.highlight_x = 22.5;
    c.trajectory.highlight_y = 0.0;
    out.push_back(c);
  }
  {
    ScenarioConfig c;
    c.name = "near-delta-sensitivity";
    c.description = "spread of a ball of starts in narrow free packets";
    c.grid = {4096, -255.9375, 255.9375, 0, 0.0, 0.0};
    c.initial.components = {{0.0, 0.5, 0.0, 1.0}};
    c.evolution.t_final = 20.0;
    c.sampling = {0, 7, 0};
    c.trajectory.stride = 2;
    c.trajectory.checkpoints = 1;
    c.trajectory.highlight_x = 0.1;
    c.trajectory.ball_sigmas = {2.0, 1.0, 0.5};
    out.push_back(c);
  }
  {
    ScenarioConfig c;
    c.name = "free-gaussian-equivariance";
    c.description = "free spreading of a Gaussian until its width doubles";
    c.grid = {512, -127.75, 127.75, 0, 0.0, 0.0};
    c.initial.components = {{0.0, 15.0, 0.0, 1.0}};
    c.evolution.t_final = std::sqrt(3.0) * 15.0 * 15.0;
    c.sampling = {10000, 7, 0};
    c.trajectory.stride = 2;
    c.trajectory.checkpoints = 3;
    c.trajectory.highlight_x = 10.0;
    out.push_back(c);
  }
  return out;
}

ScenarioConfig builtin_scenario(const std::string& name) {
  for (auto& c : builtin_scenarios()) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::ConfigError, "unknown scenario '" + name + "'");
}

WaveField initial_field(const ScenarioConfig& c) {
  const Grid1D gx(c.grid.nx, c.grid.x_min, c.grid.x_max);
  std::vector<cplx> v(gx.n());
  for (const auto& p : c.initial.components) {
    const WaveField part = gaussian_1d(gx, p.x0, p.sigma, p.k0);
    const double amp = std::sqrt(p.weight);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += amp * part(i);
  }
  WaveField fx = normalize(WaveField(gx, v));
  if (c.grid.ny == 0) return fx;
  const Grid1D gy(c.grid.ny, c.grid.y_min, c.grid.y_max);
  return outer_product(fx, gaussian_1d(gy, c.initial.y0, c.initial.sigma_y));
}

Hamiltonian scenario_hamiltonian(const ScenarioConfig& c, const WaveField& shape) {
  Hamiltonian h;
  h.mass_x = c.evolution.mass;
  h.mass_y = c.evolution.mass;
  if (c.interaction.kind == InteractionKind::Staircase) {
    Coupling k = staircase_coupling(shape.x_axis(), c.interaction.g, c.interaction.delta);
    k.t_on = c.interaction.t_on;
    k.t_off = c.interaction.t_off;
    k.impulsive = c.interaction.impulsive;
    h.coupling = std::move(k);
  }
  return h;
}

namespace {

struct Timing {
  double dt = 0.0;             // field step
  std::size_t traj_steps = 0;  // trajectory steps
  double traj_dt = 0.0;
};

Timing timing(const ScenarioConfig& c, const WaveField& f0, const Hamiltonian& h) {
  const std::size_t stride = c.trajectory.stride;
  std::size_t steps = c.evolution.steps;
  if (steps == 0) {
    const double dt0 = default_dt(c.evolution.method, f0, h);
    steps = static_cast<std::size_t>(std::ceil(c.evolution.t_final / dt0 - 1e-9));
  }
  steps = (steps + stride - 1) / stride * stride;
  Timing t;
  t.dt = c.evolution.t_final / static_cast<double>(steps);
  t.traj_steps = steps / stride;
  t.traj_dt = t.dt * static_cast<double>(stride);
  return t;
}

std::vector<std::size_t> checkpoint_steps(std::size_t traj_steps, std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k <= count; ++k) {
    const auto s = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(traj_steps) / static_cast<double>(count)));
    if (s > 0 && (out.empty() || s > out.back())) out.push_back(s);
  }
  return out;
}

double x_marginal_l1(const WaveField& a, const WaveField& b) {
  const auto ra = marginal_density(a, Axis::X);
  const auto rb = marginal_density(b, Axis::X);
  double s = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) s += std::abs(ra[i] - rb[i]);
  return s * a.x_axis().dx();
}

std::vector<double> selected_x(std::span<const Configuration> ens, double lo, double hi) {
  std::vector<double> out;
  for (const auto& q : ens) {
    if (*q.y >= lo && *q.y <= hi) out.push_back(q.x);
  }
  return out;
}

void equivariance_reports(ScenarioResult& r, std::span<const Configuration> ens, const WaveField& f) {
  for (auto rep : check_equivariance(ens, f)) {
    rep.test = "equivariance-ks";
    r.reports.push_back(std::move(rep));
  }
  const int dims = f.dims();
  for (int d = 0; d < dims; ++d) {
    auto rep = check_equivariance_chi2(ens, f, d == 0 ? Axis::X : Axis::Y);
    rep.test = "equivariance-chi2";
    r.reports.push_back(std::move(rep));
  }
}

// Window of width sigma_y / 4 around y; skipped when too few endpoints fall inside.
void conditional_reports(ScenarioResult& r, std::span<const Configuration> ens, const WaveField& f,
                         double y) {
  const double half = r.config.initial.sigma_y / 8.0;
  if (!(y - half > f.y_axis().x_min() && y + half < f.y_axis().x_max())) return;
  try {
    r.reports.push_back(check_conditional_probability(f, ens, y - half, y + half));
    r.reports.push_back(check_conditional_probability_chi2(f, ens, y - half, y + half));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewSelected) throw;
  }
}

void run_quantum(ScenarioResult& r) {
  const ScenarioConfig& c = r.config;
  const WaveField f0 = initial_field(c);
  const Hamiltonian h = scenario_hamiltonian(c, f0);
  const Timing tm = timing(c, f0, h);
  const bool two_d = f0.dims() == 2;
  const bool splitter = c.interaction.kind == InteractionKind::Splitter;

  WaveField start = f0;
  if (splitter) start = apply_pointer_splitter(f0, c.interaction.displacements, c.interaction.weights);

  r.snapshots.push_back(f0);

  // Ensemble: the first n members are reported; the rest only feed the conditional test.
  const std::size_t n_report = c.sampling.n;
  const std::size_t n_total = std::max(n_report, c.sampling.conditional_n);
  std::vector<Configuration> starts;
  if (n_total > 0) starts = sample_configurations({n_total, c.sampling.seed, f0});
  const bool has_highlight = c.trajectory.highlight_x.has_value();
  if (has_highlight) {
    Configuration hc{*c.trajectory.highlight_x, std::nullopt, 0.0};
    if (two_d) hc.y = *c.trajectory.highlight_y;
    starts.push_back(hc);
  }
  // Step 0 is reported against f0: the splitter acts at t = 0+.
  std::vector<Configuration> sampled;
  if (splitter) {
    sampled.assign(starts.begin(), starts.begin() + static_cast<std::ptrdiff_t>(std::min(n_report, starts.size())));
    transport_pointer(starts, f0, start);
  }

  const std::vector<std::size_t> checks = checkpoint_steps(tm.traj_steps, c.trajectory.checkpoints);
  const std::size_t out_stride = c.output.snapshot_stride;
  OnTheFlyEvolver src(start, h, c.evolution.method, tm.dt * (1.0 + 1e-9));
  Trajectory highlight;
  highlight.dt = tm.traj_dt;
  std::vector<Configuration> final_all;
  std::vector<std::size_t> ensemble_snapshot;  // index into r.snapshots per ensemble checkpoint

  const auto keep_report = [&](std::span<const Configuration> now) {
    return now.first(std::min(n_report, now.size()));
  };
  const auto observe = [&](std::size_t step, std::span<const Configuration> now) {
    if (has_highlight) highlight.samples.push_back(now.back());
    const bool is_check = std::find(checks.begin(), checks.end(), step) != checks.end();
    const bool is_out = out_stride > 0 && step > 0 && step % out_stride == 0;
    const auto kept = keep_report(now);
    if (step == 0 && n_report > 0) {
      if (splitter) {
        r.ensemble.push_back({0, now.front().t, sampled});
      } else {
        r.ensemble.push_back({0, now.front().t, {kept.begin(), kept.end()}});
      }
      ensemble_snapshot.push_back(0);
    }
    if (is_check || is_out) r.snapshots.push_back(src.field_at(now.front().t));
    if (is_check && n_report > 0) {
      r.ensemble.push_back({step, now.front().t, {kept.begin(), kept.end()}});
      ensemble_snapshot.push_back(r.snapshots.size() - 1);
    }
    if (step == tm.traj_steps) {
      final_all.assign(now.begin(), now.end() - (has_highlight ? 1 : 0));
    }
  };
  if (!starts.empty()) {
    integrate_ensemble(src, starts, tm.traj_dt, tm.traj_steps, observe);
  } else {
    for (std::size_t s : checks) r.snapshots.push_back(src.field_at(static_cast<double>(s) * tm.traj_dt));
  }
  if (has_highlight) r.highlight = std::move(highlight);

  const WaveField& final_field = r.snapshots.back();
  r.scalars["norm_drift"] = src.max_norm_drift();
  r.scalars["final_norm_error"] = std::abs(final_field.norm_squared() - 1.0);
  r.scalars["field_dt"] = tm.dt;
  r.scalars["field_steps"] = static_cast<double>(tm.traj_steps * c.trajectory.stride);
  r.scalars["trajectory_dt"] = tm.traj_dt;
  r.scalars["x_marginal_l1"] = x_marginal_l1(f0, final_field);

  for (std::size_t k = 0; k < r.ensemble.size(); ++k) {
    const auto& e = r.ensemble[k];
    equivariance_reports(r, e.configurations, r.snapshots[ensemble_snapshot[k]]);
  }

  if (!two_d) return;

  r.channels = detect_channels(final_field);
  r.scalars["channel_count"] = static_cast<double>(r.channels.size());
  for (std::size_t k = 0; k < r.channels.size(); ++k) {
    r.scalars["channel_" + std::to_string(k) + "_weight"] = r.channels[k].weight;
    r.scalars["channel_" + std::to_string(k) + "_centroid"] = r.channels[k].centroid;
  }

  const WaveField phi0 = conditional_slice(f0, c.initial.y0);
  if (has_highlight) {
    const Configuration& end = r.highlight->back();
    r.scalars["highlight_final_x"] = end.x;
    r.scalars["highlight_final_y"] = *end.y;
    r.scalars["highlight_slice_fidelity"] = fidelity(conditional_slice(final_field, *end.y), phi0);
    const auto eff = effective_exists(final_field, *end.y);
    r.scalars["highlight_effective_exists"] = eff.exists ? 1.0 : 0.0;
  }

  if (!final_all.empty()) {
    // Conditional probability: product state at t = 0 (before any splitting), then each final channel.
    if (!splitter) {
      std::vector<Configuration> zero(starts.begin(), starts.end() - (has_highlight ? 1 : 0));
      conditional_reports(r, zero, f0, c.initial.y0);
    }
    const std::span<const Configuration> reported(final_all.data(), std::min(n_report, final_all.size()));
    std::size_t unassigned = reported.size();
    double min_fid = 1.0;
    for (std::size_t k = 0; k < r.channels.size(); ++k) {
      const Channel& ch = r.channels[k];
      conditional_reports(r, final_all, final_field, ch.centroid);
      const auto in = static_cast<std::size_t>(std::count_if(
          reported.begin(), reported.end(), [&](const Configuration& q) { return ch.contains(*q.y); }));
      unassigned -= std::min(unassigned, in);
      r.scalars["channel_" + std::to_string(k) + "_frequency"] =
          static_cast<double>(in) / static_cast<double>(reported.size());
      min_fid = std::min(min_fid, fidelity(conditional_slice(final_field, ch.centroid), phi0));
      if (splitter) {
        // Pointer reading against the initial object density: no position information.
        const auto xs = selected_x(final_all, ch.y_lo, ch.y_hi);
        if (xs.size() >= kMinSelected) {
          auto rep = ks_report("conditional-vs-initial", "channel " + std::to_string(k), xs,
                               marginal_cdf(f0, Axis::X));
          rep.t = final_field.t();
          r.reports.push_back(std::move(rep));
        }
      }
    }
    r.scalars["unassigned_fraction"] = static_cast<double>(unassigned) / static_cast<double>(reported.size());
    r.scalars["min_channel_slice_fidelity"] = min_fid;
  }

  if (c.initial.components.size() > 1) {
    // Linearity: evolve each weighted component alone and compare the sum with the joint run.
    EvolutionParams p;
    p.dt = tm.dt;
    p.steps = tm.traj_steps * c.trajectory.stride;
    p.method = c.evolution.method;
    const Grid1D gx(c.grid.nx, c.grid.x_min, c.grid.x_max);
    const Grid1D gy(c.grid.ny, c.grid.y_min, c.grid.y_max);
    const WaveField phi_y = gaussian_1d(gy, c.initial.y0, c.initial.sigma_y);
    std::vector<cplx> sum(final_field.size());
    std::vector<cplx> joint0(final_field.size());
    for (const auto& comp : c.initial.components) {
      const WaveField px = gaussian_1d(gx, comp.x0, comp.sigma, comp.k0);
      WaveField part = outer_product(px, phi_y);
      for (std::size_t i = 0; i < joint0.size(); ++i) joint0[i] += std::sqrt(comp.weight) * part.values()[i];
      const auto res = evolve(part, h, p);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += std::sqrt(comp.weight) * res.final_field.values()[i];
    }
    // The joint input is the unnormalized sum; evolve() requires unit norm, so scale in and out.
    WaveField j0(f0.grid2d(), joint0);
    const double nrm = j0.norm();
    for (auto& z : j0.values()) z /= nrm;
    const auto jres = evolve(j0, h, p);
    double m = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) m = std::max(m, std::abs(jres.final_field.values()[i] * nrm - sum[i]));
    r.scalars["linearity_residual"] = m;
  }
}

void run_sensitivity(ScenarioResult& r) {
  const ScenarioConfig& c = r.config;
  const Grid1D gx(c.grid.nx, c.grid.x_min, c.grid.x_max);
  const double centre = c.trajectory.highlight_x.value_or(c.initial.components.front().x0);
  const double radius = c.trajectory.ball_radius;
  const std::size_t m = c.trajectory.ball_points;
  double drift = 0.0;
  for (double sigma : c.trajectory.ball_sigmas) {
    ScenarioConfig one = c;
    one.initial.components = {{c.initial.components.front().x0, sigma, 0.0, 1.0}};
    const WaveField f0 = initial_field(one);
    const Hamiltonian h = scenario_hamiltonian(one, f0);
    const Timing tm = timing(one, f0, h);
    std::vector<Configuration> ball;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(m - 1);
      ball.push_back({centre + radius * a, std::nullopt, 0.0});
    }
    OnTheFlyEvolver src(f0, h, c.evolution.method, tm.dt * (1.0 + 1e-9));
    const auto end = integrate_ensemble(src, ball, tm.traj_dt, tm.traj_steps);
    const auto [lo, hi] = std::minmax_element(end.begin(), end.end(),
                                              [](const auto& p, const auto& q) { return p.x < q.x; });
    r.scalars["sensitivity_factor_sigma_" + num(sigma)] = (hi->x - lo->x) / (2.0 * radius);
    drift = std::max(drift, src.max_norm_drift());
  }
  r.scalars["sensitivity_norm_drift"] = drift;
}

void run_classical(ScenarioResult& r) {
  const ScenarioConfig& c = r.config;
  const auto& k = c.classical;
  const ClassicalCoupling coupling = named_coupling(k.coupling, k.g, k.h);

  if (c.kind == ScenarioKind::ClassicalImpulse) {
    r.classical_path = integrate_hamilton(k.start, coupling, k.t_final, k.dt);
    const ClassicalState& e = r.classical_path.back();
    r.scalars["x_disturbance"] = std::abs(e.x - k.start.x);
    r.scalars["p_x_disturbance"] = std::abs(e.p_x - k.start.p_x);
    r.scalars["y_final"] = e.y;
    r.scalars["y_expected"] = k.start.y + k.g * coupling.a(k.start.x, k.start.p_x) * k.t_final;
    r.scalars["p_y_drift"] = std::abs(e.p_y - k.start.p_y);
    double e_drift = 0.0;
    const double e0 = interaction_energy(k.start, coupling);
    for (const auto& s : r.classical_path) e_drift = std::max(e_drift, std::abs(interaction_energy(s, coupling) - e0));
    r.scalars["energy_drift"] = e_drift;
    // Disturbance of whichever variable the coupling moves, against the pointer momentum.
    for (double eps : k.pointer_momenta) {
      ClassicalState s = k.start;
      s.p_y = eps;
      const ClassicalState f = integrate_hamilton(s, coupling, k.t_final, k.dt).back();
      r.scalars["disturbance_p_x_eps_" + num(eps)] = std::abs(f.p_x - s.p_x);
      r.scalars["disturbance_x_eps_" + num(eps)] = std::abs(f.x - s.x);
    }
    return;
  }

  ClassicalState s0 = k.start;
  if (!s0.z) s0.z = 0.0;
  if (!s0.p_z) s0.p_z = 0.0;
  const Inference inf = simultaneous_measurement(s0, k.g, k.h, k.t_final, k.dt);
  r.classical_path = integrate_hamilton(s0, coupling, k.t_final, k.dt);
  r.scalars["inferred_x0"] = inf.x0;
  r.scalars["inferred_p_x0"] = inf.p_x0;

  std::mt19937_64 rng(c.sampling.seed);
  const auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < k.random_cases; ++i) {
    ClassicalState s{uniform(-5.0, 5.0), uniform(-5.0, 5.0), uniform(-5.0, 5.0), 0.0, std::nullopt, std::nullopt};
    s.z = uniform(-5.0, 5.0);
    s.p_z = 0.0;
    const Inference q = simultaneous_measurement(s, k.g, k.h, k.t_final, k.dt);
    worst = std::max(worst, std::abs(q.x0 - s.x) / std::max(1.0, std::abs(s.x)));
    worst = std::max(worst, std::abs(q.p_x0 - s.p_x) / std::max(1.0, std::abs(s.p_x)));
  }
  r.scalars["random_cases"] = static_cast<double>(k.random_cases);
  r.scalars["max_relative_inference_error"] = worst;
  for (double eps : k.pointer_momenta) {
    ClassicalState s = s0;
    s.p_y = eps;
    s.p_z = eps;
    const Inference q = simultaneous_measurement(s, k.g, k.h, k.t_final, k.dt);
    r.scalars["inference_error_x_eps_" + num(eps)] = std::abs(q.x0 - s.x);
    r.scalars["inference_error_p_x_eps_" + num(eps)] = std::abs(q.p_x0 - s.p_x);
  }
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioResult r;
  r.config = cfg;
  try {
    if (cfg.kind != ScenarioKind::Quantum) {
      run_classical(r);
    } else if (!cfg.trajectory.ball_sigmas.empty()) {
      run_sensitivity(r);
      ScenarioConfig main = cfg;
      main.trajectory.ball_sigmas.clear();
      ScenarioResult base;
      base.config = main;
      run_quantum(base);
      r.snapshots = std::move(base.snapshots);
      r.highlight = std::move(base.highlight);
      r.ensemble = std::move(base.ensemble);
      r.reports = std::move(base.reports);
      r.scalars.insert(base.scalars.begin(), base.scalars.end());
    } else {
      run_quantum(r);
    }
  } catch (const Error& e) {
    throw Error(e.code(), "scenario '" + cfg.name + "': " + e.detail());
  }
  return r;
}

}  // namespace pilotwave
