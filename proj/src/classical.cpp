#include "pilotwave/classical.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "pilotwave/error.hpp"

namespace pilotwave {

ClassicalCoupling named_coupling(const std::string& name, double g, double h) {
  ClassicalCoupling c;
  c.g = g;
  c.h = h;
  c.label = name;
  if (name == "x") {
    c.a = [](double x, double) { return x; };
    c.da_dx = [](double, double) { return 1.0; };
    c.da_dp = [](double, double) { return 0.0; };
  } else if (name == "x^2") {
    c.a = [](double x, double) { return x * x; };
    c.da_dx = [](double x, double) { return 2.0 * x; };
    c.da_dp = [](double, double) { return 0.0; };
  } else if (name == "p_x") {
    c.a = [](double, double p) { return p; };
    c.da_dx = [](double, double) { return 0.0; };
    c.da_dp = [](double, double) { return 1.0; };
  } else if (name == "x+p_x") {
    c.a = [](double x, double p) { return x + p; };
    c.da_dx = [](double, double) { return 1.0; };
    c.da_dp = [](double, double) { return 1.0; };
  } else if (name == "x*p_x") {
    c.a = [](double x, double p) { return x * p; };
    c.da_dx = [](double, double p) { return p; };
    c.da_dp = [](double x, double) { return x; };
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown coupling function '" + name + "'");
  }
  return c;
}

double partials_deviation(const ClassicalCoupling& c, std::span<const std::pair<double, double>> points) {
  double worst = 0.0;
  for (const auto& [x, p] : points) {
    const double hx = 1e-5 * std::max(1.0, std::abs(x));
    const double hp = 1e-5 * std::max(1.0, std::abs(p));
    const double fx = (c.a(x + hx, p) - c.a(x - hx, p)) / (2.0 * hx);
    const double fp = (c.a(x, p + hp) - c.a(x, p - hp)) / (2.0 * hp);
    const double sx = c.da_dx(x, p);
    const double sp = c.da_dp(x, p);
    worst = std::max(worst, std::abs(fx - sx) / std::max(1.0, std::abs(sx)));
    worst = std::max(worst, std::abs(fp - sp) / std::max(1.0, std::abs(sp)));
  }
  return worst;
}

double interaction_energy(const ClassicalState& s, const ClassicalCoupling& c) {
  double e = c.g * c.a(s.x, s.p_x) * s.p_y;
  if (s.has_second_pointer()) e += c.h * s.p_x * s.p_z.value_or(0.0);
  return e;
}

namespace {

using Vec = std::array<double, 6>;  // x, p_x, y, p_y, z, p_z

Vec rhs(const Vec& s, const ClassicalCoupling& c, bool second) {
  const double x = s[0], p = s[1], py = s[3], pz = second ? s[5] : 0.0;
  Vec d{};
  d[0] = c.g * c.da_dp(x, p) * py + (second ? c.h * pz : 0.0);
  d[1] = -c.g * c.da_dx(x, p) * py;
  d[2] = c.g * c.a(x, p);
  d[3] = 0.0;
  d[4] = second ? c.h * p : 0.0;
  d[5] = 0.0;
  return d;
}

Vec axpy(const Vec& s, double h, const Vec& k) {
  Vec o;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = s[i] + h * k[i];
  return o;
}

}  // namespace

std::vector<ClassicalState> integrate_hamilton(const ClassicalState& state0,
                                               const ClassicalCoupling& coupling, double t_f,
                                               double dt) {
  if (!(dt > 0.0) || !(t_f >= dt)) {
    throw Error(ErrorCode::InvalidArgument, "need dt > 0 and t_f >= dt");
  }
  const bool second = state0.has_second_pointer();
  Vec s{state0.x, state0.p_x, state0.y, state0.p_y, state0.z.value_or(0.0), state0.p_z.value_or(0.0)};
  const auto steps = static_cast<std::size_t>(std::ceil(t_f / dt * (1.0 - 1e-12)));

  const auto to_state = [&](const Vec& v, double t) {
    ClassicalState o{v[0], v[1], v[2], v[3], std::nullopt, std::nullopt, t};
    if (second) {
      o.z = v[4];
      o.p_z = v[5];
    }
    return o;
  };

  std::vector<ClassicalState> out;
  out.reserve(steps + 1);
  out.push_back(to_state(s, state0.t));
  for (std::size_t k = 0; k < steps; ++k) {
    const double t0 = state0.t + static_cast<double>(k) * dt;
    const double t1 = k + 1 == steps ? state0.t + t_f : t0 + dt;
    const double h = t1 - t0;
    const Vec k1 = rhs(s, coupling, second);
    const Vec k2 = rhs(axpy(s, 0.5 * h, k1), coupling, second);
    const Vec k3 = rhs(axpy(s, 0.5 * h, k2), coupling, second);
    const Vec k4 = rhs(axpy(s, h, k3), coupling, second);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if (!std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); })) {
      throw Error(ErrorCode::NonFinite, "classical state diverged at t=" + std::to_string(t1));
    }
    out.push_back(to_state(s, t1));
  }
  return out;
}

Inference simultaneous_measurement(ClassicalState state0, double g, double h, double t_f, double dt) {
  if (g * t_f == 0.0 || h * t_f == 0.0) {
    throw Error(ErrorCode::ZeroDuration, "pointer readings need g t_f and h t_f to be nonzero");
  }
  if (!state0.z) state0.z = 0.0;
  if (!state0.p_z) state0.p_z = 0.0;
  const ClassicalCoupling c = named_coupling("x", g, h);
  const auto path = integrate_hamilton(state0, c, t_f, dt);
  Inference inf;
  inf.final_state = path.back();
  inf.x0 = (inf.final_state.y - state0.y) / (g * t_f);
  inf.p_x0 = (*inf.final_state.z - *state0.z) / (h * t_f);
  return inf;
}

}  // namespace pilotwave
