#pragma once

// Classical impulsive measurement: an object (x, p_x) coupled to one pointer
// (y, p_y) through H = g A(x, p_x) p_y, optionally to a second pointer
// (z, p_z) through h p_x p_z.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pilotwave {

struct ClassicalState {
  double x = 0.0;
  double p_x = 0.0;
  double y = 0.0;
  double p_y = 0.0;
  std::optional<double> z;
  std::optional<double> p_z;
  double t = 0.0;

  bool has_second_pointer() const { return z.has_value(); }
};

struct ClassicalCoupling {
  double g = 1.0;
  double h = 0.0;
  std::string label;
  std::function<double(double, double)> a;      // A(x, p_x)
  std::function<double(double, double)> da_dx;
  std::function<double(double, double)> da_dp;
};

/// Couplings by name: "x", "x^2", "p_x", "x+p_x", "x*p_x". Throws InvalidArgument otherwise.
ClassicalCoupling named_coupling(const std::string& name, double g, double h = 0.0);

/// Compares the supplied partials with central differences of A at each point
/// (pairs of x, p_x). Returns the largest relative deviation.
double partials_deviation(const ClassicalCoupling& c, std::span<const std::pair<double, double>> points);

/// Value of the interaction Hamiltonian.
double interaction_energy(const ClassicalState& s, const ClassicalCoupling& c);

/// Classical RK4 on Hamilton's equations from state0.t to state0.t + t_f. The
/// last step is shortened if dt does not divide t_f. Throws InvalidArgument
/// unless dt > 0 and t_f >= dt, NonFinite if the state blows up.
std::vector<ClassicalState> integrate_hamilton(const ClassicalState& state0,
                                               const ClassicalCoupling& coupling, double t_f,
                                               double dt);

struct Inference {
  double x0 = 0.0;
  double p_x0 = 0.0;
  ClassicalState final_state;
};

/// Runs H = g x p_y + h p_x p_z and reads X(0), P_x(0) off the pointer
/// displacements: X(0) = dY / (g t_f), P_x(0) = dZ / (h t_f).
/// Throws ZeroDuration if g t_f or h t_f vanishes.
Inference simultaneous_measurement(ClassicalState state0, double g, double h, double t_f, double dt);

}  // namespace pilotwave
