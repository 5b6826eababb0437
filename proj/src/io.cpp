#include "pilotwave/io.hpp"

#include <fftw3.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

namespace pilotwave {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Shortest decimal form that reads back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing "  # note" or "  ; note".
std::string value_of(std::string_view raw) {
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if ((raw[i] == '#' || raw[i] == ';') && (raw[i - 1] == ' ' || raw[i - 1] == '\t')) {
      raw = raw.substr(0, i);
      break;
    }
  }
  return trim(raw);
}

std::optional<double> to_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + p.string());
  out << s;
  if (!out) throw Error(ErrorCode::InvalidArgument, "write failed for " + p.string());
}

// ---------------------------------------------------------------- units

struct UnitEntry {
  const char* name;
  Dimension dim;
  double si;  // SI value of one unit
};

constexpr UnitEntry kUnits[] = {
    {"m", Dimension::Length, 1.0},       {"mm", Dimension::Length, 1e-3},
    {"um", Dimension::Length, 1e-6},     {"nm", Dimension::Length, 1e-9},
    {"pm", Dimension::Length, 1e-12},    {"s", Dimension::Time, 1.0},
    {"ms", Dimension::Time, 1e-3},       {"us", Dimension::Time, 1e-6},
    {"ns", Dimension::Time, 1e-9},       {"ps", Dimension::Time, 1e-12},
    {"fs", Dimension::Time, 1e-15},      {"as", Dimension::Time, 1e-18},
    {"m/s", Dimension::Velocity, 1.0},   {"km/s", Dimension::Velocity, 1e3},
    {"nm/fs", Dimension::Velocity, 1e6}, {"kg", Dimension::Mass, 1.0},
    {"kg*m/s", Dimension::Momentum, 1.0}, {"kg m/s", Dimension::Momentum, 1.0},
};

}  // namespace

double parse_quantity(std::string_view text, Dimension expected, const UnitSystem& units) {
  std::string s = trim(text);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = trim(s.substr(1, s.size() - 2));
  // The number ends at the first space, or where a unit letter follows a digit.
  std::size_t cut = s.find(' ');
  if (cut == std::string::npos) {
    cut = s.size();
    for (std::size_t i = 1; i < s.size(); ++i) {
      const char c = s[i];
      const char p = s[i - 1];
      const bool exp_mark = (c == 'e' || c == 'E') && std::isdigit(static_cast<unsigned char>(p)) &&
                            i + 1 < s.size() &&
                            (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '-' || s[i + 1] == '+');
      if (std::isalpha(static_cast<unsigned char>(c)) && !exp_mark) {
        cut = i;
        break;
      }
    }
  }
  const auto v = to_double(trim(s.substr(0, cut)));
  if (!v) throw Error(ErrorCode::ConfigError, "'" + s + "' is not a number with a unit");
  const std::string unit = trim(cut < s.size() ? s.substr(cut) : std::string());
  if (unit.empty()) {
    throw Error(ErrorCode::ConfigError,
                "'" + s + "' needs a unit (" + std::string(to_string(expected)) + ")");
  }
  for (const auto& u : kUnits) {
    if (unit == u.name) {
      if (u.dim != expected) {
        throw Error(ErrorCode::ConfigError, "unit '" + unit + "' is a " + std::string(to_string(u.dim)) +
                                                ", expected a " + std::string(to_string(expected)));
      }
      return convert_si_to_scaled(units, *v * u.si, expected);
    }
  }
  throw Error(ErrorCode::ConfigError, "unknown unit '" + unit + "'");
}

namespace {

std::string quantity(double scaled, Dimension d, const UnitSystem& u) {
  const double si = convert_scaled_to_si(u, scaled, d);
  switch (d) {
    case Dimension::Length:
      return fmt(si / 1e-9) + " nm";
    case Dimension::Time:
      return fmt(si) + " s";
    case Dimension::Velocity:
      return fmt(si) + " m/s";
    case Dimension::Momentum:
      return fmt(si) + " kg*m/s";
    case Dimension::Mass:
      return fmt(si) + " kg";
  }
  return fmt(si);
}

// One INI section with bookkeeping of the keys that were read.
class Section {
 public:
  Section(std::string name, const boost::property_tree::ptree* node) : name_(std::move(name)), node_(node) {}

  std::optional<std::string> raw(const std::string& key) {
    if (!node_) return std::nullopt;
    const auto it = node_->find(key);
    if (it == node_->not_found()) return std::nullopt;
    used_.insert(key);
    std::string v = value_of(it->second.data());
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = trim(v.substr(1, v.size() - 2));
    return v;
  }

  template <class F>
  auto wrap(const std::string& key, F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, where(key) + ": " + e.detail());
    }
  }

  void quantity(const std::string& key, Dimension d, const UnitSystem& u, double& out) {
    if (auto v = raw(key)) out = wrap(key, [&] { return parse_quantity(*v, d, u); });
  }

  void optional_quantity(const std::string& key, Dimension d, const UnitSystem& u, std::optional<double>& out) {
    if (auto v = raw(key)) out = wrap(key, [&] { return parse_quantity(*v, d, u); });
  }

  void number(const std::string& key, double& out) {
    if (auto v = raw(key)) {
      const auto d = to_double(*v);
      if (!d) throw Error(ErrorCode::ConfigError, where(key) + ": '" + *v + "' is not a number");
      out = *d;
    }
  }

  template <class T>
  void count(const std::string& key, T& out) {
    if (auto v = raw(key)) {
      const auto d = to_uint(*v);
      if (!d) throw Error(ErrorCode::ConfigError, where(key) + ": '" + *v + "' is not a non-negative integer");
      out = static_cast<T>(*d);
    }
  }

  std::vector<std::string> list(const std::string& key) {
    std::vector<std::string> out;
    const auto v = raw(key);
    if (!v) return out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
  }

  bool has(const std::string& key) const { return node_ && node_->find(key) != node_->not_found(); }

  std::string where(const std::string& key) const { return name_ + "." + key; }

  void reject_unused() const {
    if (!node_) return;
    for (const auto& [k, v] : *node_) {
      if (!used_.count(k)) throw Error(ErrorCode::ConfigError, "unknown key " + where(k));
    }
  }

 private:
  std::string name_;
  const boost::property_tree::ptree* node_;
  std::set<std::string> used_;
};

const char* kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Quantum:
      return "quantum";
    case ScenarioKind::ClassicalImpulse:
      return "classical-impulse";
    case ScenarioKind::ClassicalSimultaneous:
      return "classical-simultaneous";
  }
  return "quantum";
}

const char* interaction_name(InteractionKind k) {
  switch (k) {
    case InteractionKind::None:
      return "none";
    case InteractionKind::Staircase:
      return "staircase";
    case InteractionKind::Splitter:
      return "splitter";
  }
  return "none";
}

void parse_quantum(ScenarioConfig& c, std::map<std::string, Section>& sec) {
  const UnitSystem& u = c.units;
  auto& g = sec.at("grid");
  g.count("nx", c.grid.nx);
  g.quantity("x_min", Dimension::Length, u, c.grid.x_min);
  g.quantity("x_max", Dimension::Length, u, c.grid.x_max);
  g.count("ny", c.grid.ny);
  g.quantity("y_min", Dimension::Length, u, c.grid.y_min);
  g.quantity("y_max", Dimension::Length, u, c.grid.y_max);

  auto& in = sec.at("initial");
  const auto packet = [&](const std::string& prefix, PacketSpec& p) {
    in.quantity(prefix + "x0", Dimension::Length, u, p.x0);
    in.quantity(prefix + "sigma_x", Dimension::Length, u, p.sigma);
    double p0 = p.k0;  // hbar = 1: scaled momentum equals the wave number
    in.quantity(prefix + "p0", Dimension::Momentum, u, p0);
    p.k0 = p0;
    in.number(prefix + "weight", p.weight);
  };
  if (in.has("components")) {
    std::size_t n = 0;
    in.count("components", n);
    if (n < 1 || n > 64) throw Error(ErrorCode::ConfigError, "initial.components: must be between 1 and 64");
    std::vector<PacketSpec> comps(n);
    for (std::size_t i = 0; i < n; ++i) {
      comps[i].weight = 1.0 / static_cast<double>(n);
      if (i < c.initial.components.size()) comps[i] = c.initial.components[i];
      packet("c" + std::to_string(i + 1) + "_", comps[i]);
    }
    c.initial.components = std::move(comps);
  } else {
    if (c.initial.components.size() != 1) c.initial.components.resize(1);
    packet("", c.initial.components[0]);
  }
  in.quantity("y0", Dimension::Length, u, c.initial.y0);
  in.quantity("sigma_y", Dimension::Length, u, c.initial.sigma_y);
  if (auto m = in.raw("mass")) {
    c.evolution.mass = in.wrap("mass", [&] { return parse_quantity(*m, Dimension::Mass, u); });
  }

  auto& ia = sec.at("interaction");
  if (auto k = ia.raw("kind")) {
    if (*k == "none") {
      c.interaction.kind = InteractionKind::None;
    } else if (*k == "staircase") {
      c.interaction.kind = InteractionKind::Staircase;
    } else if (*k == "splitter") {
      c.interaction.kind = InteractionKind::Splitter;
    } else {
      throw Error(ErrorCode::ConfigError, "interaction.kind: '" + *k + "' is not none, staircase or splitter");
    }
  }
  ia.quantity("g", Dimension::Velocity, u, c.interaction.g);
  ia.quantity("delta", Dimension::Length, u, c.interaction.delta);
  ia.quantity("t_on", Dimension::Time, u, c.interaction.t_on);
  ia.quantity("t_off", Dimension::Time, u, c.interaction.t_off);
  if (auto m = ia.raw("mode")) {
    if (*m == "impulsive") {
      c.interaction.impulsive = true;
    } else if (*m == "full") {
      c.interaction.impulsive = false;
    } else {
      throw Error(ErrorCode::ConfigError, "interaction.mode: '" + *m + "' is not impulsive or full");
    }
  }
  if (ia.has("displacements")) {
    c.interaction.displacements.clear();
    for (const auto& d : ia.list("displacements")) {
      c.interaction.displacements.push_back(
          ia.wrap("displacements", [&] { return parse_quantity(d, Dimension::Length, u); }));
    }
  }
  if (ia.has("weights")) {
    c.interaction.weights.clear();
    for (const auto& w : ia.list("weights")) {
      const auto v = to_double(w);
      if (!v) throw Error(ErrorCode::ConfigError, "interaction.weights: '" + w + "' is not a number");
      c.interaction.weights.push_back(*v);
    }
  }

  auto& tr = sec.at("trajectory");
  tr.quantity("t_final", Dimension::Time, u, c.evolution.t_final);
  tr.count("steps", c.evolution.steps);
  tr.count("stride", c.trajectory.stride);
  if (auto m = tr.raw("method")) {
    if (*m == "split-operator") {
      c.evolution.method = Method::SplitOperator;
    } else if (*m == "crank-nicolson") {
      c.evolution.method = Method::CrankNicolson;
    } else {
      throw Error(ErrorCode::ConfigError, "trajectory.method: '" + *m + "' is not split-operator or crank-nicolson");
    }
  }
  tr.optional_quantity("highlight_x", Dimension::Length, u, c.trajectory.highlight_x);
  tr.optional_quantity("highlight_y", Dimension::Length, u, c.trajectory.highlight_y);
  tr.count("checkpoints", c.trajectory.checkpoints);
  if (tr.has("ball_sigmas")) {
    c.trajectory.ball_sigmas.clear();
    for (const auto& s : tr.list("ball_sigmas")) {
      c.trajectory.ball_sigmas.push_back(tr.wrap("ball_sigmas", [&] { return parse_quantity(s, Dimension::Length, u); }));
    }
  }
  tr.quantity("ball_radius", Dimension::Length, u, c.trajectory.ball_radius);
  tr.count("ball_points", c.trajectory.ball_points);

  auto& sa = sec.at("sampling");
  sa.count("conditional_n", c.sampling.conditional_n);
}

// Classical scenarios are stated in the model's own dimensionless units.
void parse_classical(ScenarioConfig& c, std::map<std::string, Section>& sec) {
  auto& k = c.classical;
  auto& in = sec.at("initial");
  in.number("x0", k.start.x);
  in.number("p_x0", k.start.p_x);
  in.number("y0", k.start.y);
  in.number("p_y0", k.start.p_y);
  if (in.has("z0")) {
    double z = 0.0;
    in.number("z0", z);
    k.start.z = z;
  }
  if (in.has("p_z0")) {
    double pz = 0.0;
    in.number("p_z0", pz);
    k.start.p_z = pz;
  }
  auto& ia = sec.at("interaction");
  if (auto s = ia.raw("coupling")) k.coupling = *s;
  ia.number("g", k.g);
  ia.number("h", k.h);
  auto& tr = sec.at("trajectory");
  tr.number("t_final", k.t_final);
  tr.number("dt", k.dt);
  tr.count("random_cases", k.random_cases);
  if (tr.has("pointer_momenta")) {
    k.pointer_momenta.clear();
    for (const auto& s : tr.list("pointer_momenta")) {
      const auto v = to_double(s);
      if (!v) throw Error(ErrorCode::ConfigError, "trajectory.pointer_momenta: '" + s + "' is not a number");
      k.pointer_momenta.push_back(*v);
    }
  }
}

}  // namespace

ScenarioConfig parse_config(std::string_view text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is{std::string(text)};
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  static const std::vector<std::string> kSections{"grid", "initial", "interaction", "sampling", "trajectory", "output"};
  std::map<std::string, std::string> top;
  std::map<std::string, Section> sec;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      if (key != "name" && key != "description" && key != "kind" && key != "base") {
        throw Error(ErrorCode::ConfigError, origin + ": unknown top-level key '" + key + "'");
      }
      std::string v = value_of(node.data());
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
      top[key] = v;
    } else if (std::find(kSections.begin(), kSections.end(), key) == kSections.end()) {
      throw Error(ErrorCode::ConfigError, origin + ": unknown section [" + key + "]");
    } else {
      sec.emplace(key, Section(key, &node));
    }
  }
  for (const auto& s : kSections) sec.emplace(s, Section(s, nullptr));

  try {
    ScenarioConfig c;
    if (top.count("base")) c = builtin_scenario(top["base"]);
    if (top.count("name")) c.name = top["name"];
    if (top.count("description")) c.description = top["description"];
    if (top.count("kind")) {
      const std::string& k = top["kind"];
      if (k == "quantum") {
        c.kind = ScenarioKind::Quantum;
      } else if (k == "classical-impulse") {
        c.kind = ScenarioKind::ClassicalImpulse;
      } else if (k == "classical-simultaneous") {
        c.kind = ScenarioKind::ClassicalSimultaneous;
      } else {
        throw Error(ErrorCode::ConfigError, "kind: '" + k + "' is not a scenario kind");
      }
    }
    if (c.kind == ScenarioKind::Quantum) {
      parse_quantum(c, sec);
    } else {
      parse_classical(c, sec);
    }
    auto& sa = sec.at("sampling");
    sa.count("n", c.sampling.n);
    sa.count("seed", c.sampling.seed);
    sec.at("output").count("snapshot_stride", c.output.snapshot_stride);
    for (const auto& [name, s] : sec) s.reject_unused();
    validate(c);
    return c;
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, origin + ": " + e.detail());
  }
}

ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.filename().string());
}

std::string format_config(const ScenarioConfig& c) {
  const UnitSystem& u = c.units;
  std::ostringstream o;
  o << "name = " << c.name << "\n";
  if (!c.description.empty()) o << "description = " << c.description << "\n";
  o << "kind = " << kind_name(c.kind) << "\n";

  if (c.kind != ScenarioKind::Quantum) {
    const auto& k = c.classical;
    o << "\n[initial]\n";
    o << "x0 = " << fmt(k.start.x) << "\np_x0 = " << fmt(k.start.p_x) << "\n";
    o << "y0 = " << fmt(k.start.y) << "\np_y0 = " << fmt(k.start.p_y) << "\n";
    if (k.start.z) o << "z0 = " << fmt(*k.start.z) << "\n";
    if (k.start.p_z) o << "p_z0 = " << fmt(*k.start.p_z) << "\n";
    o << "\n[interaction]\ncoupling = " << k.coupling << "\ng = " << fmt(k.g) << "\nh = " << fmt(k.h) << "\n";
    o << "\n[sampling]\nseed = " << c.sampling.seed << "\n";
    o << "\n[trajectory]\nt_final = " << fmt(k.t_final) << "\ndt = " << fmt(k.dt) << "\n";
    o << "random_cases = " << k.random_cases << "\npointer_momenta = ";
    for (std::size_t i = 0; i < k.pointer_momenta.size(); ++i) o << (i ? ", " : "") << fmt(k.pointer_momenta[i]);
    o << "\n";
    return o.str();
  }

  const auto L = [&](double v) { return quantity(v, Dimension::Length, u); };
  o << "\n[grid]\n";
  o << "nx = " << c.grid.nx << "\nx_min = " << L(c.grid.x_min) << "\nx_max = " << L(c.grid.x_max) << "\n";
  if (c.grid.ny > 0) {
    o << "ny = " << c.grid.ny << "\ny_min = " << L(c.grid.y_min) << "\ny_max = " << L(c.grid.y_max) << "\n";
  }

  o << "\n[initial]\n";
  const auto packet = [&](const std::string& prefix, const PacketSpec& p) {
    o << prefix << "x0 = " << L(p.x0) << "\n" << prefix << "sigma_x = " << L(p.sigma) << "\n";
    if (p.k0 != 0.0) o << prefix << "p0 = " << quantity(p.k0, Dimension::Momentum, u) << "\n";
    o << prefix << "weight = " << fmt(p.weight) << "\n";
  };
  if (c.initial.components.size() == 1) {
    packet("", c.initial.components[0]);
  } else {
    o << "components = " << c.initial.components.size() << "\n";
    for (std::size_t i = 0; i < c.initial.components.size(); ++i) {
      packet("c" + std::to_string(i + 1) + "_", c.initial.components[i]);
    }
  }
  if (c.grid.ny > 0) o << "y0 = " << L(c.initial.y0) << "\nsigma_y = " << L(c.initial.sigma_y) << "\n";
  o << "mass = " << quantity(c.evolution.mass, Dimension::Mass, u) << "\n";

  o << "\n[interaction]\nkind = " << interaction_name(c.interaction.kind) << "\n";
  if (c.interaction.kind == InteractionKind::Staircase) {
    o << "g = " << quantity(c.interaction.g, Dimension::Velocity, u) << "\n";
    o << "delta = " << L(c.interaction.delta) << "\n";
    o << "t_on = " << quantity(c.interaction.t_on, Dimension::Time, u) << "\n";
    o << "t_off = " << quantity(c.interaction.t_off, Dimension::Time, u) << "\n";
    o << "mode = " << (c.interaction.impulsive ? "impulsive" : "full") << "\n";
  }
  if (c.interaction.kind == InteractionKind::Splitter) {
    o << "displacements = ";
    for (std::size_t i = 0; i < c.interaction.displacements.size(); ++i) {
      o << (i ? ", " : "") << L(c.interaction.displacements[i]);
    }
    o << "\nweights = ";
    for (std::size_t i = 0; i < c.interaction.weights.size(); ++i) o << (i ? ", " : "") << fmt(c.interaction.weights[i]);
    o << "\n";
  }

  o << "\n[sampling]\nn = " << c.sampling.n << "\nseed = " << c.sampling.seed << "\n";
  if (c.sampling.conditional_n > 0) o << "conditional_n = " << c.sampling.conditional_n << "\n";

  o << "\n[trajectory]\n";
  o << "t_final = " << quantity(c.evolution.t_final, Dimension::Time, u) << "\n";
  if (c.evolution.steps > 0) o << "steps = " << c.evolution.steps << "\n";
  o << "stride = " << c.trajectory.stride << "\n";
  o << "method = " << (c.evolution.method == Method::SplitOperator ? "split-operator" : "crank-nicolson") << "\n";
  if (c.trajectory.highlight_x) o << "highlight_x = " << L(*c.trajectory.highlight_x) << "\n";
  if (c.trajectory.highlight_y) o << "highlight_y = " << L(*c.trajectory.highlight_y) << "\n";
  o << "checkpoints = " << c.trajectory.checkpoints << "\n";
  if (!c.trajectory.ball_sigmas.empty()) {
    o << "ball_sigmas = ";
    for (std::size_t i = 0; i < c.trajectory.ball_sigmas.size(); ++i) o << (i ? ", " : "") << L(c.trajectory.ball_sigmas[i]);
    o << "\nball_radius = " << L(c.trajectory.ball_radius) << "\nball_points = " << c.trajectory.ball_points << "\n";
  }

  o << "\n[output]\nsnapshot_stride = " << c.output.snapshot_stride << "\n";
  return o.str();
}

// ---------------------------------------------------------------- field dump

namespace {

constexpr const char* kFieldFormat = "pilotwave-field";

json units_json(const UnitSystem& u) {
  return json{{"length_unit_m", u.length_unit}, {"mass_kg", u.mass}, {"hbar_Js", u.hbar}, {"time_unit_s", u.time_unit()}};
}

void put_le(char* dst, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) dst[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
}

double get_le(const unsigned char* src) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(src[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::vector<fs::path> write_field_dump(const WaveField& f, const fs::path& stem, const UnitSystem& units) {
  fs::path header = stem;
  header += ".json";
  fs::path payload = stem;
  payload += ".bin";
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());

  const auto vals = f.values();
  std::string bytes(vals.size() * 16, '\0');
  for (std::size_t i = 0; i < vals.size(); ++i) {
    put_le(&bytes[16 * i], vals[i].real());
    put_le(&bytes[16 * i + 8], vals[i].imag());
  }
  write_text(payload, bytes);

  json h;
  h["format"] = kFieldFormat;
  h["version"] = 1;
  h["dims"] = f.dims();
  h["nx"] = f.nx();
  h["ny"] = f.dims() == 2 ? f.ny() : 0;
  h["x_min"] = f.x_axis().x_min();
  h["x_max"] = f.x_axis().x_max();
  h["y_min"] = f.dims() == 2 ? f.y_axis().x_min() : 0.0;
  h["y_max"] = f.dims() == 2 ? f.y_axis().x_max() : 0.0;
  h["t"] = f.t();
  h["t_s"] = convert_scaled_to_si(units, f.t(), Dimension::Time);
  h["units"] = units_json(units);
  h["layout"] = "x-major, y fastest";
  h["value_type"] = "float64 pairs (re, im), little-endian";
  h["payload"] = payload.filename().string();
  h["payload_bytes"] = bytes.size();
  write_text(header, h.dump(2) + "\n");
  return {header, payload};
}

FieldHeader read_field_header(const fs::path& header_path) {
  const std::string text = read_text(header_path);
  FieldHeader h;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kFieldFormat) {
      throw Error(ErrorCode::CorruptHeader, "not a field header");
    }
    if (j.at("version").get<int>() != 1) throw Error(ErrorCode::CorruptHeader, "unsupported version");
    const int dims = j.at("dims").get<int>();
    h.nx = j.at("nx").get<std::size_t>();
    h.ny = j.at("ny").get<std::size_t>();
    if (!((dims == 1 && h.ny == 0) || (dims == 2 && h.ny > 0))) {
      throw Error(ErrorCode::CorruptHeader, "dims and ny disagree");
    }
    h.x_min = j.at("x_min").get<double>();
    h.x_max = j.at("x_max").get<double>();
    h.y_min = j.at("y_min").get<double>();
    h.y_max = j.at("y_max").get<double>();
    h.t = j.at("t").get<double>();
    const auto& u = j.at("units");
    h.units.length_unit = u.at("length_unit_m").get<double>();
    h.units.mass = u.at("mass_kg").get<double>();
    h.units.hbar = u.at("hbar_Js").get<double>();
    h.payload = j.at("payload").get<std::string>();
    const std::size_t expected = 16 * h.nx * std::max<std::size_t>(h.ny, 1);
    if (j.at("payload_bytes").get<std::size_t>() != expected) {
      throw Error(ErrorCode::CorruptHeader, "payload_bytes does not match the grid");
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptHeader, header_path.filename().string() + ": " + e.what());
  }
  return h;
}

WaveField read_field_dump(const fs::path& header_path) {
  const FieldHeader h = read_field_header(header_path);
  const fs::path payload = header_path.parent_path() / h.payload;
  const std::string bytes = read_text(payload);
  const std::size_t count = h.nx * std::max<std::size_t>(h.ny, 1);
  if (bytes.size() < 16 * count) {
    throw Error(ErrorCode::TruncatedPayload, payload.filename().string() + ": " + std::to_string(bytes.size()) +
                                                 " bytes, header promises " + std::to_string(16 * count));
  }
  if (bytes.size() > 16 * count) {
    throw Error(ErrorCode::CorruptHeader, payload.filename().string() + " is longer than the header's grid");
  }
  std::vector<cplx> v(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < count; ++i) v[i] = cplx(get_le(p + 16 * i), get_le(p + 16 * i + 8));
  try {
    const Grid1D gx(h.nx, h.x_min, h.x_max);
    if (h.ny == 0) return WaveField(gx, std::move(v), h.t);
    return WaveField(Grid2D{gx, Grid1D(h.ny, h.y_min, h.y_max)}, std::move(v), h.t);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptHeader, header_path.filename().string() + ": " + e.detail());
  }
}

// ---------------------------------------------------------------- tables

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

constexpr const char* kTraj1D = "step,t[s],X[m]";
constexpr const char* kTraj2D = "step,t[s],X[m],Y[m]";
constexpr const char* kEnsemble = "step,t[s],member,X[m],Y[m]";

double need_double(const std::string& s, const std::string& what) {
  const auto v = to_double(s);
  if (!v) throw Error(ErrorCode::CorruptHeader, what + ": '" + s + "' is not a number");
  return *v;
}

std::size_t need_uint(const std::string& s, const std::string& what) {
  const auto v = to_uint(s);
  if (!v) throw Error(ErrorCode::CorruptHeader, what + ": '" + s + "' is not an index");
  return static_cast<std::size_t>(*v);
}

}  // namespace

TrajectoryTable to_table(const Trajectory& tr, const UnitSystem& u) {
  TrajectoryTable t;
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const auto& s = tr.samples[i];
    TrajectoryRow r;
    r.step = i;
    r.t = convert_scaled_to_si(u, s.t, Dimension::Time);
    r.x = convert_scaled_to_si(u, s.x, Dimension::Length);
    if (s.y) r.y = convert_scaled_to_si(u, *s.y, Dimension::Length);
    t.rows.push_back(r);
  }
  return t;
}

Trajectory from_table(const TrajectoryTable& table, const UnitSystem& u) {
  Trajectory tr;
  for (const auto& r : table.rows) {
    Configuration c;
    c.t = convert_si_to_scaled(u, r.t, Dimension::Time);
    c.x = convert_si_to_scaled(u, r.x, Dimension::Length);
    if (r.y) c.y = convert_si_to_scaled(u, *r.y, Dimension::Length);
    tr.samples.push_back(c);
  }
  if (tr.samples.size() >= 2) tr.dt = tr.samples[1].t - tr.samples[0].t;
  return tr;
}

void write_trajectory_table(const TrajectoryTable& table, const fs::path& path) {
  std::ostringstream o;
  const bool two = table.two_d();
  o << (two ? kTraj2D : kTraj1D) << "\n";
  for (const auto& r : table.rows) {
    o << r.step << "," << fmt(r.t) << "," << fmt(r.x);
    if (two) o << "," << fmt(*r.y);
    o << "\n";
  }
  write_text(path, o.str());
}

TrajectoryTable read_trajectory_table(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::CorruptHeader, path.filename().string() + ": empty table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool two;
  if (line == kTraj2D) {
    two = true;
  } else if (line == kTraj1D) {
    two = false;
  } else {
    throw Error(ErrorCode::CorruptHeader, path.filename().string() + ": unexpected header '" + line + "'");
  }
  TrajectoryTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    if (f.size() != (two ? 4u : 3u)) throw Error(ErrorCode::CorruptHeader, where + ": wrong column count");
    TrajectoryRow r;
    r.step = need_uint(f[0], where);
    r.t = need_double(f[1], where);
    r.x = need_double(f[2], where);
    if (two) r.y = need_double(f[3], where);
    if (!t.rows.empty() && r.step <= t.rows.back().step) {
      throw Error(ErrorCode::CorruptHeader, where + ": steps out of order");
    }
    t.rows.push_back(r);
  }
  return t;
}

void write_ensemble_table(const std::vector<EnsembleCheckpoint>& ens, const UnitSystem& u, const fs::path& path) {
  std::ostringstream o;
  o << kEnsemble << "\n";
  for (const auto& e : ens) {
    const std::string t = fmt(convert_scaled_to_si(u, e.t, Dimension::Time));
    for (std::size_t m = 0; m < e.configurations.size(); ++m) {
      const auto& c = e.configurations[m];
      o << e.step << "," << t << "," << m << "," << fmt(convert_scaled_to_si(u, c.x, Dimension::Length)) << ",";
      if (c.y) o << fmt(convert_scaled_to_si(u, *c.y, Dimension::Length));
      o << "\n";
    }
  }
  write_text(path, o.str());
}

std::vector<EnsembleCheckpoint> read_ensemble_table(const fs::path& path, const UnitSystem& u) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEnsemble) throw Error(ErrorCode::CorruptHeader, path.filename().string() + ": unexpected header");
  std::vector<EnsembleCheckpoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    if (f.size() != 5) throw Error(ErrorCode::CorruptHeader, where + ": wrong column count");
    const std::size_t step = need_uint(f[0], where);
    if (out.empty() || out.back().step != step) {
      out.push_back({step, convert_si_to_scaled(u, need_double(f[1], where), Dimension::Time), {}});
    }
    Configuration c;
    c.t = out.back().t;
    c.x = convert_si_to_scaled(u, need_double(f[3], where), Dimension::Length);
    if (!f[4].empty()) c.y = convert_si_to_scaled(u, need_double(f[4], where), Dimension::Length);
    out.back().configurations.push_back(c);
  }
  return out;
}

void write_reports_table(const std::vector<StatReport>& reports, const UnitSystem& u, const fs::path& path) {
  std::ostringstream o;
  o << "test,label,t[s],statistic,critical,n,pass\n";
  for (const auto& r : reports) {
    o << csv_field(r.test) << "," << csv_field(r.label) << "," << fmt(convert_scaled_to_si(u, r.t, Dimension::Time))
      << "," << fmt(r.statistic) << "," << fmt(r.critical) << "," << r.n << "," << (r.pass ? "pass" : "fail") << "\n";
  }
  write_text(path, o.str());
}

// ---------------------------------------------------------------- bundles

namespace {

json report_json(const StatReport& r) {
  return json{{"test", r.test}, {"label", r.label},         {"t", r.t},   {"statistic", r.statistic},
              {"critical", r.critical}, {"n", r.n}, {"pass", r.pass}};
}

std::string snapshot_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%04zu", i);
  return buf;
}

}  // namespace

std::vector<std::string> write_bundle(const ScenarioResult& r, const fs::path& dir) {
  const UnitSystem& u = r.config.units;
  fs::create_directories(dir);
  std::vector<std::string> files;
  const auto add = [&](const fs::path& p) { files.push_back(fs::relative(p, dir).generic_string()); };

  write_text(dir / "config.conf", format_config(r.config));
  add(dir / "config.conf");

  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    for (const auto& p : write_field_dump(r.snapshots[i], dir / "fields" / snapshot_stem(i), u)) add(p);
  }
  if (r.highlight) {
    write_trajectory_table(to_table(*r.highlight, u), dir / "trajectories" / "highlight.csv");
    add(dir / "trajectories" / "highlight.csv");
  }
  if (!r.ensemble.empty()) {
    write_ensemble_table(r.ensemble, u, dir / "ensemble.csv");
    add(dir / "ensemble.csv");
  }
  write_reports_table(r.reports, u, dir / "reports.csv");
  add(dir / "reports.csv");

  if (!r.channels.empty()) {
    std::ostringstream o;
    o << "index,y_lo[m],y_hi[m],weight,centroid[m]\n";
    for (std::size_t k = 0; k < r.channels.size(); ++k) {
      const auto& c = r.channels[k];
      o << k << "," << fmt(convert_scaled_to_si(u, c.y_lo, Dimension::Length)) << ","
        << fmt(convert_scaled_to_si(u, c.y_hi, Dimension::Length)) << "," << fmt(c.weight) << ","
        << fmt(convert_scaled_to_si(u, c.centroid, Dimension::Length)) << "\n";
    }
    write_text(dir / "channels.csv", o.str());
    add(dir / "channels.csv");
  }
  if (!r.classical_path.empty()) {
    std::ostringstream o;
    o << "t,x,p_x,y,p_y,z,p_z\n";
    for (const auto& s : r.classical_path) {
      o << fmt(s.t) << "," << fmt(s.x) << "," << fmt(s.p_x) << "," << fmt(s.y) << "," << fmt(s.p_y) << ","
        << (s.z ? fmt(*s.z) : "") << "," << (s.p_z ? fmt(*s.p_z) : "") << "\n";
    }
    write_text(dir / "classical.csv", o.str());
    add(dir / "classical.csv");
  }

  json s;
  s["scenario"] = r.config.name;
  s["kind"] = kind_name(r.config.kind);
  s["units"] = units_json(u);
  s["scalars_note"] = r.config.kind == ScenarioKind::Quantum
                          ? "lengths in length_unit, times in time_unit, velocities in length_unit/time_unit"
                          : "dimensionless model units";
  json sc = json::object();
  for (const auto& [k, v] : r.scalars) sc[k] = v;
  s["scalars"] = sc;
  json reps = json::array();
  bool all = true;
  for (const auto& rep : r.reports) {
    reps.push_back(report_json(rep));
    all = all && rep.pass;
  }
  s["reports"] = reps;
  s["all_reports_pass"] = all;
  json ch = json::array();
  for (const auto& c : r.channels) {
    ch.push_back(json{{"y_lo", c.y_lo}, {"y_hi", c.y_hi}, {"weight", c.weight}, {"centroid", c.centroid}});
  }
  s["channels"] = ch;
  json snaps = json::array();
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    snaps.push_back(json{{"index", i}, {"t", r.snapshots[i].t()}, {"header", "fields/" + snapshot_stem(i) + ".json"}});
  }
  s["snapshots"] = snaps;
  if (r.highlight) {
    const auto& e = r.highlight->back();
    json h{{"x0", r.highlight->samples.front().x}, {"x", e.x}, {"t", e.t}};
    if (e.y) {
      h["y0"] = *r.highlight->samples.front().y;
      h["y"] = *e.y;
    }
    s["highlight"] = h;
  }
  write_text(dir / "summary.json", s.dump(2) + "\n");
  add(dir / "summary.json");

  std::sort(files.begin(), files.end());
  return files;
}

std::string sha256_file(const fs::path& path) {
  const std::string data = read_text(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::InvalidArgument, "sha256 failed for " + path.string());
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

void write_manifest(const fs::path& dir, const RunInputs& in, const std::optional<ScenarioConfig>& cfg,
                    const std::vector<std::string>& files, const ManifestStatus& status) {
  fs::create_directories(dir);
  json m;
  m["format"] = "pilotwave-manifest";
  m["version"] = 1;
  m["status"] = status.status;
  m["exit_code"] = status.exit_code;
  m["message"] = status.message;
  json inputs{{"target", in.target}, {"seed", in.seed}, {"traj", in.traj}};
  if (cfg) {
    inputs["scenario"] = cfg->name;
    inputs["config"] = "config.conf";
  }
  m["inputs"] = inputs;
  m["versions"] = json{{"pilotwave", std::string(PILOTWAVE_VERSION)},
                       {"fftw", std::string(fftw_version)},
                       {"openssl", std::string(OpenSSL_version(OPENSSL_VERSION))},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                       {"compiler", std::string(__VERSION__)}};
  json list = json::array();
  for (const auto& f : files) {
    const fs::path p = dir / f;
    list.push_back(json{{"path", f}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  m["files"] = list;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  json m;
  try {
    m = json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptHeader, std::string("manifest.json: ") + e.what());
  }
  std::vector<std::string> bad;
  for (const auto& f : m.at("files")) {
    const std::string rel = f.at("path").get<std::string>();
    const fs::path p = dir / rel;
    if (!fs::exists(p) || sha256_file(p) != f.at("sha256").get<std::string>()) bad.push_back(rel);
  }
  return bad;
}

std::vector<fs::path> bundle_snapshots(const fs::path& dir) {
  std::vector<fs::path> out;
  const fs::path fields = dir / "fields";
  if (!fs::is_directory(fields)) return out;
  for (const auto& e : fs::directory_iterator(fields)) {
    const auto name = e.path().filename().string();
    if (name.rfind("snap_", 0) == 0 && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

UnitSystem bundle_units(const fs::path& dir) {
  const fs::path p = dir / "config.conf";
  if (!fs::exists(p)) throw Error(ErrorCode::MissingArtifact, "bundle has no config.conf: " + dir.string());
  return load_config(p).units;
}

}  // namespace pilotwave
