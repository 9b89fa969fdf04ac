#pragma once

// Flat key=value experiment configuration with dotted keys, e.g.
//
//   walk.d=1000
//   grid.times=0.5,1.0
//
// '#' at the start of a line, or after whitespace, starts a comment. Unknown
// keys and malformed values are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ouwalk/moments.hpp"
#include "ouwalk/partitions.hpp"
#include "ouwalk/sim.hpp"

namespace ouwalk {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class ProcessKind { Lnnrw, Z, Ou, Sbm1d, SbmFull };
enum class OutputFormat { Csv, Json };
enum class OutputMode { Summary, Paths };

struct ThetaConfig {
  std::string kind = "flat_signed";  // flat_signed | uniform_sphere | basis | custom
  double u = 1.0;
  int index = 1;  // 1-based, for basis
  std::uint64_t seed = 1;
  std::vector<double> values;

  bool operator==(const ThetaConfig&) const = default;
};

struct ExperimentConfig {
  ProcessKind process = ProcessKind::Lnnrw;
  int d = 50;
  double p = 0.5;
  ThetaConfig theta;
  std::optional<double> ou_u;  // defaults to the start projection <theta, 1>
  std::vector<double> times{0.5, 1.0};
  std::vector<double> phi;  // empty = all ones
  std::size_t paths = 10'000;
  double step = 1e-3;
  int max_order = 4;
  std::uint64_t seed = 1;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
  OutputMode mode = OutputMode::Summary;
  std::vector<int> converge_dims{10, 100, 1000};
  double converge_time = 1.0;
  std::size_t fdd_draws = 8;
  std::vector<double> tightness_times{0.0, 0.2, 0.4};
  double tightness_epsilon = 0.5;
  int partitions_max_order = 4;

  bool operator==(const ExperimentConfig&) const = default;

  DirectionSpec direction_spec() const {
    if (theta.kind == "flat_signed") return direction::FlatSigned{theta.u};
    if (theta.kind == "uniform_sphere") return direction::UniformSphere{theta.seed};
    if (theta.kind == "basis") return direction::Basis{theta.index - 1};
    return direction::Custom{theta.values};
  }
  DirectionVector direction(int dim) const { return make_direction(direction_spec(), dim); }
  DirectionVector direction() const { return direction(d); }
  WalkParams walk() const { return WalkParams(d, p); }
  double ou_start() const { return ou_u ? *ou_u : direction().start_projection(); }
  std::vector<double> weights() const { return phi.empty() ? std::vector<double>(times.size(), 1.0) : phi; }
};

inline std::string to_string(ProcessKind k) {
  switch (k) {
    case ProcessKind::Lnnrw: return "lnnrw";
    case ProcessKind::Z: return "z";
    case ProcessKind::Ou: return "ou";
    case ProcessKind::Sbm1d: return "sbm1d";
    case ProcessKind::SbmFull: return "sbmfull";
  }
  return "?";
}
inline std::string to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }
inline std::string to_string(OutputMode m) { return m == OutputMode::Summary ? "summary" : "paths"; }

inline OutputFormat parse_output_format(const std::string& s) {
  if (s == "csv") return OutputFormat::Csv;
  if (s == "json") return OutputFormat::Json;
  throw ConfigError("format must be csv or json, got '" + s + "'");
}

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(key + ": cannot parse '" + raw + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(key + ": value must be finite");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  if (trim(raw).empty()) return out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  if (!raw.empty() && raw.back() == ',') throw ConfigError(key + ": trailing comma");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace config_detail

/// Checks every cross-field constraint; throws ConfigError.
inline void validate(const ExperimentConfig& c) {
  if (c.d < 1) throw ConfigError("walk.d must be >= 1");
  if (!(c.p > 0.0 && c.p <= 1.0)) throw ConfigError("walk.p must lie in (0, 1]");
  if (c.times.empty()) throw ConfigError("grid.times must not be empty");
  if (c.times.front() < 0.0) throw ConfigError("grid.times must be >= 0");
  for (std::size_t i = 1; i < c.times.size(); ++i) {
    if (!(c.times[i] > c.times[i - 1])) throw ConfigError("grid.times must be strictly increasing");
  }
  if (!c.phi.empty() && c.phi.size() != c.times.size()) {
    throw ConfigError("phi has " + std::to_string(c.phi.size()) + " entries but grid.times has " +
                      std::to_string(c.times.size()));
  }
  const auto& th = c.theta;
  if (th.kind == "basis") {
    if (th.index < 1 || th.index > c.d) throw ConfigError("theta.index must lie in 1..walk.d");
  } else if (th.kind == "custom") {
    if (static_cast<int>(th.values.size()) != c.d) throw ConfigError("theta.values must have walk.d entries");
  } else if (th.kind != "flat_signed" && th.kind != "uniform_sphere") {
    throw ConfigError("theta.kind must be flat_signed, uniform_sphere, basis or custom");
  }
  try {
    (void)c.direction();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("theta: ") + e.what());
  }
  if (c.paths < 1) throw ConfigError("sim.paths must be >= 1");
  if (!(c.step > 0.0)) throw ConfigError("sim.step must be > 0");
  if (c.max_order < 1 || c.max_order > kMaxPsiOrder) {
    throw ConfigError("moments.max_order must lie in 1.." + std::to_string(kMaxPsiOrder));
  }
  if (!(c.converge_time >= 0.0)) throw ConfigError("converge.time must be >= 0");
  for (int dim : c.converge_dims) {
    if (dim < 1) throw ConfigError("converge.dims entries must be >= 1");
  }
  const auto& tt = c.tightness_times;
  if (tt.size() != 3) throw ConfigError("tightness.times needs exactly three times");
  if (!(tt[0] >= 0.0 && tt[0] < tt[1] && tt[1] < tt[2])) {
    throw ConfigError("tightness.times must satisfy 0 <= t1 < t2 < t3");
  }
  if (!(c.tightness_epsilon > 0.0)) throw ConfigError("tightness.epsilon must be > 0");
  if (c.partitions_max_order < 1 || c.partitions_max_order > kMaxGroundSize) {
    throw ConfigError("partitions.max_order must lie in 1.." + std::to_string(kMaxGroundSize));
  }
}

/// Applies one key=value assignment without validating cross-field constraints.
inline void assign(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  using namespace config_detail;
  const std::string v = trim(raw);
  if (key == "process.kind") {
    if (v == "lnnrw") c.process = ProcessKind::Lnnrw;
    else if (v == "z") c.process = ProcessKind::Z;
    else if (v == "ou") c.process = ProcessKind::Ou;
    else if (v == "sbm1d") c.process = ProcessKind::Sbm1d;
    else if (v == "sbmfull") c.process = ProcessKind::SbmFull;
    else throw ConfigError("process.kind: unknown process '" + v + "'");
  } else if (key == "walk.d") {
    c.d = parse_number<int>(key, v);
  } else if (key == "walk.p") {
    c.p = parse_number<double>(key, v);
  } else if (key == "theta.kind") {
    c.theta.kind = v;
  } else if (key == "theta.u") {
    c.theta.u = parse_number<double>(key, v);
  } else if (key == "theta.index") {
    c.theta.index = parse_number<int>(key, v);
  } else if (key == "theta.seed") {
    c.theta.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "theta.values") {
    c.theta.values = parse_list<double>(key, v);
  } else if (key == "ou.u") {
    c.ou_u = parse_number<double>(key, v);
  } else if (key == "grid.times") {
    c.times = parse_list<double>(key, v);
  } else if (key == "phi") {
    c.phi = parse_list<double>(key, v);
  } else if (key == "sim.paths") {
    c.paths = parse_number<std::size_t>(key, v);
  } else if (key == "sim.step") {
    c.step = parse_number<double>(key, v);
  } else if (key == "moments.max_order") {
    c.max_order = parse_number<int>(key, v);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "output.path") {
    c.output_path = v;
  } else if (key == "output.format") {
    c.format = parse_output_format(v);
  } else if (key == "output.mode") {
    if (v == "summary") c.mode = OutputMode::Summary;
    else if (v == "paths") c.mode = OutputMode::Paths;
    else throw ConfigError("output.mode must be summary or paths");
  } else if (key == "converge.dims") {
    c.converge_dims = parse_list<int>(key, v);
  } else if (key == "converge.time") {
    c.converge_time = parse_number<double>(key, v);
  } else if (key == "fdd.draws") {
    c.fdd_draws = parse_number<std::size_t>(key, v);
  } else if (key == "tightness.times") {
    c.tightness_times = parse_list<double>(key, v);
  } else if (key == "tightness.epsilon") {
    c.tightness_epsilon = parse_number<double>(key, v);
  } else if (key == "partitions.max_order") {
    c.partitions_max_order = parse_number<int>(key, v);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

/// Parses config text; later assignments override earlier ones.
inline ExperimentConfig parse_config(const std::string& text, bool check = true) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    // Trailing comment: '#' preceded by whitespace.
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (t[i] == '#' && (t[i - 1] == ' ' || t[i - 1] == '\t')) {
        t = config_detail::trim(t.substr(0, i));
        break;
      }
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    assign(c, config_detail::trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  if (check) validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every key in a fixed order, one per line.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
  using config_detail::join;
  std::vector<std::pair<std::string, std::string>> kv{
      {"process.kind", to_string(c.process)},
      {"walk.d", std::to_string(c.d)},
      {"walk.p", format_double(c.p)},
      {"theta.kind", c.theta.kind},
      {"theta.u", format_double(c.theta.u)},
      {"theta.index", std::to_string(c.theta.index)},
      {"theta.seed", std::to_string(c.theta.seed)},
      {"theta.values", join(c.theta.values)},
  };
  if (c.ou_u) kv.emplace_back("ou.u", format_double(*c.ou_u));
  kv.insert(kv.end(), {
                          {"grid.times", join(c.times)},
                          {"phi", join(c.phi)},
                          {"sim.paths", std::to_string(c.paths)},
                          {"sim.step", format_double(c.step)},
                          {"moments.max_order", std::to_string(c.max_order)},
                          {"seed", std::to_string(c.seed)},
                          {"output.path", c.output_path},
                          {"output.format", to_string(c.format)},
                          {"output.mode", to_string(c.mode)},
                          {"converge.dims", join(c.converge_dims)},
                          {"converge.time", format_double(c.converge_time)},
                          {"fdd.draws", std::to_string(c.fdd_draws)},
                          {"tightness.times", join(c.tightness_times)},
                          {"tightness.epsilon", format_double(c.tightness_epsilon)},
                          {"partitions.max_order", std::to_string(c.partitions_max_order)},
                      });
  return kv;
}

inline std::string serialize_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + "=" + v + "\n";
  return out;
}

}  // namespace ouwalk
