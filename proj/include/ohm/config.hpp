#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ohm/errors.hpp"
#include "ohm/experiment.hpp"
#include "ohm/io.hpp"
#include "ohm/rng.hpp"

namespace ohm {

// Flat structured-text config: [section] headers, key = value lines,
// '#' or ';' comments. Values keep their raw text; typed access below.
class ConfigData {
 public:
  static ConfigData parse(const std::string& text) {
    ConfigData cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto comment = line.find_first_of("#;");
      if (comment != std::string::npos) line = line.substr(0, comment);
      line = trim_(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("parse error at line " + std::to_string(lineno) + ": unterminated section");
        section = trim_(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError("parse error at line " + std::to_string(lineno) + ": empty section name");
        cfg.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("parse error at line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim_(line.substr(0, eq));
      const std::string value = trim_(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("parse error at line " + std::to_string(lineno) + ": empty key");
      if (section.empty())
        throw ConfigError("parse error at line " + std::to_string(lineno) + ": key outside any section");
      cfg.sections_[section][key] = value;
    }
    return cfg;
  }

  // "section.key=value"
  void set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    const std::string path = trim_(assignment.substr(0, eq));
    const auto dot = path.find('.');
    if (dot == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    sections_[trim_(path.substr(0, dot))][path.substr(dot + 1)] = trim_(assignment.substr(eq + 1));
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  bool has(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(k) > 0;
  }

  std::string get(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    if (it == sections_.end()) throw ConfigError("validation error: missing `" + s + "` block");
    auto kv = it->second.find(k);
    if (kv == it->second.end())
      throw ConfigError("validation error: missing key `" + k + "` in block `" + s + "`");
    return kv->second;
  }

  std::string get_or(const std::string& s, const std::string& k, const std::string& fallback) const {
    return has(s, k) ? get(s, k) : fallback;
  }

  double get_double(const std::string& s, const std::string& k) const {
    try {
      return parse_double(get(s, k));
    } catch (const IoError&) {
      throw ConfigError("validation error: key `" + s + "." + k + "` is not a number");
    }
  }
  double get_double_or(const std::string& s, const std::string& k, double fallback) const {
    return has(s, k) ? get_double(s, k) : fallback;
  }

  long long get_int(const std::string& s, const std::string& k) const {
    const double v = get_double(s, k);
    const long long i = static_cast<long long>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError("validation error: key `" + s + "." + k + "` is not an integer");
    return i;
  }
  long long get_int_or(const std::string& s, const std::string& k, long long fallback) const {
    return has(s, k) ? get_int(s, k) : fallback;
  }

  bool get_bool_or(const std::string& s, const std::string& k, bool fallback) const {
    if (!has(s, k)) return fallback;
    const std::string v = get(s, k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("validation error: key `" + s + "." + k + "` is not a boolean");
  }

  Vec get_number_list(const std::string& s, const std::string& k) const {
    std::istringstream in(get(s, k));
    Vec out;
    std::string tok;
    while (in >> tok) {
      try {
        out.push_back(parse_double(tok));
      } catch (const IoError&) {
        throw ConfigError("validation error: key `" + s + "." + k + "` has a non-numeric entry");
      }
    }
    return out;
  }

  // Canonical hash: insensitive to ordering, comments and number formatting,
  // sensitive to every semantically meaningful key change.
  std::uint64_t hash() const {
    rng::Key h(0x636f6e66ULL);
    for (const auto& [section, kv] : sections_) {  // std::map iterates sorted
      for (const auto& [key, value] : kv) {
        for (char c : section) h.absorb(static_cast<std::uint64_t>(c));
        h.absorb(std::uint64_t{0x1F});
        for (char c : key) h.absorb(static_cast<std::uint64_t>(c));
        h.absorb(std::uint64_t{0x1E});
        for (char c : normalize_value_(value)) h.absorb(static_cast<std::uint64_t>(c));
        h.absorb(std::uint64_t{0x1D});
      }
    }
    return h.bits(0);
  }

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  static std::string trim_(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::string normalize_value_(const std::string& raw) {
    std::istringstream in(raw);
    std::string tok, out;
    bool all_numeric = true;
    std::vector<std::string> toks;
    while (in >> tok) {
      toks.push_back(tok);
      try {
        parse_double(tok);
      } catch (const IoError&) {
        all_numeric = false;
      }
    }
    if (all_numeric && !toks.empty()) {
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out += ' ';
        out += fmt_double(parse_double(toks[i]));
      }
      return out;
    }
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) out += ' ';
      out += toks[i];
    }
    return out;
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// --------------------------------------------------------------------------
// Typed run configuration

struct OutputOptions {
  std::string dir = "out";
  bool dump_network = false;
  bool dump_solution = false;
};

struct RunConfig {
  std::string command;
  SweepConfig sweep;  // model/geometry/solver/sampling for every command
  std::vector<double> betas;
  OutputOptions output;
  std::uint64_t config_hash = 0;
};

namespace detail {

inline ModelSpec parse_model(const ConfigData& cfg, int dim) {
  if (!cfg.has_section("model")) throw ConfigError("validation error: missing `model` block");
  ModelSpec spec;
  spec.dim = dim;
  spec.name = cfg.get("model", "name");
  if (spec.name == "lattice") {
    RcmWeights w;
    w.kind = RcmWeights::Kind::Constant;
    w.value = cfg.get_double_or("model", "value", 1.0);
    spec.model = LatticeRcm{w};
  } else if (spec.name == "lattice_rcm") {
    RcmWeights w;
    const std::string dist = cfg.get_or("model", "dist", "uniform");
    if (dist == "constant") {
      w.kind = RcmWeights::Kind::Constant;
      w.value = cfg.get_double("model", "value");
    } else if (dist == "uniform") {
      w.kind = RcmWeights::Kind::Uniform;
      w.lo = cfg.get_double("model", "lo");
      w.hi = cfg.get_double("model", "hi");
    } else if (dist == "peraxis") {
      w.kind = RcmWeights::Kind::PerAxis;
      w.axis = cfg.get_number_list("model", "axis");
      if (static_cast<int>(w.axis.size()) != dim)
        throw ConfigError("validation error: `model.axis` must list one weight per axis");
    } else if (dist == "alternating") {
      w.kind = RcmWeights::Kind::Alternating;
      const Vec v = cfg.get_number_list("model", "values");
      if (v.size() != 2) throw ConfigError("validation error: `model.values` must list two weights");
      w.v0 = v[0];
      w.v1 = v[1];
    } else {
      throw ConfigError("validation error: unknown `model.dist` '" + dist + "'");
    }
    spec.model = LatticeRcm{w};
  } else if (spec.name == "percolation") {
    spec.model = BondPercolation{cfg.get_double("model", "p")};
  } else if (spec.name == "miller_abrahams") {
    MillerAbrahams ma;
    ma.gamma = cfg.get_double("model", "gamma");
    ma.beta = cfg.get_double("model", "beta");
    ma.alpha = cfg.get_double_or("model", "alpha", 0.0);
    ma.mark_bound = cfg.get_double_or("model", "mark_bound", 1.0);
    ma.cutoff = cfg.get_double_or("model", "cutoff", 1e-12);
    spec.model = ma;
    spec.intensity = cfg.get_double_or("model", "intensity", 1.0);
    if (!(spec.intensity > 0.0))
      throw ConfigError("validation error: `model.intensity` must be positive");
  } else if (spec.name == "explicit") {
    spec.cloud = parse_point_cloud(read_text_file(cfg.get("model", "points_file")));
    if (spec.cloud.dim != dim)
      throw ConfigError("validation error: `model.points_file` dimension differs from `geometry.d`");
    ExplicitEdges ex;
    std::istringstream in(read_text_file(cfg.get("model", "edges_file")));
    int i = 0, j = 0;
    std::string w;
    while (in >> i >> j >> w) {
      ex.pairs.push_back({i, j});
      ex.weights.push_back(parse_double(w));
    }
    spec.model = ex;
  } else {
    throw ConfigError("validation error: unknown `model.name` '" + spec.name + "'");
  }
  validate_model(spec.model);
  return spec;
}

}  // namespace detail

inline RunConfig build_run_config(const std::string& command, const ConfigData& cfg) {
  static const std::vector<std::string> commands = {"solve",     "sweep", "corrector",
                                                    "direction", "weakprobe", "mott"};
  bool known = false;
  for (const auto& c : commands) known |= c == command;
  if (!known) throw ConfigError("validation error: unknown command '" + command + "'");

  RunConfig run;
  run.command = command;
  run.config_hash = cfg.hash();

  if (!cfg.has_section("geometry")) throw ConfigError("validation error: missing `geometry` block");
  const int dim = static_cast<int>(cfg.get_int("geometry", "d"));
  if (dim < 1) throw ConfigError("validation error: `geometry.d` must be >= 1");

  run.sweep.model = detail::parse_model(cfg, dim);

  run.sweep.direction = cfg.has("geometry", "direction") ? cfg.get_number_list("geometry", "direction")
                                                         : Vec(dim, 0.0);
  if (!cfg.has("geometry", "direction")) run.sweep.direction[0] = 1.0;
  if (static_cast<int>(run.sweep.direction.size()) != dim)
    throw ConfigError("validation error: `geometry.direction` must have d components");

  if (command == "solve" || command == "sweep" || command == "weakprobe") {
    run.sweep.ells = cfg.get_number_list("geometry", "ell");
    if (run.sweep.ells.empty()) throw ConfigError("validation error: `geometry.ell` is empty");
    for (std::size_t i = 0; i < run.sweep.ells.size(); ++i) {
      if (!(run.sweep.ells[i] > 0.0)) throw ConfigError("validation error: `geometry.ell` must be positive");
      if (i > 0 && !(run.sweep.ells[i] > run.sweep.ells[i - 1]))
        throw ConfigError("validation error: `geometry.ell` must be strictly increasing");
    }
  }
  const std::string margin = cfg.get_or("geometry", "margin", "auto");
  run.sweep.margin = margin == "auto" ? -1.0 : parse_double(margin);

  run.sweep.solver.tol = cfg.get_double_or("solver", "tol", 1e-12);
  if (!(run.sweep.solver.tol > 0.0)) throw ConfigError("validation error: `solver.tol` must be positive");
  run.sweep.solver.max_iter = static_cast<int>(cfg.get_int_or("solver", "max_iter", 200000));
  if (run.sweep.solver.max_iter < 1)
    throw ConfigError("validation error: `solver.max_iter` must be positive");
  run.sweep.solver.n_gamma = static_cast<int>(cfg.get_int_or("solver", "n_gamma", 11));
  if (run.sweep.solver.n_gamma < 1)
    throw ConfigError("validation error: `solver.n_gamma` must be positive");
  const std::string method = cfg.get_or("solver", "method", "auto");
  if (method == "auto")
    run.sweep.solver.method = SolveMethod::Auto;
  else if (method == "cg")
    run.sweep.solver.method = SolveMethod::Cg;
  else
    throw ConfigError("validation error: unknown `solver.method` '" + method + "'");

  if (!cfg.has_section("sampling")) throw ConfigError("validation error: missing `sampling` block");
  for (double s : cfg.get_number_list("sampling", "seeds")) {
    if (!(s >= 0.0) || s != std::floor(s))
      throw ConfigError("validation error: `sampling.seeds` must be nonnegative integers");
    run.sweep.sampling.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (run.sweep.sampling.seeds.empty())
    throw ConfigError("validation error: `sampling.seeds` is empty");
  run.sweep.sampling.torus_n = static_cast<int>(cfg.get_int_or("sampling", "torus_n", 32));
  if (run.sweep.sampling.torus_n < 2)
    throw ConfigError("validation error: `sampling.torus_n` must be >= 2");

  if (command == "mott") {
    run.betas = cfg.get_number_list("sampling", "betas");
    if (run.betas.empty()) throw ConfigError("validation error: `sampling.betas` is empty");
  }

  run.output.dir = cfg.get_or("output", "dir", "out");
  run.output.dump_network = cfg.get_bool_or("output", "dump_network", false);
  run.output.dump_solution = cfg.get_bool_or("output", "dump_solution", false);
  return run;
}

}  // namespace ohm
