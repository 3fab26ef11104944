#pragma once

// Experiment configuration: a flat, typed key = value format with [section]
// headers, '#' comments, and canonical serialization (fixed section and key
// order), so one file is a complete, diff-able description of an experiment.
// Parse errors carry the line and field they occurred on.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "saddle/csv.hpp"
#include "saddle/schedules.hpp"
#include "saddle/solvers.hpp"

namespace saddle {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct KvFile {
  // section -> key -> (value, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, long>>> data;

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  }

  static KvFile parse(const std::string& text) {
    KvFile kv;
    std::stringstream ss(text);
    std::string line, section;
    long lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) +
                            ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        kv.data[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      kv.data[section][key] = {value, lineno};
    }
    return kv;
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = data.find(section);
    return s != data.end() && s->second.count(key) > 0;
  }

  std::string raw(const std::string& section, const std::string& key) const {
    return data.at(section).at(key).first;
  }

  template <typename T>
  T get(const std::string& section, const std::string& key, const T& fallback) const {
    if (!has(section, key)) return fallback;
    return convert<T>(section, key, raw(section, key));
  }

  template <typename T>
  T require(const std::string& section, const std::string& key) const {
    if (!has(section, key))
      throw ConfigError("config: missing required field [" + section + "] " + key);
    return convert<T>(section, key, raw(section, key));
  }

  template <typename T>
  T convert(const std::string& section, const std::string& key,
            const std::string& value) const {
    std::stringstream ss(value);
    T out;
    if constexpr (std::is_same_v<T, bool>) {
      if (value == "on" || value == "true" || value == "1") return true;
      if (value == "off" || value == "false" || value == "0") return false;
      throw field_error(section, key, value, "expected on/off");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return value;
    } else {
      ss >> out;
      if (ss.fail() || !ss.eof()) throw field_error(section, key, value, "bad number");
      return out;
    }
  }

  ConfigError field_error(const std::string& section, const std::string& key,
                          const std::string& value, const std::string& what) const {
    const long line = data.at(section).at(key).second;
    return ConfigError("config line " + std::to_string(line) + ": [" + section +
                       "] " + key + " = '" + value + "': " + what);
  }
};

inline std::vector<double> parse_list(const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = KvFile::trim(cell);
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

inline std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += csv_number(values[i]);
  }
  return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& value) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(value);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = KvFile::trim(cell);
    if (cell.empty()) continue;
    out.push_back(std::stoull(cell));
  }
  return out;
}

} // namespace detail

struct ProblemSpec {
  std::string kind = "quadratic_preset";  // quadratic_preset | interp | dro_synth |
                                          // dro_csv | ot_synth | ot_csv
  double kappa = 5.0;
  double noise_theta_sd = 0.0;
  double noise_v_sd = 0.0;
  double theta0_norm = 0.0;        // 0: keep the problem default
  double theta0_mode_cutoff = 0.0; // >0: start on modes of M with lambda >= cutoff
  std::uint64_t structure_seed = 1;
  // interp
  int interp_components = 10;
  double interp_sigma_sq = 2.0;
  // dro
  int n_points = 200;
  double gamma = 1.3;
  std::string dataset;
  // ot
  int m_source = 512;
  int n_target = 64;
  double epsilon = 0.1;
  std::string model = "affine";  // affine | perceptron
  int hidden = 16;
  std::string source_csv;
  std::string target_csv;
};

struct ScheduleSpec {
  std::string regime = "rsgda_decreasing";
  double p = 0.5;
  double zeta = 0.1;
  double epsilon_target = 0.1;
  double d0 = 1.0;
  double r0 = 0.0;
  double alpha = 0.0;  // custom regime
  double eta = 0.0;
  double alpha_scale = 1.0;
  bool strict = true;
  bool appendix_variant = false;

  StepSchedule build(const SmoothnessSpec& spec) const {
    StepSchedule::Params params;
    params.p = p;
    params.zeta = zeta;
    params.epsilon_target = epsilon_target;
    params.d0 = d0;
    params.r0 = r0;
    params.custom_alpha = alpha;
    params.custom_eta = eta;
    params.alpha_scale = alpha_scale;
    params.strict = strict;
    params.appendix_variant = appendix_variant;
    return StepSchedule(regime_from_name(regime), spec, params);
  }
};

struct SolverSpec {
  std::string algorithm = "rsgda";
  int loop_size_m = 1;
  double max_oracle_delta = 1e-8;
  int batch_size = 1;
  long max_iters = 10000;
  bool fast_mode = true;
  long trace_stride = 1;
  double divergence_guard = 1e12;
};

struct SweepSpec {
  std::vector<double> p_values;
  std::vector<double> m_values;
  std::vector<double> msin_values;
  std::vector<double> alpha_scale_values;
};

struct ExperimentConfig {
  ProblemSpec problem;
  SolverSpec solver;
  ScheduleSpec schedule;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "runs";
  bool out_dir_explicit = false;  // [run] out was present in the file
  SweepSpec sweep;

  void validate() const {
    if (seeds.empty()) throw ConfigError("config: [run] seeds must be non-empty");
    if (solver.max_iters < 0) throw ConfigError("config: [solver] max_iters < 0");
    for (double m : sweep.m_values)
      if (m < 1.0) throw ConfigError("config: [sweep] m values must be >= 1");
  }

  static ExperimentConfig parse(const std::string& text) {
    using detail::KvFile;
    const KvFile kv = KvFile::parse(text);
    ExperimentConfig c;
    ProblemSpec& pr = c.problem;
    pr.kind = kv.get<std::string>("problem", "kind", pr.kind);
    pr.kappa = kv.get("problem", "kappa", pr.kappa);
    pr.noise_theta_sd = kv.get("problem", "noise_theta_sd", pr.noise_theta_sd);
    pr.noise_v_sd = kv.get("problem", "noise_v_sd", pr.noise_v_sd);
    pr.theta0_norm = kv.get("problem", "theta0_norm", pr.theta0_norm);
    pr.theta0_mode_cutoff = kv.get("problem", "theta0_mode_cutoff", pr.theta0_mode_cutoff);
    pr.structure_seed = kv.get("problem", "structure_seed", pr.structure_seed);
    pr.interp_components = kv.get("problem", "interp_components", pr.interp_components);
    pr.interp_sigma_sq = kv.get("problem", "interp_sigma_sq", pr.interp_sigma_sq);
    pr.n_points = kv.get("problem", "n_points", pr.n_points);
    pr.gamma = kv.get("problem", "gamma", pr.gamma);
    pr.dataset = kv.get<std::string>("problem", "dataset", pr.dataset);
    pr.m_source = kv.get("problem", "m_source", pr.m_source);
    pr.n_target = kv.get("problem", "n_target", pr.n_target);
    pr.epsilon = kv.get("problem", "epsilon", pr.epsilon);
    pr.model = kv.get<std::string>("problem", "model", pr.model);
    pr.hidden = kv.get("problem", "hidden", pr.hidden);
    pr.source_csv = kv.get<std::string>("problem", "source_csv", pr.source_csv);
    pr.target_csv = kv.get<std::string>("problem", "target_csv", pr.target_csv);

    SolverSpec& so = c.solver;
    so.algorithm = kv.get<std::string>("solver", "algorithm", so.algorithm);
    so.loop_size_m = kv.get("solver", "loop_size_m", so.loop_size_m);
    so.max_oracle_delta = kv.get("solver", "max_oracle_delta", so.max_oracle_delta);
    so.batch_size = kv.get("solver", "batch_size", so.batch_size);
    so.max_iters = kv.get("solver", "max_iters", so.max_iters);
    so.fast_mode = kv.get("solver", "fast_mode", so.fast_mode);
    so.trace_stride = kv.get("solver", "trace_stride", so.trace_stride);
    so.divergence_guard = kv.get("solver", "divergence_guard", so.divergence_guard);

    ScheduleSpec& sc = c.schedule;
    sc.regime = kv.get<std::string>("schedule", "regime", sc.regime);
    sc.p = kv.get("schedule", "p", sc.p);
    sc.zeta = kv.get("schedule", "zeta", sc.zeta);
    sc.epsilon_target = kv.get("schedule", "epsilon_target", sc.epsilon_target);
    sc.d0 = kv.get("schedule", "d0", sc.d0);
    sc.r0 = kv.get("schedule", "r0", sc.r0);
    sc.alpha = kv.get("schedule", "alpha", sc.alpha);
    sc.eta = kv.get("schedule", "eta", sc.eta);
    sc.alpha_scale = kv.get("schedule", "alpha_scale", sc.alpha_scale);
    sc.strict = kv.get("schedule", "strict", sc.strict);
    sc.appendix_variant = kv.get("schedule", "appendix_variant", sc.appendix_variant);

    if (kv.has("run", "seeds")) c.seeds = detail::parse_seed_list(kv.raw("run", "seeds"));
    c.out_dir_explicit = kv.has("run", "out");
    c.out_dir = kv.get<std::string>("run", "out", c.out_dir);

    if (kv.has("sweep", "p")) c.sweep.p_values = detail::parse_list(kv.raw("sweep", "p"));
    if (kv.has("sweep", "m")) c.sweep.m_values = detail::parse_list(kv.raw("sweep", "m"));
    if (kv.has("sweep", "msin"))
      c.sweep.msin_values = detail::parse_list(kv.raw("sweep", "msin"));
    if (kv.has("sweep", "alpha_scale"))
      c.sweep.alpha_scale_values = detail::parse_list(kv.raw("sweep", "alpha_scale"));

    c.validate();
    return c;
  }

  std::string serialize() const {
    std::ostringstream out;
    out << "[problem]\n";
    out << "kind = " << problem.kind << "\n";
    out << "kappa = " << csv_number(problem.kappa) << "\n";
    out << "noise_theta_sd = " << csv_number(problem.noise_theta_sd) << "\n";
    out << "noise_v_sd = " << csv_number(problem.noise_v_sd) << "\n";
    out << "theta0_norm = " << csv_number(problem.theta0_norm) << "\n";
    out << "theta0_mode_cutoff = " << csv_number(problem.theta0_mode_cutoff) << "\n";
    out << "structure_seed = " << problem.structure_seed << "\n";
    out << "interp_components = " << problem.interp_components << "\n";
    out << "interp_sigma_sq = " << csv_number(problem.interp_sigma_sq) << "\n";
    out << "n_points = " << problem.n_points << "\n";
    out << "gamma = " << csv_number(problem.gamma) << "\n";
    if (!problem.dataset.empty()) out << "dataset = " << problem.dataset << "\n";
    out << "m_source = " << problem.m_source << "\n";
    out << "n_target = " << problem.n_target << "\n";
    out << "epsilon = " << csv_number(problem.epsilon) << "\n";
    out << "model = " << problem.model << "\n";
    out << "hidden = " << problem.hidden << "\n";
    if (!problem.source_csv.empty()) out << "source_csv = " << problem.source_csv << "\n";
    if (!problem.target_csv.empty()) out << "target_csv = " << problem.target_csv << "\n";

    out << "\n[solver]\n";
    out << "algorithm = " << solver.algorithm << "\n";
    out << "loop_size_m = " << solver.loop_size_m << "\n";
    out << "max_oracle_delta = " << csv_number(solver.max_oracle_delta) << "\n";
    out << "batch_size = " << solver.batch_size << "\n";
    out << "max_iters = " << solver.max_iters << "\n";
    out << "fast_mode = " << (solver.fast_mode ? "on" : "off") << "\n";
    out << "trace_stride = " << solver.trace_stride << "\n";
    out << "divergence_guard = " << csv_number(solver.divergence_guard) << "\n";

    out << "\n[schedule]\n";
    out << "regime = " << schedule.regime << "\n";
    out << "p = " << csv_number(schedule.p) << "\n";
    out << "zeta = " << csv_number(schedule.zeta) << "\n";
    out << "epsilon_target = " << csv_number(schedule.epsilon_target) << "\n";
    out << "d0 = " << csv_number(schedule.d0) << "\n";
    out << "r0 = " << csv_number(schedule.r0) << "\n";
    out << "alpha = " << csv_number(schedule.alpha) << "\n";
    out << "eta = " << csv_number(schedule.eta) << "\n";
    out << "alpha_scale = " << csv_number(schedule.alpha_scale) << "\n";
    out << "strict = " << (schedule.strict ? "on" : "off") << "\n";
    out << "appendix_variant = " << (schedule.appendix_variant ? "on" : "off") << "\n";

    out << "\n[run]\n";
    out << "seeds = ";
    for (size_t i = 0; i < seeds.size(); ++i) {
      if (i) out << ',';
      out << seeds[i];
    }
    out << "\n";
    out << "out = " << out_dir << "\n";

    if (!sweep.p_values.empty() || !sweep.m_values.empty() ||
        !sweep.msin_values.empty() || !sweep.alpha_scale_values.empty()) {
      out << "\n[sweep]\n";
      if (!sweep.p_values.empty())
        out << "p = " << detail::format_list(sweep.p_values) << "\n";
      if (!sweep.m_values.empty())
        out << "m = " << detail::format_list(sweep.m_values) << "\n";
      if (!sweep.msin_values.empty())
        out << "msin = " << detail::format_list(sweep.msin_values) << "\n";
      if (!sweep.alpha_scale_values.empty())
        out << "alpha_scale = " << detail::format_list(sweep.alpha_scale_values) << "\n";
    }
    return out.str();
  }
};

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ExperimentConfig::parse(ss.str());
}

} // namespace saddle
