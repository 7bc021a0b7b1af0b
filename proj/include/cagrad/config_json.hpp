#pragma once

// JSON front end for ExperimentConfig plus summary serialization. Parsing
// failures carry the offending field (or byte position for syntax errors) so
// the CLI can exit with a usable diagnostic.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cagrad/harness.hpp"

namespace cagrad {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

inline const json& require_field(const json& obj, const std::string& key,
                                 const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError("config field '" + where + "': missing '" + key + "'");
  }
  return obj.at(key);
}

template <class T>
inline T field_as(const json& obj, const std::string& key, const std::string& where) {
  try {
    return require_field(obj, key, where).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + where + "." + key + "': " + e.what());
  }
}

template <class T>
inline T field_or(const json& obj, const std::string& key, T fallback,
                  const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + where + "." + key + "': " + e.what());
  }
}

inline ProblemSpec parse_problem(const json& j) {
  ProblemSpec spec;
  if (j.is_string()) {
    spec.builtin = j.get<std::string>();
    return spec;
  }
  if (!j.is_object()) throw ConfigError("config field 'problem': expected string or object");
  if (j.contains("expressions")) {
    spec.expressions = field_as<std::vector<std::string>>(j, "expressions", "problem");
    spec.dim = field_as<std::size_t>(j, "dim", "problem");
    return spec;
  }
  spec.builtin = field_as<std::string>(j, "name", "problem");
  if (spec.builtin == "quadratic") {
    spec.anchors = field_as<Matrix>(j, "anchors", "problem");
  } else if (spec.builtin == "mlp-synth") {
    spec.mlp_seed = field_or<std::uint64_t>(j, "seed", 1, "problem");
    spec.mlp_width = field_or<std::size_t>(j, "width", 8, "problem");
    spec.mlp_n = field_or<std::size_t>(j, "n", 32, "problem");
  }
  return spec;
}

inline CombineMethod parse_method_name(const std::string& name) {
  if (name == "mean" || name == "gd") return CombineMethod::mean;
  if (name == "mgda") return CombineMethod::mgda;
  if (name == "pcgrad") return CombineMethod::pcgrad;
  if (name == "cagrad") return CombineMethod::cagrad;
  if (name == "cagrad-fast" || name == "cagrad_fast") return CombineMethod::cagrad_fast;
  throw ConfigError("config field 'method': unknown method '" + name + "'");
}

inline CombinerSpec parse_combiner(const json& j) {
  CombinerSpec spec;
  if (j.is_string()) {
    spec.method = parse_method_name(j.get<std::string>());
    return spec;
  }
  if (!j.is_object()) throw ConfigError("config field 'method': expected string or object");
  spec.method = parse_method_name(field_as<std::string>(j, "name", "method"));
  spec.c = field_or<double>(j, "c", 0.0, "method");
  if (j.contains("subsample")) {
    spec.subsample = field_as<int>(j, "subsample", "method");
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    spec.solver.max_iters = field_or<int>(s, "max_iters", spec.solver.max_iters, "method.solver");
    spec.solver.tol = field_or<double>(s, "tol", spec.solver.tol, "method.solver");
    spec.solver.step = field_or<double>(s, "step", spec.solver.step, "method.solver");
    spec.solver.zero_eps =
        field_or<double>(s, "zero_eps", spec.solver.zero_eps, "method.solver");
  }
  return spec;
}

inline StepperSpec parse_stepper(const json& j) {
  StepperSpec spec;
  if (!j.is_object()) throw ConfigError("config field 'stepper': expected object");
  const std::string type = field_as<std::string>(j, "type", "stepper");
  if (type == "fixed") {
    spec.kind = StepperKind::fixed;
  } else if (type == "adam") {
    spec.kind = StepperKind::adam;
  } else if (type == "decaying") {
    spec.kind = StepperKind::decaying;
  } else {
    throw ConfigError("config field 'stepper.type': unknown stepper '" + type + "'");
  }
  spec.alpha = field_or<double>(j, "alpha", spec.alpha, "stepper");
  return spec;
}

}  // namespace detail

inline ExperimentConfig config_from_json_text(const std::string& text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.problem = detail::parse_problem(detail::require_field(j, "problem", "<root>"));
  cfg.method = detail::parse_combiner(detail::require_field(j, "method", "<root>"));
  cfg.stepper = detail::parse_stepper(detail::require_field(j, "stepper", "<root>"));
  cfg.steps = detail::field_as<long>(j, "steps", "<root>");
  cfg.seed = detail::field_or<std::uint64_t>(j, "seed", 0, "<root>");
  cfg.log_every = detail::field_or<long>(j, "log_every", 1, "<root>");
  cfg.output_path = detail::field_or<std::string>(j, "output_path", "", "<root>");
  const auto inits = detail::field_as<std::vector<std::vector<double>>>(j, "inits", "<root>");
  for (std::size_t i = 0; i < inits.size(); ++i) {
    try {
      cfg.inits.emplace_back(inits[i]);
    } catch (const InvalidInputError& e) {
      throw ConfigError("config field 'inits[" + std::to_string(i) + "]': " + e.what());
    }
  }
  return cfg;
}

inline ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

// Stable JSON rendering of one run summary. Wall time is intentionally not
// serialized: output files must be byte-identical across repeated runs.
inline nlohmann::json summary_to_json(const TrajectoryRecord& rec) {
  nlohmann::json j;
  j["init_index"] = rec.init_index;
  j["init"] = rec.init.values;
  j["diverged"] = rec.diverged;
  if (rec.diverged) j["diverged_step"] = rec.diverged_step;
  j["final_losses"] = rec.summary.final_losses;
  j["final_L0"] = rec.summary.final_average_loss;
  j["final_pareto_stat"] = rec.summary.final_pareto_stat;
  j["converged"] = rec.summary.converged;
  j["stalled"] = rec.summary.stalled;
  j["steps_to_converge"] = rec.summary.steps_to_converge;
  return j;
}

inline nlohmann::json experiment_summary_json(const ExperimentConfig& cfg,
                                              const std::vector<TrajectoryRecord>& records) {
  nlohmann::json j;
  j["method"] = to_string(cfg.method.method);
  if (cfg.method.method == CombineMethod::cagrad ||
      cfg.method.method == CombineMethod::cagrad_fast) {
    j["c"] = cfg.method.c;
  }
  j["stepper"] = to_string(cfg.stepper.kind);
  j["alpha"] = cfg.stepper.alpha;
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  int converged = 0;
  int stalled = 0;
  j["runs"] = nlohmann::json::array();
  for (const TrajectoryRecord& rec : records) {
    j["runs"].push_back(summary_to_json(rec));
    converged += rec.summary.converged ? 1 : 0;
    stalled += rec.summary.stalled ? 1 : 0;
  }
  j["converged_count"] = converged;
  j["stalled_count"] = stalled;
  return j;
}

inline nlohmann::json sweep_summary_json(const ExperimentConfig& cfg,
                                         const std::vector<double>& c_values,
                                         const std::vector<SweepRow>& rows) {
  nlohmann::json j;
  j["method"] = to_string(cfg.method.method);
  j["stepper"] = to_string(cfg.stepper.kind);
  j["alpha"] = cfg.stepper.alpha;
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  j["c_values"] = c_values;
  j["rows"] = nlohmann::json::array();
  for (const SweepRow& row : rows) {
    nlohmann::json r;
    r["c"] = row.c;
    r["init_index"] = row.init_index;
    r["final_losses"] = row.summary.final_losses;
    r["final_L0"] = row.summary.final_average_loss;
    r["final_pareto_stat"] = row.summary.final_pareto_stat;
    r["converged"] = row.summary.converged;
    r["stalled"] = row.summary.stalled;
    r["steps_to_converge"] = row.summary.steps_to_converge;
    j["rows"].push_back(std::move(r));
  }
  return j;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cagrad
