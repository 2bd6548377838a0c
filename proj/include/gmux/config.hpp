// Flat sectioned key/value configuration. Sections: [topology], [workload],
// [model], [search]. Repeated keys are allowed (gpu/gmi entries); entry values
// carry space-separated key=value fields. '#' starts a comment.
//
//   [topology]
//   b1 = 1.0
//   b2 = 30.0
//   gpu = id=0 arch=sm80 sm_units=8 mem_gb=40
//   gmi = id=0 gpu=0 backend=mig profile=3g.20gb
//   gmi = id=1 gpu=0 backend=mps share=0.5 mem_gb=20
//
//   [workload]
//   benchmark = AT        # catalog entry to start from; fields may override
//
//   [model]
//   serving_combw_factor = 2.0
//   gmis_per_gpu = 2
//
//   [search]
//   sat_threshold = 0.1
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmux/channels.hpp"
#include "gmux/mapping.hpp"
#include "gmux/search.hpp"
#include "gmux/topology.hpp"
#include "gmux/workload.hpp"

namespace gmux {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigLine {
  std::string key;
  std::string value;
  int lineno = 0;
};

struct ConfigFile {
  std::map<std::string, std::vector<ConfigLine>> sections;

  bool has(const std::string& section) const { return sections.count(section) > 0; }

  const std::vector<ConfigLine>& lines(const std::string& section) const {
    static const std::vector<ConfigLine> empty;
    auto it = sections.find(section);
    return it == sections.end() ? empty : it->second;
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    for (const auto& l : lines(section))
      if (l.key == key) return l.value;
    return std::nullopt;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, const std::string& what, int lineno) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError("line " + std::to_string(lineno) + ": " + what + ": not a number: '" + v +
                      "'");
  }
}

inline int parse_int(const std::string& v, const std::string& what, int lineno) {
  try {
    std::size_t pos = 0;
    const int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return i;
  } catch (...) {
    throw ConfigError("line " + std::to_string(lineno) + ": " + what + ": not an integer: '" + v +
                      "'");
  }
}

/// Splits "id=0 gpu=0 backend=mig" into field map, diagnosing bad tokens.
inline std::map<std::string, std::string> parse_fields(const std::string& value, int lineno) {
  std::map<std::string, std::string> fields;
  std::istringstream ss(value);
  std::string token;
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + token +
                        "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

inline std::string need_field(const std::map<std::string, std::string>& fields,
                              const std::string& key, int lineno) {
  auto it = fields.find(key);
  if (it == fields.end())
    throw ConfigError("line " + std::to_string(lineno) + ": missing field '" + key + "'");
  return it->second;
}

}  // namespace detail

inline ConfigFile parse_config(std::istream& in, const std::string& origin = "<config>") {
  ConfigFile cfg;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ": line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(origin + ": line " + std::to_string(lineno) + ": empty section name");
      cfg.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ": line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError(origin + ": line " + std::to_string(lineno) + ": entry before any [section]");
    cfg.sections[section].push_back(
        {detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), lineno});
  }
  return cfg;
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path);
  return parse_config(in, path);
}

inline Topology topology_from_config(const ConfigFile& cfg) {
  Topology topo = default_topology(0);
  for (const auto& l : cfg.lines("topology")) {
    if (l.key == "b1") {
      topo.b1 = detail::parse_double(l.value, "b1", l.lineno);
    } else if (l.key == "b2") {
      topo.b2 = detail::parse_double(l.value, "b2", l.lineno);
    } else if (l.key == "gpu") {
      const auto f = detail::parse_fields(l.value, l.lineno);
      GpuSpec gpu;
      gpu.id = detail::parse_int(detail::need_field(f, "id", l.lineno), "gpu id", l.lineno);
      if (auto it = f.find("arch"); it != f.end()) {
        if (it->second == "sm70") gpu.arch = GpuArch::SM70;
        else if (it->second == "sm80") gpu.arch = GpuArch::SM80;
        else throw ConfigError("line " + std::to_string(l.lineno) + ": unknown arch '" + it->second + "'");
      }
      if (auto it = f.find("sm_units"); it != f.end())
        gpu.sm_units = detail::parse_int(it->second, "sm_units", l.lineno);
      if (auto it = f.find("mem_gb"); it != f.end())
        gpu.mem_gb = detail::parse_double(it->second, "mem_gb", l.lineno);
      topo.gpus.push_back(gpu);
    } else if (l.key == "gmi") {
      const auto f = detail::parse_fields(l.value, l.lineno);
      const int id = detail::parse_int(detail::need_field(f, "id", l.lineno), "gmi id", l.lineno);
      const int gpu = detail::parse_int(detail::need_field(f, "gpu", l.lineno), "gmi gpu", l.lineno);
      const std::string backend = detail::need_field(f, "backend", l.lineno);
      if (backend == "mig") {
        const std::string profile = detail::need_field(f, "profile", l.lineno);
        if (!find_mig_profile(profile))
          throw ConfigError("line " + std::to_string(l.lineno) + ": unknown MIG profile '" +
                            profile + "'");
        topo.partitions.push_back(mig_partition(id, gpu, profile));
      } else if (backend == "mps") {
        const double share =
            detail::parse_double(detail::need_field(f, "share", l.lineno), "share", l.lineno);
        double mem = 0;
        if (auto it = f.find("mem_gb"); it != f.end())
          mem = detail::parse_double(it->second, "mem_gb", l.lineno);
        else
          mem = 40.0 * share;  // MPS has no memory QoS; assume proportional
        topo.partitions.push_back(mps_partition(id, gpu, share, mem));
      } else {
        throw ConfigError("line " + std::to_string(l.lineno) + ": unknown backend '" + backend +
                          "' (mps or mig)");
      }
    } else {
      throw ConfigError("line " + std::to_string(l.lineno) + ": unknown topology key '" + l.key +
                        "'");
    }
  }
  return topo;
}

inline DrlWorkload workload_from_config(const ConfigFile& cfg, const std::string& fallback = "AT") {
  DrlWorkload w = load_benchmark(cfg.get("workload", "benchmark").value_or(fallback));
  for (const auto& l : cfg.lines("workload")) {
    if (l.key == "benchmark") continue;
    else if (l.key == "state_bytes") w.state_bytes = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "action_bytes") w.action_bytes = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "reward_bytes") w.reward_bytes = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "model_bytes") w.model_bytes = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "steps_per_train") w.steps_per_train = detail::parse_int(l.value, l.key, l.lineno);
    else if (l.key == "alpha") w.alpha = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "beta") w.beta = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "sim_r_sm") w.simulator.r_sm = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "sim_r_mem") w.simulator.r_mem = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "sim_t_iter") w.simulator.t_iter = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "agent_r_sm") w.agent.r_sm = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "agent_r_mem") w.agent.r_mem = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "agent_t_iter") w.agent.t_iter = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "trainer_r_sm") w.trainer.r_sm = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "trainer_r_mem") w.trainer.r_mem = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "trainer_t_iter") w.trainer.t_iter = detail::parse_double(l.value, l.key, l.lineno);
    else throw ConfigError("line " + std::to_string(l.lineno) + ": unknown workload key '" + l.key + "'");
  }
  validate_workload(w);
  return w;
}

/// Tunable model parameters shared by the planner, pipeline, and search.
struct ModelParams {
  CalibrationParams calibration;
  int gmis_per_gpu = 2;
  double latency_scale = 1000.0;
  PipelineConfig pipeline;
};

inline ModelParams model_from_config(const ConfigFile& cfg) {
  ModelParams m;
  for (const auto& l : cfg.lines("model")) {
    if (l.key == "serving_combw_factor")
      m.calibration.serving_combw_factor = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "training_combw_factor")
      m.calibration.training_combw_factor = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "gmis_per_gpu") m.gmis_per_gpu = detail::parse_int(l.value, l.key, l.lineno);
    else if (l.key == "latency_scale") m.latency_scale = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "compress_threshold")
      m.pipeline.compress_threshold = detail::parse_int(l.value, l.key, l.lineno);
    else if (l.key == "target_batch") m.pipeline.target_batch = detail::parse_int(l.value, l.key, l.lineno);
    else if (l.key == "message_overhead")
      m.pipeline.per_message_overhead = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "seed") m.pipeline.seed = unsigned(detail::parse_int(l.value, l.key, l.lineno));
    else if (l.key == "batch_mode") {
      if (l.value == "slice") m.pipeline.batch_mode = BatchMode::Slice;
      else if (l.value == "stack") m.pipeline.batch_mode = BatchMode::Stack;
      else throw ConfigError("line " + std::to_string(l.lineno) + ": batch_mode must be slice or stack");
    } else {
      throw ConfigError("line " + std::to_string(l.lineno) + ": unknown model key '" + l.key + "'");
    }
  }
  return m;
}

struct SearchSettings {
  SearchConfig config;
  std::optional<std::string> profile_trace;  // recorded-trace profiler input
};

inline SearchSettings search_from_config(const ConfigFile& cfg) {
  SearchSettings s;
  int lo = 128, hi = 16384;
  for (const auto& l : cfg.lines("search")) {
    if (l.key == "sat_threshold")
      s.config.sat_threshold = detail::parse_double(l.value, l.key, l.lineno);
    else if (l.key == "max_gmis_per_gpu")
      s.config.max_gmis_per_gpu = detail::parse_int(l.value, l.key, l.lineno);
    else if (l.key == "num_env_min")
      lo = detail::parse_int(l.value, l.key, l.lineno);
    else if (l.key == "num_env_max")
      hi = detail::parse_int(l.value, l.key, l.lineno);
    else if (l.key == "profile_trace")
      s.profile_trace = l.value;
    else
      throw ConfigError("line " + std::to_string(l.lineno) + ": unknown search key '" + l.key + "'");
  }
  if (lo < 1 || hi < lo) throw ConfigError("search: bad num_env bounds");
  s.config.num_env_grid.clear();
  for (int e = lo; e <= hi; e *= 2) s.config.num_env_grid.push_back(e);
  return s;
}

}  // namespace gmux
