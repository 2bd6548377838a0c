// Report assembly for the CLI: structured (JSON) and text renderings of
// operation outputs. Structured output carries no timestamps or other
// run-varying data, so identical inputs render byte-identically.
#pragma once

#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gmux/channels.hpp"
#include "gmux/mapping.hpp"
#include "gmux/reduction.hpp"
#include "gmux/search.hpp"
#include "gmux/topology.hpp"
#include "gmux/workload.hpp"

namespace gmux {

using json = nlohmann::json;

inline json to_json(const ValidationReport& r) {
  json out;
  out["ok"] = r.ok();
  out["violations"] = json::array();
  for (const auto& v : r.violations)
    out["violations"].push_back({{"gpu", v.gpu_id}, {"rule", v.rule}});
  return out;
}

inline json to_json(const CostEstimate& c) {
  return {{"resource_size", c.resource_size}, {"comm_bytes", c.comm_bytes}};
}

inline json to_json(const MappingPlan& p) {
  json gmis = json::object();
  for (const auto& [gmi, roles] : p.gmi_assignments) {
    json names = json::array();
    for (Role r : roles) names.push_back(to_string(r));
    gmis[std::to_string(gmi)] = names;
  }
  json layout = json::object();
  for (const auto& [gpu, ids] : p.gpu_layout) layout[std::to_string(gpu)] = ids;
  json out;
  out["template"] = to_string(p.template_kind);
  out["gmi_roles"] = gmis;
  out["gpu_layout"] = layout;
  if (p.template_kind == TemplateKind::AsyncDecoupled) {
    out["serving_gpus"] = p.serving_gpus;
    out["training_gpus"] = p.training_gpus;
  }
  return out;
}

inline json trace_digest(const ReductionRun& run, std::size_t head = 12) {
  json events = json::array();
  for (std::size_t i = 0; i < run.trace.size() && i < head; ++i) {
    const auto& e = run.trace[i];
    events.push_back({{"step", e.step},
                      {"src", e.src},
                      {"dst", e.dst},
                      {"bytes", e.bytes},
                      {"link", to_string(e.kind)}});
  }
  return {{"events_total", run.trace.size()}, {"head", events}};
}

inline json to_json(const PipelineMetrics& m) {
  json trainers = json::object();
  for (const auto& [gmi, records] : m.trainer_records)
    trainers[std::to_string(gmi)] = records;
  return {{"pps", m.pps},
          {"ttop", m.ttop},
          {"records_produced", m.records_produced},
          {"records_delivered", m.records_delivered},
          {"units_sent", m.units_sent},
          {"batches_emitted", m.batches_emitted},
          {"bytes_moved", m.bytes_moved},
          {"transfer_busy_time", m.transfer_busy_time},
          {"delivery_makespan", m.delivery_makespan},
          {"training_makespan", m.training_makespan},
          {"trainer_records", trainers}};
}

inline json to_json(const SearchResult& r, bool with_log = true) {
  json out;
  out["feasible"] = r.feasible;
  if (r.feasible) {
    out["num_env"] = r.num_env;
    out["gmis_per_gpu"] = r.gmis_per_gpu;
    out["est_throughput"] = r.est_throughput;
  } else {
    out["reason"] = r.reason;
  }
  if (with_log) {
    json log = json::array();
    for (const auto& v : r.visited) {
      json p = {{"gmis_per_gpu", v.gmis_per_gpu},
                {"num_env", v.num_env},
                {"runnable", v.runnable}};
      if (v.runnable) {
        p["top"] = v.top;
        p["mem"] = v.mem;
      }
      if (v.sat) p["sat"] = *v.sat;
      if (v.acc_top) p["acc_top"] = *v.acc_top;
      if (v.pruned_here) p["pruned"] = true;
      log.push_back(p);
    }
    out["visited"] = log;
  }
  return out;
}

/// Line-delimited trace export: step, src, dst, bytes, link-kind.
inline std::string export_trace(const ReductionRun& run) {
  std::ostringstream out;
  for (const auto& e : run.trace)
    out << e.step << ' ' << e.src << ' ' << e.dst << ' ' << e.bytes << ' ' << to_string(e.kind)
        << '\n';
  return out.str();
}

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

}  // namespace gmux
