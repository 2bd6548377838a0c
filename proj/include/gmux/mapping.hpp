// Task-to-GMI mapping analysis. Cost tables compare dedicated against
// colocated instance templates for serving and synchronized training;
// throughput estimators turn (resource size, communication size) pairs into
// system throughput; build_plan materializes a template onto a topology.
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmux/topology.hpp"
#include "gmux/workload.hpp"

namespace gmux {

enum class TemplateKind { TDG, TCG, TDG_EX, TCG_EX, AsyncDecoupled };
enum class RunMode { Serving, SyncTrain, AsyncTrain };

inline std::string to_string(TemplateKind t) {
  switch (t) {
    case TemplateKind::TDG: return "TDG";
    case TemplateKind::TCG: return "TCG";
    case TemplateKind::TDG_EX: return "TDG_EX";
    case TemplateKind::TCG_EX: return "TCG_EX";
    case TemplateKind::AsyncDecoupled: return "async_decoupled";
  }
  return "?";
}

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Serving: return "serving";
    case RunMode::SyncTrain: return "sync_train";
    case RunMode::AsyncTrain: return "async_train";
  }
  return "?";
}

struct CostEstimate {
  double resource_size = 0;  // R, dominant-resource units
  double comm_bytes = 0;     // COM, bytes per iteration
  double throughput = 0;
};

// Closed forms over raw profile numbers. Kept separate from the workload
// wrappers so the algebra is checkable against termwise recomputation.

inline double serving_resource_dedicated(double t_s, double r_s, double t_a, double r_a,
                                         double alpha) {
  return (t_s * r_s + t_a * alpha * r_a) / (t_s + t_a);
}

// The (T_s+T_a) normalization cancels exactly for the colocated template.
inline double serving_resource_colocated(double r_s, double r_a) {
  return std::max(r_s, r_a);
}

inline double serving_comm_dedicated(double s, double a, double w) { return 2 * s + a + w; }

inline double training_resource_dedicated(double t_s, double r_s, double t_a, double r_a,
                                          double alpha, double t_t, double r_t, double beta) {
  return (t_s * r_s + t_a * alpha * r_a + t_t * beta * r_t) / (t_s + t_a + t_t);
}

inline double training_resource_colocated(double r_s, double r_a, double r_t) {
  return std::max({r_s, r_a, r_t});
}

inline double allreduce_bytes(int n_gmis, double model_bytes) {
  return 2.0 * (n_gmis - 1) * model_bytes / n_gmis;
}

inline double training_comm_dedicated(int m, double s, double a, double w, double model_bytes,
                                      int n_gmis) {
  return m * (s + a + w) + model_bytes + allreduce_bytes(n_gmis, model_bytes);
}

inline CostEstimate serving_cost(TemplateKind tpl, const DrlWorkload& w) {
  const RoleProfile& sim = w.simulator;
  const RoleProfile& ag = w.agent;
  switch (tpl) {
    case TemplateKind::TDG:
      return {serving_resource_dedicated(sim.t_iter, sim.r_sm, ag.t_iter, ag.r_sm, w.alpha),
              serving_comm_dedicated(w.state_bytes, w.action_bytes, w.reward_bytes)};
    case TemplateKind::TCG:
      return {serving_resource_colocated(sim.r_sm, ag.r_sm), 0.0};
    default:
      throw std::invalid_argument("serving_cost expects TDG or TCG");
  }
}

inline CostEstimate training_cost(TemplateKind tpl, const DrlWorkload& w, int n_gmis) {
  if (n_gmis < 1) throw std::invalid_argument("n_gmis must be >= 1");
  const RoleProfile& sim = w.simulator;
  const RoleProfile& ag = w.agent;
  const RoleProfile& tr = w.trainer;
  switch (tpl) {
    case TemplateKind::TDG_EX:
      return {training_resource_dedicated(sim.t_iter, sim.r_sm, ag.t_iter, ag.r_sm, w.alpha,
                                          tr.t_iter, tr.r_sm, w.beta),
              training_comm_dedicated(w.steps_per_train, w.state_bytes, w.action_bytes,
                                      w.reward_bytes, w.model_bytes, n_gmis)};
    case TemplateKind::TCG_EX:
      return {training_resource_colocated(sim.r_sm, ag.r_sm, tr.r_sm),
              allreduce_bytes(n_gmis, w.model_bytes)};
    default:
      throw std::invalid_argument("training_cost expects TDG_EX or TCG_EX");
  }
}

/// TOP = (R_all / R) * 1 / (T_s + T_a + COM/BW)
inline double serving_throughput(const CostEstimate& cost, const DrlWorkload& w, double r_all,
                                 double bandwidth) {
  if (bandwidth <= 0 || r_all <= 0) throw std::invalid_argument("r_all and bandwidth must be positive");
  return (r_all / cost.resource_size) /
         (w.interaction_time() + cost.comm_bytes / bandwidth);
}

/// TOP = (R_all / R) * 1 / (T_s + T_a + T_t + COM/BW)
inline double training_throughput(const CostEstimate& cost, const DrlWorkload& w, double r_all,
                                  double bandwidth) {
  if (bandwidth <= 0 || r_all <= 0) throw std::invalid_argument("r_all and bandwidth must be positive");
  return (r_all / cost.resource_size) /
         (w.iteration_time() + cost.comm_bytes / bandwidth);
}

/// Profiled COM/BW approximations, exposed as tunable model parameters:
/// dedicated-template communication costs about 2x one interaction in serving
/// and about 7x one iteration in training.
struct CalibrationParams {
  double serving_combw_factor = 2.0;
  double training_combw_factor = 7.0;
};

/// Bandwidth at which `com_bytes` takes `factor * reference_time` to move.
inline double calibrated_bandwidth(double com_bytes, double factor, double reference_time) {
  if (com_bytes <= 0 || factor <= 0 || reference_time <= 0)
    throw std::invalid_argument("calibration inputs must be positive");
  return com_bytes / (factor * reference_time);
}

/// TCG over TDG serving throughput under the calibrated bandwidth (about 2.5x).
inline double serving_throughput_ratio(const DrlWorkload& w, const CalibrationParams& cal = {}) {
  const CostEstimate tdg = serving_cost(TemplateKind::TDG, w);
  const CostEstimate tcg = serving_cost(TemplateKind::TCG, w);
  const double bw =
      calibrated_bandwidth(tdg.comm_bytes, cal.serving_combw_factor, w.interaction_time());
  const double r_all = 1.0;  // cancels in the ratio
  return serving_throughput(tcg, w, r_all, bw) / serving_throughput(tdg, w, r_all, bw);
}

/// TCG_EX over TDG_EX training throughput at n = 1 under the calibrated
/// bandwidth (about 5x); with one pipeline the colocated template moves nothing.
inline double training_throughput_ratio(const DrlWorkload& w, const CalibrationParams& cal = {}) {
  const CostEstimate tdg = training_cost(TemplateKind::TDG_EX, w, 1);
  const CostEstimate tcg = training_cost(TemplateKind::TCG_EX, w, 1);
  const double bw =
      calibrated_bandwidth(tdg.comm_bytes, cal.training_combw_factor, w.iteration_time());
  const double r_all = 1.0;
  return training_throughput(tcg, w, r_all, bw) / training_throughput(tdg, w, r_all, bw);
}

/// Relative resource cost of colocating simulator and agent (about 0.16).
inline double serving_colocation_penalty(const DrlWorkload& w) {
  return serving_cost(TemplateKind::TCG, w).resource_size /
             serving_cost(TemplateKind::TDG, w).resource_size -
         1.0;
}

/// Relative resource cost of the holistic training GMI (about 0.47).
inline double training_colocation_penalty(const DrlWorkload& w) {
  return training_cost(TemplateKind::TCG_EX, w, 1).resource_size /
             training_cost(TemplateKind::TDG_EX, w, 1).resource_size -
         1.0;
}

inline TemplateKind select_template(RunMode mode) {
  switch (mode) {
    case RunMode::Serving: return TemplateKind::TCG;
    case RunMode::SyncTrain: return TemplateKind::TCG_EX;
    case RunMode::AsyncTrain: return TemplateKind::AsyncDecoupled;
  }
  throw std::invalid_argument("unknown run mode");
}

struct MappingPlan {
  TemplateKind template_kind = TemplateKind::TCG;
  std::map<int, std::set<Role>> gmi_assignments;
  std::map<int, std::vector<int>> gpu_layout;  // gpu_id -> ordered gmi ids
  std::vector<int> serving_gpus;               // async only
  std::vector<int> training_gpus;              // async only

  std::vector<std::vector<int>> mpl() const {
    std::vector<std::vector<int>> out;
    for (const auto& [gpu, gmis] : gpu_layout) out.push_back(gmis);
    return out;
  }
  std::vector<int> gmis_with_role(Role r) const {
    std::vector<int> out;
    for (const auto& [gmi, roles] : gmi_assignments)
      if (roles.count(r)) out.push_back(gmi);
    return out;
  }
};

struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Materializes a mapping template onto a topology; GMI ids run sequentially
/// in GPU-major order. Dedicated templates need the GMI count divisible by the
/// pipeline size; the async split gives serving the extra GPU when odd.
inline MappingPlan build_plan(TemplateKind tpl, const Topology& topo, const DrlWorkload& w,
                              int gmis_per_gpu) {
  (void)w;
  if (gmis_per_gpu < 1) throw std::invalid_argument("gmis_per_gpu must be >= 1");
  ValidationReport report = validate_layout(topo);
  if (!report.ok())
    throw PlanError("topology does not validate: " + report.violations.front().rule);
  if (topo.gpus.empty()) throw PlanError("topology has no GPUs");

  std::vector<int> gpu_ids;
  for (const auto& g : topo.gpus) gpu_ids.push_back(g.id);
  std::sort(gpu_ids.begin(), gpu_ids.end());

  MappingPlan plan;
  plan.template_kind = tpl;
  int next_gmi = 0;
  auto add_gmi = [&](int gpu, std::set<Role> roles) {
    plan.gpu_layout[gpu].push_back(next_gmi);
    plan.gmi_assignments[next_gmi] = std::move(roles);
    ++next_gmi;
  };

  const std::set<Role> serving_roles = {Role::Simulator, Role::Agent};
  const std::set<Role> holistic_roles = {Role::Simulator, Role::Agent, Role::Trainer};

  switch (tpl) {
    case TemplateKind::TCG:
      for (int gpu : gpu_ids)
        for (int i = 0; i < gmis_per_gpu; ++i) add_gmi(gpu, serving_roles);
      break;
    case TemplateKind::TCG_EX:
      for (int gpu : gpu_ids)
        for (int i = 0; i < gmis_per_gpu; ++i) add_gmi(gpu, holistic_roles);
      break;
    case TemplateKind::TDG:
    case TemplateKind::TDG_EX: {
      const std::vector<Role> cycle = tpl == TemplateKind::TDG
                                          ? std::vector<Role>{Role::Simulator, Role::Agent}
                                          : std::vector<Role>{Role::Simulator, Role::Agent,
                                                              Role::Trainer};
      const std::size_t total = gpu_ids.size() * std::size_t(gmis_per_gpu);
      if (total % cycle.size() != 0)
        throw PlanError("dedicated template needs the GMI count divisible by " +
                        std::to_string(cycle.size()));
      std::size_t k = 0;
      for (int gpu : gpu_ids)
        for (int i = 0; i < gmis_per_gpu; ++i) add_gmi(gpu, {cycle[k++ % cycle.size()]});
      break;
    }
    case TemplateKind::AsyncDecoupled: {
      if (gpu_ids.size() < 2)
        throw PlanError("not enough GPUs for the decoupled serving/training split");
      const std::size_t n_serving = (gpu_ids.size() + 1) / 2;
      for (std::size_t i = 0; i < gpu_ids.size(); ++i) {
        const bool serving = i < n_serving;
        (serving ? plan.serving_gpus : plan.training_gpus).push_back(gpu_ids[i]);
        for (int j = 0; j < gmis_per_gpu; ++j)
          add_gmi(gpu_ids[i], serving ? serving_roles : std::set<Role>{Role::Trainer});
      }
      break;
    }
  }
  return plan;
}

}  // namespace gmux
