// Workload descriptors for heterogeneous RL pipelines: per-role resource and
// timing profiles, payload sizes, and the built-in benchmark catalog.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gmux {

enum class Role { Simulator, Agent, Trainer };
enum class ResourceKind { SM, Memory };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::Simulator: return "simulator";
    case Role::Agent: return "agent";
    case Role::Trainer: return "trainer";
  }
  return "?";
}

struct RoleProfile {
  Role role = Role::Simulator;
  double r_sm = 1.0;   // fraction of one GPU's compute when run exclusively
  double r_mem = 0.5;  // fraction of one GPU's memory
  double t_iter = 1.0; // execution time per iteration, abstract units
};

struct DrlWorkload {
  std::string name;
  double state_bytes = 0;   // S
  double action_bytes = 0;  // A
  double reward_bytes = 0;  // W
  double model_bytes = 0;   // M_p
  int steps_per_train = 1;  // m
  double alpha = 0.2;       // sharing ratio factor, agents
  double beta = 0.3;        // sharing ratio factor, trainers
  std::vector<int> policy_dims;
  RoleProfile simulator{Role::Simulator, 1.0, 0.5, 6.0};
  RoleProfile agent{Role::Agent, 0.1, 0.05, 1.0};
  RoleProfile trainer{Role::Trainer, 0.2, 0.1, 2.0};

  const RoleProfile& profile(Role r) const {
    switch (r) {
      case Role::Simulator: return simulator;
      case Role::Agent: return agent;
      case Role::Trainer: return trainer;
    }
    throw std::invalid_argument("unknown role");
  }

  double record_bytes() const { return state_bytes + action_bytes + reward_bytes; }
  double interaction_time() const { return simulator.t_iter + agent.t_iter; }           // T_s + T_a
  double iteration_time() const { return interaction_time() + trainer.t_iter; }         // T_s + T_a + T_t
};

inline void validate_workload(const DrlWorkload& w) {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("workload: ") + what);
  };
  check(w.state_bytes > 0 && w.action_bytes > 0 && w.reward_bytes > 0, "S, A, W must be positive");
  check(w.model_bytes > 0, "model size must be positive");
  check(w.steps_per_train >= 1, "steps_per_train must be >= 1");
  check(w.alpha > 0 && w.alpha <= 1, "alpha outside (0,1]");
  check(w.beta > 0 && w.beta <= 1, "beta outside (0,1]");
  for (Role r : {Role::Simulator, Role::Agent, Role::Trainer}) {
    const RoleProfile& p = w.profile(r);
    check(p.r_sm > 0 && p.r_sm <= 1, "r_sm outside (0,1]");
    check(p.r_mem > 0 && p.r_mem <= 1, "r_mem outside (0,1]");
    check(p.t_iter > 0, "t_iter must be positive");
  }
}

/// Dominant resource rule: SM wins ties.
inline ResourceKind dominant_resource(double r_sm, double r_mem) {
  if (!(r_sm > 0 && r_sm <= 1) || !(r_mem > 0 && r_mem <= 1))
    throw std::invalid_argument("resource fractions must lie in (0,1]");
  return r_sm >= r_mem ? ResourceKind::SM : ResourceKind::Memory;
}

/// Parameter count of a dense MLP with bias.
inline std::size_t dense_param_count(std::span<const int> dims) {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    total += std::size_t(dims[i] + 1) * std::size_t(dims[i + 1]);
  return total;
}

/// Parameters of the actor-critic pair: the policy net plus a value net with
/// the same hidden stack and a scalar head.
inline std::size_t policy_value_param_count(std::span<const int> dims) {
  if (dims.size() < 2) throw std::invalid_argument("policy needs at least two layer widths");
  std::vector<int> value_dims(dims.begin(), dims.end());
  value_dims.back() = 1;
  return dense_param_count(dims) + dense_param_count(value_dims);
}

namespace detail {

inline DrlWorkload make_benchmark(std::string name, std::vector<int> dims) {
  DrlWorkload w;
  w.name = std::move(name);
  w.policy_dims = std::move(dims);
  constexpr double kBytesPerScalar = 4.0;  // fp32 tensors
  w.state_bytes = w.policy_dims.front() * kBytesPerScalar;
  w.action_bytes = w.policy_dims.back() * kBytesPerScalar;
  w.reward_bytes = kBytesPerScalar;
  w.model_bytes = double(policy_value_param_count(w.policy_dims)) * kBytesPerScalar;
  w.steps_per_train = 32;
  return w;
}

}  // namespace detail

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {"AT", "AY", "BB", "FC", "HM", "SH"};
  return names;
}

/// Benchmark catalog. Role profiles encode the profiled ratios
/// R_s = 10*R_a = 5*R_t and T_s = 6*T_a = 3*T_t with alpha 0.2, beta 0.3.
inline DrlWorkload load_benchmark(std::string_view name) {
  if (name == "AT") return detail::make_benchmark("AT", {60, 256, 128, 64, 8});
  if (name == "AY") return detail::make_benchmark("AY", {48, 256, 128, 64, 12});
  if (name == "BB") return detail::make_benchmark("BB", {24, 256, 128, 64, 3});
  if (name == "FC") return detail::make_benchmark("FC", {23, 256, 128, 64, 9});
  if (name == "HM") return detail::make_benchmark("HM", {108, 200, 400, 100, 21});
  if (name == "SH") return detail::make_benchmark("SH", {211, 512, 512, 512, 256, 20});
  throw std::invalid_argument("unknown benchmark: " + std::string(name));
}

}  // namespace gmux
