// Workload-aware runtime configuration search. The explorer sweeps GMIs per
// GPU from wide to narrow and the concurrent-environment grid upward, prunes
// an inner sweep once the saturation metric (relative throughput gain per
// relative memory growth) drops under the threshold, and keeps the
// configuration with the best projected system throughput. Profiling is
// pluggable: a synthetic cost model runs everywhere, a recorded-trace profiler
// replays measurements from file.
#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "gmux/reduction.hpp"
#include "gmux/workload.hpp"

namespace gmux {

struct ProfileResult {
  bool runnable = false;
  double top = 0;  // steps/s
  double mem = 0;  // GB
};

class Profiler {
 public:
  virtual ~Profiler() = default;
  virtual ProfileResult profile(const std::string& bench, int gmis_per_gpu,
                                int num_env) const = 0;
};

struct SearchConfig {
  std::vector<int> num_env_grid = {128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  int max_gmis_per_gpu = 10;  // outer loop walks this down to 1
  double sat_threshold = 0.1;
};

inline void validate_config(const SearchConfig& c) {
  if (c.num_env_grid.empty()) throw std::invalid_argument("num_env grid must not be empty");
  if (c.max_gmis_per_gpu < 1) throw std::invalid_argument("max_gmis_per_gpu must be >= 1");
  if (!(c.sat_threshold > 0 && c.sat_threshold < 1))
    throw std::invalid_argument("sat_threshold must lie in (0,1)");
}

/// Sat = relative throughput gain / relative memory growth. A flat numerator
/// saturates regardless of the denominator.
inline double saturation(double top, double pre_top, double mem, double pre_mem) {
  if (pre_top <= 0 || pre_mem <= 0)
    throw std::invalid_argument("saturation needs positive previous trackers");
  const double r_top = (top - pre_top) / pre_top;
  const double r_mem = (mem - pre_mem) / pre_mem;
  if (r_mem == 0) {
    if (r_top == 0) return 0.0;
    return std::copysign(std::numeric_limits<double>::infinity(), r_top);
  }
  return r_top / r_mem;
}

/// Projects a single-GMI throughput to the whole system: linear scaling over
/// GMIs and GPUs, damped by the predicted gradient-synchronization latency of
/// the strategy the layout would select.
struct ThroughputEstimator {
  DrlWorkload workload;
  double b1 = 1.0;
  double b2 = 30.0;
  double latency_scale = 1000.0;  // converts predicted latency into iteration-time units

  double comm_discount(int gmis_per_gpu, int num_gpu) const {
    GmiLayout layout;
    int next = 0;
    for (int g = 0; g < num_gpu; ++g) {
      layout.mpl.emplace_back();
      for (int t = 0; t < gmis_per_gpu; ++t) layout.mpl.back().push_back(next++);
    }
    const Strategy s = select_strategy(layout);
    const double latency =
        predict_latency(s, num_gpu, gmis_per_gpu, workload.model_bytes, b1, b2);
    const double t_iter = workload.iteration_time();
    return t_iter / (t_iter + latency / latency_scale);
  }

  double estimate(int gmis_per_gpu, int num_gpu, double per_gmi_top) const {
    if (gmis_per_gpu < 1 || num_gpu < 1 || per_gmi_top < 0)
      throw std::invalid_argument("estimate needs positive inputs");
    return per_gmi_top * gmis_per_gpu * num_gpu * comm_discount(gmis_per_gpu, num_gpu);
  }
};

/// Desk-scale stand-in for on-device profiling. Throughput rises linearly in
/// num_env up to a per-width knee, then plateaus at a cap proportional to the
/// compute share; memory grows affinely; a configuration runs only when the
/// share clears the floor and the memory fits the share's budget.
struct SyntheticCostModel final : Profiler {
  double peak_top = 120000.0;   // cap at full-GPU share
  double mem_base = 1.0;        // GB
  double mem_per_env = 0.002;   // GB per environment
  double mem_capacity = 40.0;   // GB at full-GPU share
  double min_runnable_share = 0.1;
  int knee_base = 8192;         // knee at full-GPU share, snapped per width
  std::map<int, int> knee_override;       // per gmis_per_gpu
  std::map<int, double> cap_scale;        // per gmis_per_gpu, default 1.0

  int knee(int gmis_per_gpu) const {
    if (auto it = knee_override.find(gmis_per_gpu); it != knee_override.end())
      return it->second;
    int k = 512;
    while (2 * k <= knee_base / gmis_per_gpu && k < 8192) k *= 2;
    return k;
  }

  ProfileResult profile(const std::string& bench, int gmis_per_gpu, int num_env) const override {
    load_benchmark(bench);  // rejects unknown names
    if (gmis_per_gpu < 1 || num_env < 1)
      throw std::invalid_argument("profile needs gmis_per_gpu >= 1 and num_env >= 1");
    const double share = 1.0 / gmis_per_gpu;
    const double mem = mem_base + mem_per_env * num_env;
    if (share < min_runnable_share || mem > mem_capacity * share) return {false, 0, 0};
    double scale = 1.0;
    if (auto it = cap_scale.find(gmis_per_gpu); it != cap_scale.end()) scale = it->second;
    const double cap = peak_top * share * scale;
    const int kn = knee(gmis_per_gpu);
    const double top = cap * std::min(double(num_env), double(kn)) / double(kn);
    return {true, top, mem};
  }
};

/// Replays (bench, gmis_per_gpu, num_env, runnable, top, mem) rows from a
/// whitespace-separated table; unlisted points count as not runnable.
class RecordedTraceProfiler final : public Profiler {
 public:
  static RecordedTraceProfiler from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    RecordedTraceProfiler p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      std::string bench;
      int gpg = 0, env = 0, runnable = 0;
      double top = 0, mem = 0;
      if (!(ss >> bench)) continue;  // blank line
      if (!(ss >> gpg >> env >> runnable >> top >> mem))
        throw std::runtime_error("trace file " + path + ": malformed row at line " +
                                 std::to_string(lineno));
      p.rows_[{bench, gpg, env}] = {runnable != 0, top, mem};
    }
    return p;
  }

  ProfileResult profile(const std::string& bench, int gmis_per_gpu, int num_env) const override {
    auto it = rows_.find({bench, gmis_per_gpu, num_env});
    if (it == rows_.end()) return {false, 0, 0};
    return it->second;
  }

  bool empty() const { return rows_.empty(); }

 private:
  std::map<std::tuple<std::string, int, int>, ProfileResult> rows_;
};

struct VisitedPoint {
  int gmis_per_gpu = 0;
  int num_env = 0;
  bool runnable = false;
  double top = 0;
  double mem = 0;
  std::optional<double> sat;      // absent on the first runnable point of a sweep
  std::optional<double> acc_top;  // absent when skipped or pruned
  bool pruned_here = false;
};

struct SearchResult {
  bool feasible = false;
  std::string reason;  // set when infeasible
  int num_env = 0;
  int gmis_per_gpu = 0;
  double est_throughput = 0;
  std::vector<VisitedPoint> visited;
};

/// Profiling-driven exploration. The outer loop walks GMIs per GPU from
/// max_gmis_per_gpu down to 1; the inner loop walks the num_env grid, skipping
/// non-runnable points, seeding the change trackers at the first runnable
/// point, and breaking once Sat falls under the threshold. Estimation happens
/// only at points that pass the saturation check.
inline SearchResult explore(const Profiler& profiler, const ThroughputEstimator& estimator,
                            const std::string& bench, int num_gpu, const SearchConfig& config) {
  validate_config(config);
  if (num_gpu < 1) throw std::invalid_argument("num_gpu must be >= 1");

  SearchResult result;
  bool any_runnable = false;
  double max_top = -std::numeric_limits<double>::infinity();

  for (int gpg = config.max_gmis_per_gpu; gpg >= 1; --gpg) {
    double pre_top = 0, pre_mem = 0;
    for (int num_env : config.num_env_grid) {
      const ProfileResult p = profiler.profile(bench, gpg, num_env);
      VisitedPoint v{gpg, num_env, p.runnable, p.top, p.mem, {}, {}, false};
      if (!p.runnable) {
        result.visited.push_back(v);
        continue;
      }
      any_runnable = true;
      if (pre_top == 0 && pre_mem == 0) {
        pre_top = p.top;
        pre_mem = p.mem;
        result.visited.push_back(v);
        continue;
      }
      const double sat = saturation(p.top, pre_top, p.mem, pre_mem);
      v.sat = sat;
      pre_top = p.top;
      pre_mem = p.mem;
      if (sat < config.sat_threshold) {
        v.pruned_here = true;
        result.visited.push_back(v);
        break;
      }
      const double acc_top = estimator.estimate(gpg, num_gpu, p.top);
      v.acc_top = acc_top;
      result.visited.push_back(v);
      if (acc_top > max_top) {
        max_top = acc_top;
        result.feasible = true;
        result.num_env = num_env;
        result.gmis_per_gpu = gpg;
        result.est_throughput = acc_top;
      }
    }
  }

  if (!result.feasible)
    result.reason = any_runnable ? "no point passed the saturation gate to be estimated"
                                 : "no runnable configuration";
  return result;
}

}  // namespace gmux
