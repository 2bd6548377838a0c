// Channel-based experience sharing for decoupled (asynchronous) training.
//
// Each agent dispenses experience records into per-component channels (state,
// action, reward); a compressor concatenates channel entries into transfer
// units of a configurable record count; the migrator forwards units to a
// colocated trainer when one exists and otherwise balances them across
// trainers by least accumulated load; batchers slice or stack delivered
// records into training batches.
//
// The simulation is deterministic. Every transfer costs
// per_message_overhead + bytes / path_bandwidth and occupies its agent's
// sender, so batching amortizes the per-message overhead. The uni-channel
// baseline is the degenerate configuration compress_threshold = 1 (one
// message per channel entry).
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "gmux/mapping.hpp"
#include "gmux/topology.hpp"
#include "gmux/workload.hpp"

namespace gmux {

enum class ChannelKind { State, Action, Reward };
enum class BatchMode { Slice, Stack };

inline std::string to_string(ChannelKind c) {
  switch (c) {
    case ChannelKind::State: return "state";
    case ChannelKind::Action: return "action";
    case ChannelKind::Reward: return "reward";
  }
  return "?";
}

inline const std::vector<ChannelKind>& all_channels() {
  static const std::vector<ChannelKind> channels = {ChannelKind::State, ChannelKind::Action,
                                                    ChannelKind::Reward};
  return channels;
}

inline double channel_bytes(const DrlWorkload& w, ChannelKind c) {
  switch (c) {
    case ChannelKind::State: return w.state_bytes;
    case ChannelKind::Action: return w.action_bytes;
    case ChannelKind::Reward: return w.reward_bytes;
  }
  return 0;
}

struct RecordId {
  int agent_gmi = 0;
  long seq = 0;
  bool operator==(const RecordId&) const = default;
  auto operator<=>(const RecordId&) const = default;
};

struct ExperienceRecord {
  RecordId id;
};

struct ChannelEntry {
  ChannelKind channel = ChannelKind::State;
  RecordId record;
  double bytes = 0;
};

struct TransferUnit {
  ChannelKind channel = ChannelKind::State;
  int src_gmi = 0;
  int dst_gmi = -1;
  int record_count = 0;
  double payload_bytes = 0;  // record_count x per-record channel size
  std::vector<RecordId> records;
};

struct PipelineConfig {
  int compress_threshold = 8;  // records per transfer unit
  BatchMode batch_mode = BatchMode::Stack;
  int target_batch = 32;       // records per training batch
  double per_message_overhead = 1.0;
  unsigned seed = 0;           // staggers agent start phases; 0 keeps them aligned
};

inline void validate_config(const PipelineConfig& c) {
  if (c.compress_threshold < 1) throw std::invalid_argument("compress_threshold must be >= 1");
  if (c.target_batch < 1) throw std::invalid_argument("target_batch must be >= 1");
  if (c.per_message_overhead < 0) throw std::invalid_argument("per_message_overhead must be >= 0");
}

struct TrainingBatch {
  int trainer_gmi = 0;
  double emit_time = 0;
  std::vector<RecordId> records;
};

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Splits records into one entry per channel, order preserved per source.
inline std::map<ChannelKind, std::vector<ChannelEntry>> dispense(
    const std::vector<ExperienceRecord>& records, const DrlWorkload& w) {
  std::map<ChannelKind, std::vector<ChannelEntry>> queues;
  for (ChannelKind c : all_channels()) queues[c];
  for (const auto& r : records)
    for (ChannelKind c : all_channels()) queues[c].push_back({c, r.id, channel_bytes(w, c)});
  return queues;
}

/// Groups channel entries into units of `threshold` records, tail included.
inline std::vector<TransferUnit> compress(const std::vector<ChannelEntry>& entries,
                                          int threshold) {
  if (threshold < 1) throw std::invalid_argument("threshold must be >= 1");
  std::vector<TransferUnit> units;
  for (std::size_t i = 0; i < entries.size(); i += threshold) {
    TransferUnit u;
    u.channel = entries[i].channel;
    u.src_gmi = entries[i].record.agent_gmi;
    for (std::size_t j = i; j < entries.size() && j < i + threshold; ++j) {
      u.records.push_back(entries[j].record);
      u.payload_bytes += entries[j].bytes;
      ++u.record_count;
    }
    units.push_back(std::move(u));
  }
  return units;
}

/// Tracks accumulated records per trainer; ties break toward the lowest id.
class LeastLoadRouter {
 public:
  explicit LeastLoadRouter(const std::vector<int>& trainers) {
    if (trainers.empty()) throw PipelineError("no trainer GMIs in plan");
    for (int t : trainers) load_[t] = 0;
  }
  int pick() const {
    int best = load_.begin()->first;
    for (const auto& [gmi, l] : load_)
      if (l < load_.at(best)) best = gmi;
    return best;
  }
  void add(int trainer, long records) { load_.at(trainer) += records; }
  const std::map<int, long>& loads() const { return load_; }

 private:
  std::map<int, long> load_;
};

namespace detail {

inline int gpu_of(const MappingPlan& plan, int gmi) {
  for (const auto& [gpu, gmis] : plan.gpu_layout)
    for (int id : gmis)
      if (id == gmi) return gpu;
  throw PipelineError("gmi " + std::to_string(gmi) + " not in plan");
}

/// Colocated trainer for an agent's GPU (lowest id), if any.
inline std::optional<int> direct_trainer(const MappingPlan& plan, int agent_gmi) {
  const int gpu = gpu_of(plan, agent_gmi);
  std::optional<int> best;
  for (int gmi : plan.gpu_layout.at(gpu)) {
    const auto& roles = plan.gmi_assignments.at(gmi);
    if (roles.count(Role::Trainer) && (!best || gmi < *best)) best = gmi;
  }
  return best;
}

}  // namespace detail

/// Routes units in order: same-GPU agent-to-trainer units forward directly,
/// the rest go to the trainer with the least accumulated load.
inline std::vector<TransferUnit> migrate(std::vector<TransferUnit> units,
                                         const MappingPlan& plan) {
  LeastLoadRouter router(plan.gmis_with_role(Role::Trainer));
  for (auto& u : units) {
    const auto direct = detail::direct_trainer(plan, u.src_gmi);
    u.dst_gmi = direct ? *direct : router.pick();
    router.add(u.dst_gmi, u.record_count);
  }
  return units;
}

/// Batcher stage. Slice cuts each delivered unit into batches of at most
/// target_batch; stack accumulates across units and releases everything once
/// the target is reached.
class Batcher {
 public:
  Batcher(BatchMode mode, int target) : mode_(mode), target_(target) {
    if (target < 1) throw std::invalid_argument("target_batch must be >= 1");
  }

  std::vector<TrainingBatch> feed(int trainer, const std::vector<RecordId>& records,
                                  double time) {
    std::vector<TrainingBatch> out;
    if (mode_ == BatchMode::Slice) {
      std::size_t i = 0;
      while (i < records.size()) {
        TrainingBatch b{trainer, time, {}};
        for (; i < records.size() && int(b.records.size()) < target_; ++i)
          b.records.push_back(records[i]);
        out.push_back(std::move(b));
      }
    } else {
      pending_.insert(pending_.end(), records.begin(), records.end());
      if (int(pending_.size()) >= target_) {
        out.push_back({trainer, time, std::move(pending_)});
        pending_.clear();
      }
    }
    return out;
  }

  std::optional<TrainingBatch> flush(int trainer, double time) {
    if (pending_.empty()) return std::nullopt;
    TrainingBatch b{trainer, time, std::move(pending_)};
    pending_.clear();
    return b;
  }

 private:
  BatchMode mode_;
  int target_;
  std::vector<RecordId> pending_;
};

/// One-shot batching of already-routed units (per-trainer streams), tails
/// flushed at the end.
inline std::vector<TrainingBatch> batch(const std::vector<TransferUnit>& units, BatchMode mode,
                                        int target_batch) {
  std::map<int, Batcher> batchers;
  std::vector<TrainingBatch> out;
  for (const auto& u : units) {
    auto [it, inserted] = batchers.try_emplace(u.dst_gmi, mode, target_batch);
    auto emitted = it->second.feed(u.dst_gmi, u.records, 0.0);
    out.insert(out.end(), emitted.begin(), emitted.end());
  }
  for (auto& [trainer, b] : batchers)
    if (auto tail = b.flush(trainer, 0.0)) out.push_back(std::move(*tail));
  return out;
}

struct PipelineMetrics {
  double pps = 0;   // records dispensed per unit of simulated (delivery) time
  double ttop = 0;  // training samples consumed per unit of training time
  long records_produced = 0;
  long records_delivered = 0;
  long units_sent = 0;
  long batches_emitted = 0;
  double bytes_moved = 0;
  double transfer_busy_time = 0;  // sum of all transfer costs
  double delivery_makespan = 0;   // last unit arrival
  double training_makespan = 0;   // last training completion
  std::map<int, long> trainer_records;
  std::vector<TrainingBatch> batches;
};

/// Runs the dispenser/compressor/migrator/batcher pipeline. `duration` fixes
/// the experience budget: every agent contributes the records a serving loop
/// at cadence T_s + T_a emits within the window, and the simulation runs until
/// the pipeline drains. Sends occupy their agent, so the production cadence
/// stretches by the transfer costs.
inline PipelineMetrics simulate_pipeline(const DrlWorkload& w, const MappingPlan& plan,
                                         const Topology& topo, const PipelineConfig& config,
                                         double duration) {
  if (duration <= 0) throw std::invalid_argument("duration must be positive");
  validate_config(config);
  const std::vector<int> agents = plan.gmis_with_role(Role::Agent);
  const std::vector<int> trainers = plan.gmis_with_role(Role::Trainer);
  if (agents.empty()) throw PipelineError("no agent GMIs in plan");
  LeastLoadRouter router(trainers);

  const double t_interact = w.interaction_time();
  const double overhead = config.per_message_overhead;
  const int k = config.compress_threshold;

  struct GroupInFlight {
    double send_start = 0;
    double arrive = 0;
    int agent = 0;
    long group_seq = 0;
    std::optional<int> direct_dst;
    std::vector<RecordId> records;
    int unit_count = 0;
    double bytes = 0;
  };
  std::vector<GroupInFlight> groups;

  PipelineMetrics m;
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const int agent = agents[a];
    const auto direct = detail::direct_trainer(plan, agent);
    const double bw = direct ? topo.b1 : topo.b2;

    double phase = 0;
    if (config.seed != 0)
      phase = t_interact * double((config.seed * 2654435761u + unsigned(a) * 40503u) % 1024u) /
              1024.0;

    double t = phase;
    long produced = 0;
    const long budget = long(std::floor((duration - phase) / t_interact));
    std::vector<RecordId> staged;
    long group_seq = 0;
    while (produced < budget) {
      t += t_interact;
      staged.push_back({agent, produced});
      ++produced;
      if (int(staged.size()) == k || produced == budget) {  // tail flushes at the end
        GroupInFlight gr;
        gr.agent = agent;
        gr.group_seq = group_seq++;
        gr.direct_dst = direct;
        gr.records = staged;
        gr.send_start = t;
        for (ChannelKind c : all_channels()) {
          const double payload = channel_bytes(w, c) * double(staged.size());
          const double cost = overhead + payload / bw;
          t += cost;
          m.transfer_busy_time += cost;
          m.bytes_moved += payload;
          ++gr.unit_count;
          gr.bytes += payload;
        }
        gr.arrive = t;
        m.units_sent += gr.unit_count;
        groups.push_back(std::move(gr));
        staged.clear();
      }
    }
    m.records_produced += produced;
  }

  // Route groups in global send order; the three channel units of a group
  // stay together so records land whole at one trainer.
  std::sort(groups.begin(), groups.end(), [](const GroupInFlight& x, const GroupInFlight& y) {
    return std::tie(x.send_start, x.agent, x.group_seq) <
           std::tie(y.send_start, y.agent, y.group_seq);
  });
  for (auto& gr : groups) {
    const int dst = gr.direct_dst ? *gr.direct_dst : router.pick();
    router.add(dst, long(gr.records.size()));
    gr.direct_dst = dst;
  }
  m.trainer_records = router.loads();

  // Deliver in arrival order per trainer and batch.
  std::sort(groups.begin(), groups.end(), [](const GroupInFlight& x, const GroupInFlight& y) {
    return std::tie(x.arrive, x.agent, x.group_seq) < std::tie(y.arrive, y.agent, y.group_seq);
  });
  std::map<int, Batcher> batchers;
  std::map<int, double> last_arrival;
  for (const auto& gr : groups) {
    const int dst = *gr.direct_dst;
    m.delivery_makespan = std::max(m.delivery_makespan, gr.arrive);
    last_arrival[dst] = gr.arrive;
    auto [it, inserted] = batchers.try_emplace(dst, config.batch_mode, config.target_batch);
    for (auto& b : it->second.feed(dst, gr.records, gr.arrive)) m.batches.push_back(std::move(b));
  }
  for (auto& [trainer, b] : batchers)
    if (auto tail = b.flush(trainer, last_arrival[trainer])) m.batches.push_back(std::move(*tail));

  // Trainers consume batches serially at target_batch records per T_t.
  const double per_record_cost = w.trainer.t_iter / double(config.target_batch);
  std::map<int, double> trainer_done;
  std::stable_sort(m.batches.begin(), m.batches.end(),
                   [](const TrainingBatch& x, const TrainingBatch& y) {
                     return std::tie(x.emit_time, x.trainer_gmi) <
                            std::tie(y.emit_time, y.trainer_gmi);
                   });
  for (const auto& b : m.batches) {
    double& done = trainer_done[b.trainer_gmi];
    done = std::max(done, b.emit_time) + double(b.records.size()) * per_record_cost;
    m.training_makespan = std::max(m.training_makespan, done);
    m.records_delivered += long(b.records.size());
  }
  m.batches_emitted = long(m.batches.size());

  if (m.delivery_makespan > 0) m.pps = double(m.records_produced) / m.delivery_makespan;
  if (m.training_makespan > 0) m.ttop = double(m.records_delivered) / m.training_makespan;
  return m;
}

/// The uni-channel baseline of a configuration: per-record sends.
inline PipelineConfig uni_channel(PipelineConfig config) {
  config.compress_threshold = 1;
  return config;
}

}  // namespace gmux
