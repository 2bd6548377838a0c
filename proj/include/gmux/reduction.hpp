// Cross-GMI gradient reduction. Three strategies over a GMI-to-GPU layout:
//
//   MPR  one host-path ring over every GMI; the CPU carries all hops and
//        performs the accumulation.
//   MRR  t disjoint inter-GPU rings, one GMI per GPU each, then a
//        synchronization ring over the per-ring endpoints. Rings serialize on
//        the shared inter-GPU links, and the strategy rejects layouts where
//        endpoints would collide on one GPU (more rings than GPUs).
//   HAR  per-GPU host-path reduction among colocated GMIs, then one inter-GPU
//        ring over the leader GMI of each GPU.
//
// execute() moves real vectors chunk by chunk and emits a timed event trace;
// the trace latency reproduces the closed-form predict_latency exactly under
// the ideal link model (transfers in one step concurrent, steps sequential).
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmux/topology.hpp"

namespace gmux {

enum class Strategy { MPR, MRR, HAR };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::MPR: return "MPR";
    case Strategy::MRR: return "MRR";
    case Strategy::HAR: return "HAR";
  }
  return "?";
}

struct GmiLayout {
  std::vector<std::vector<int>> mpl;  // per-GPU gmi-id lists

  int num_gpus() const { return int(mpl.size()); }
  std::size_t total_gmis() const {
    std::size_t n = 0;
    for (const auto& l : mpl) n += l.size();
    return n;
  }
  bool uniform() const {
    for (const auto& l : mpl)
      if (l.size() != mpl.front().size()) return false;
    return true;
  }
  std::vector<int> all_gmis() const {
    std::vector<int> out;
    for (const auto& l : mpl) out.insert(out.end(), l.begin(), l.end());
    return out;
  }
  void validate() const {
    if (mpl.empty()) throw std::invalid_argument("layout needs at least one GPU");
    std::set<int> seen;
    for (const auto& l : mpl) {
      if (l.empty()) throw std::invalid_argument("layout has an empty per-GPU list");
      for (int id : l)
        if (!seen.insert(id).second)
          throw std::invalid_argument("duplicate gmi id " + std::to_string(id) + " in layout");
    }
  }
};

struct GradientBuffer {
  int gmi_id = 0;
  std::vector<double> values;
};

struct TraceEvent {
  int step = 0;
  int src = 0;
  int dst = 0;
  double bytes = 0;
  LinkKind kind = LinkKind::HostBounce;
};

struct ReductionRun {
  Strategy strategy = Strategy::MPR;
  std::vector<double> result;
  double latency = 0;            // reduction phases only, comparable to predict_latency
  double broadcast_latency = 0;  // final flush of the result to every GMI
  std::vector<TraceEvent> trace; // includes the broadcast events
};

struct MultiStreamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Strategy selection over the mapping list: a single GPU reduces via the
/// host; mismatched or oversubscribed per-GPU counts go hierarchical;
/// otherwise the disjoint multi-ring scheme applies.
inline Strategy select_strategy(const GmiLayout& layout) {
  layout.validate();
  if (layout.num_gpus() <= 1) return Strategy::MPR;
  std::set<std::size_t> per_gpu;
  for (const auto& l : layout.mpl) per_gpu.insert(l.size());
  if (per_gpu.size() > 1) return Strategy::HAR;
  if (*per_gpu.begin() > std::size_t(layout.num_gpus())) return Strategy::HAR;
  return Strategy::MRR;
}

/// One leader per GPU: the smallest id satisfying id % M == 0 (M = GMIs on
/// that GPU), falling back to the smallest id.
inline std::vector<int> leader_gmis(const GmiLayout& layout) {
  layout.validate();
  std::vector<int> leaders;
  for (const auto& l : layout.mpl) {
    const int m = int(l.size());
    int best = -1;
    for (int id : l)
      if (id % m == 0 && (best < 0 || id < best)) best = id;
    if (best < 0) best = *std::min_element(l.begin(), l.end());
    leaders.push_back(best);
  }
  return leaders;
}

/// Step-1 rings for MRR: ring r takes the r-th GMI of each GPU, rotated to
/// start at GPU r so that ring endpoints (the last member of each ring) land
/// on distinct GPUs whenever t <= g.
inline std::vector<std::vector<int>> mrr_rings(const GmiLayout& layout) {
  layout.validate();
  if (!layout.uniform()) throw MultiStreamError("multiple streams per GPU: layout is not uniform");
  const int g = layout.num_gpus();
  const int t = int(layout.mpl.front().size());
  if (t > g)
    throw MultiStreamError("multiple streams per GPU: " + std::to_string(t) + " rings over " +
                           std::to_string(g) + " GPUs");
  std::vector<std::vector<int>> rings(t);
  for (int r = 0; r < t; ++r)
    for (int j = 0; j < g; ++j) rings[r].push_back(layout.mpl[(r + j) % g][r]);
  return rings;
}

/// Closed-form reduction latencies for a uniform layout (g GPUs, t GMIs each).
inline double predict_latency(Strategy s, int g, int t, double m_p, double b1, double b2) {
  if (g < 1 || t < 1 || m_p <= 0) throw std::invalid_argument("need g >= 1, t >= 1, m_p > 0");
  const double n = double(g) * t;
  switch (s) {
    case Strategy::MPR: return 2.0 * (n - 1) * m_p / (n * b1);
    case Strategy::MRR: return 2.0 * (g - 1) * (t + 1) * m_p / (g * b2);
    case Strategy::HAR:
      return 2.0 * (g - 1) * m_p / (g * b2) + 2.0 * (t - 1) * m_p / (t * b1);
  }
  throw std::invalid_argument("unknown strategy");
}

namespace detail {

// Execution state shared by the reduction phases: working vectors per GMI
// plus the timed trace under construction.
struct ReduceSim {
  std::map<int, std::vector<double>> buf;
  std::vector<TraceEvent> trace;
  int step = 0;
  double m_p = 0;

  static std::pair<std::size_t, std::size_t> chunk_range(std::size_t len, int n, int c) {
    return {len * c / n, len * (c + 1) / n};
  }

  // Bandwidth-optimal ring allreduce with n chunks: n-1 reduce-scatter steps
  // then n-1 allgather steps, every member moving m_p/n bytes per step.
  void chunked_ring_allreduce(const std::vector<int>& members, LinkKind kind, int base_step) {
    const int n = int(members.size());
    if (n < 2) return;
    const std::size_t len = buf.at(members[0]).size();
    const double chunk_bytes = m_p / n;

    for (int s = 0; s < n - 1; ++s) {  // reduce-scatter
      std::vector<std::vector<double>> sent(n);
      for (int i = 0; i < n; ++i) {
        const int c = ((i - s) % n + n) % n;
        auto [lo, hi] = chunk_range(len, n, c);
        const auto& v = buf.at(members[i]);
        sent[i].assign(v.begin() + lo, v.begin() + hi);
      }
      for (int i = 0; i < n; ++i) {
        const int dst = members[(i + 1) % n];
        const int c = ((i - s) % n + n) % n;
        auto [lo, hi] = chunk_range(len, n, c);
        auto& v = buf.at(dst);
        for (std::size_t e = 0; e < sent[i].size(); ++e) v[lo + e] += sent[i][e];
        trace.push_back({base_step + s, members[i], dst, chunk_bytes, kind});
        if (kind == LinkKind::HostBounce)  // accumulation happens CPU-side
          trace.push_back({base_step + s, members[i], dst, chunk_bytes, LinkKind::LocalReduce});
      }
    }
    for (int s = 0; s < n - 1; ++s) {  // allgather
      std::vector<std::vector<double>> sent(n);
      for (int i = 0; i < n; ++i) {
        const int c = ((i + 1 - s) % n + n) % n;
        auto [lo, hi] = chunk_range(len, n, c);
        const auto& v = buf.at(members[i]);
        sent[i].assign(v.begin() + lo, v.begin() + hi);
      }
      for (int i = 0; i < n; ++i) {
        const int dst = members[(i + 1) % n];
        const int c = ((i + 1 - s) % n + n) % n;
        auto [lo, hi] = chunk_range(len, n, c);
        auto& v = buf.at(dst);
        std::copy(sent[i].begin(), sent[i].end(), v.begin() + lo);
        trace.push_back({base_step + (n - 1) + s, members[i], dst, chunk_bytes, kind});
      }
    }
  }

  int ring_steps(const std::vector<int>& members) const {
    return members.size() < 2 ? 0 : 2 * (int(members.size()) - 1);
  }
};

}  // namespace detail

/// Runs one reduction. Every applicable strategy yields the elementwise sum of
/// the input buffers; the trace realizes the strategy's communication pattern
/// and its latency matches predict_latency on uniform layouts. The final
/// broadcast is traced separately and excluded from `latency`.
inline ReductionRun execute(Strategy strategy, const GmiLayout& layout,
                            const std::vector<GradientBuffer>& buffers, const Topology& topo) {
  layout.validate();
  const std::vector<int> members = layout.all_gmis();
  if (buffers.size() != members.size())
    throw std::invalid_argument("need exactly one buffer per GMI in the layout");

  detail::ReduceSim sim;
  std::size_t len = buffers.empty() ? 0 : buffers.front().values.size();
  for (const auto& b : buffers) {
    if (b.values.size() != len) throw std::invalid_argument("mismatched buffer lengths");
    if (!sim.buf.emplace(b.gmi_id, b.values).second)
      throw std::invalid_argument("duplicate buffer for gmi " + std::to_string(b.gmi_id));
  }
  for (int id : members)
    if (!sim.buf.count(id))
      throw std::invalid_argument("missing buffer for gmi " + std::to_string(id));
  sim.m_p = double(len) * sizeof(double);

  const int g = layout.num_gpus();
  int result_holder = layout.mpl[0][0];
  LinkKind broadcast_kind = LinkKind::Ring;

  switch (strategy) {
    case Strategy::MPR: {
      sim.chunked_ring_allreduce(members, LinkKind::HostBounce, sim.step);
      sim.step += sim.ring_steps(members);
      broadcast_kind = LinkKind::HostBounce;
      break;
    }
    case Strategy::MRR: {
      const auto rings = mrr_rings(layout);  // throws on inapplicable layouts
      const int t = int(rings.size());
      for (const auto& ring : rings) {  // serialized on the shared ring links
        sim.chunked_ring_allreduce(ring, LinkKind::Ring, sim.step);
        sim.step += sim.ring_steps(ring);
      }
      // Synchronization ring over per-ring endpoints (last member of each
      // ring). It carries the same schedule as a step-1 ring: 2(g-1) rounds
      // of m_p/g. With a single ring the pass revisits that ring's members.
      std::vector<int> endpoints;
      if (t >= 2)
        for (const auto& ring : rings) endpoints.push_back(ring.back());
      else
        endpoints = rings.front();
      if (g >= 2 && endpoints.size() >= 2) {
        std::vector<double> total(len, 0.0);
        for (const auto& ring : rings) {
          const auto& part = sim.buf.at(ring.back());
          for (std::size_t e = 0; e < len; ++e) total[e] += part[e];
        }
        const int ne = int(endpoints.size());
        for (int s = 0; s < 2 * (g - 1); ++s)
          for (int j = 0; j < ne; ++j)
            sim.trace.push_back(
                {sim.step + s, endpoints[j], endpoints[(j + 1) % ne], sim.m_p / g, LinkKind::Ring});
        sim.step += 2 * (g - 1);
        for (int id : endpoints) sim.buf[id] = total;
      }
      result_holder = endpoints.front();
      break;
    }
    case Strategy::HAR: {
      int widest = 0;  // per-GPU reductions run concurrently
      for (const auto& local : layout.mpl) {
        sim.chunked_ring_allreduce(local, LinkKind::HostBounce, sim.step);
        widest = std::max(widest, sim.ring_steps(local));
      }
      sim.step += widest;
      const auto leaders = leader_gmis(layout);
      sim.chunked_ring_allreduce(leaders, LinkKind::Ring, sim.step);
      sim.step += sim.ring_steps(leaders);
      result_holder = leaders.front();
      break;
    }
  }

  // Latency from the trace: transfers in the same step are concurrent, steps
  // are sequential, host reductions cost nothing.
  auto link_time = [&](const TraceEvent& e) {
    switch (e.kind) {
      case LinkKind::HostBounce: return e.bytes / topo.b1;
      case LinkKind::Ring: return e.bytes / topo.b2;
      default: return 0.0;
    }
  };
  std::map<int, double> step_time;
  for (const auto& e : sim.trace) {
    double& t = step_time[e.step];
    t = std::max(t, link_time(e));
  }
  ReductionRun run;
  run.strategy = strategy;
  for (const auto& [s, t] : step_time) run.latency += t;

  // Broadcast: one event per GMI on the final-stage path, all concurrent.
  const std::vector<double> result = sim.buf.at(result_holder);
  for (int id : members) {
    if (id == result_holder) continue;
    sim.trace.push_back({sim.step, result_holder, id, sim.m_p, broadcast_kind});
    sim.buf[id] = result;
  }
  if (members.size() > 1)
    run.broadcast_latency =
        broadcast_kind == LinkKind::HostBounce ? sim.m_p / topo.b1 : sim.m_p / topo.b2;

  run.result = result;
  run.trace = std::move(sim.trace);
  return run;
}

}  // namespace gmux
