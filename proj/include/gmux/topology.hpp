// Hardware model for sub-GPU multiplexing: GPUs, MPS/MIG partitions, and the
// two-tier interconnect (host-bounce path between instances on one GPU, ring
// path between GPUs). Layout validation enforces the per-backend partition
// rules; path queries drive every communication cost model in the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gmux {

enum class GpuArch { SM70, SM80 };
enum class Backend { MPS, MIG };
enum class TaskMode { Training, Serving };

inline std::string to_string(GpuArch a) { return a == GpuArch::SM70 ? "sm70" : "sm80"; }
inline std::string to_string(Backend b) { return b == Backend::MPS ? "mps" : "mig"; }

/// Fixed MIG instance profiles for the 8-unit, 40 GB GPU model.
struct MigProfile {
  std::string_view name;
  int units;       // compute slices out of 8
  double mem_gb;
};

inline constexpr int kSmUnitsPerGpu = 8;
inline constexpr int kUsableMigUnits = 7;  // one unit stays reserved

inline const std::vector<MigProfile>& mig_profiles() {
  static const std::vector<MigProfile> profiles = {
      {"1g.5gb", 1, 5.0},  {"2g.10gb", 2, 10.0}, {"3g.20gb", 3, 20.0},
      {"4g.20gb", 4, 20.0}, {"7g.40gb", 7, 40.0},
  };
  return profiles;
}

inline const MigProfile* find_mig_profile(std::string_view name) {
  for (const auto& p : mig_profiles())
    if (p.name == name) return &p;
  return nullptr;
}

inline const MigProfile* match_mig_profile(double sm_share, double mem_gb) {
  for (const auto& p : mig_profiles()) {
    if (std::abs(sm_share - double(p.units) / kSmUnitsPerGpu) < 1e-9 &&
        std::abs(mem_gb - p.mem_gb) < 1e-9)
      return &p;
  }
  return nullptr;
}

struct GpuSpec {
  int id = 0;
  GpuArch arch = GpuArch::SM80;
  int sm_units = kSmUnitsPerGpu;
  double mem_gb = 40.0;

  int usable_units(Backend backend) const {
    if (arch == GpuArch::SM80 && backend == Backend::MIG) return sm_units - 1;
    return sm_units;
  }
};

struct GmiPartition {
  int gmi_id = 0;
  int gpu_id = 0;
  Backend backend = Backend::MPS;
  double sm_share = 1.0;  // fraction of one GPU's compute, in (0,1]
  double mem_gb = 0.0;
};

inline GmiPartition mig_partition(int gmi_id, int gpu_id, std::string_view profile) {
  const MigProfile* p = find_mig_profile(profile);
  if (!p) throw std::invalid_argument("unknown MIG profile: " + std::string(profile));
  return {gmi_id, gpu_id, Backend::MIG, double(p->units) / kSmUnitsPerGpu, p->mem_gb};
}

inline GmiPartition mps_partition(int gmi_id, int gpu_id, double sm_share, double mem_gb) {
  return {gmi_id, gpu_id, Backend::MPS, sm_share, mem_gb};
}

struct Topology {
  std::vector<GpuSpec> gpus;
  std::vector<GmiPartition> partitions;
  double b1 = 1.0;   // inter-GMI host-bounce bandwidth
  double b2 = 30.0;  // inter-GPU ring bandwidth (b2/b1 defaults to 30)

  const GpuSpec* find_gpu(int gpu_id) const {
    for (const auto& g : gpus)
      if (g.id == gpu_id) return &g;
    return nullptr;
  }
  const GmiPartition* find_gmi(int gmi_id) const {
    for (const auto& p : partitions)
      if (p.gmi_id == gmi_id) return &p;
    return nullptr;
  }
  std::vector<int> gmis_on_gpu(int gpu_id) const {
    std::vector<int> ids;
    for (const auto& p : partitions)
      if (p.gpu_id == gpu_id) ids.push_back(p.gmi_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }
};

/// A topology with `num_gpus` SM80 GPUs, no partitions, default bandwidths.
inline Topology default_topology(int num_gpus = 2) {
  Topology topo;
  for (int i = 0; i < num_gpus; ++i) topo.gpus.push_back({i});
  return topo;
}

struct Violation {
  int gpu_id;  // -1 for topology-wide rules
  std::string rule;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks every per-GPU partition set against the backend rules. Violations are
/// data, not failures; the verdict is independent of partition order.
inline ValidationReport validate_layout(const Topology& topo) {
  ValidationReport report;
  auto violate = [&](int gpu, std::string rule) {
    report.violations.push_back({gpu, std::move(rule)});
  };

  if (topo.b1 <= 0 || topo.b2 <= 0) violate(-1, "bandwidths must be positive");

  std::map<int, std::vector<const GmiPartition*>> by_gpu;
  std::map<int, int> id_count;
  for (const auto& p : topo.partitions) id_count[p.gmi_id]++;
  for (const auto& [id, count] : id_count)
    if (count > 1) violate(-1, "duplicate gmi id " + std::to_string(id));

  for (const auto& p : topo.partitions) {
    if (!topo.find_gpu(p.gpu_id)) {
      violate(p.gpu_id, "partition gmi " + std::to_string(p.gmi_id) + " references unknown GPU");
      continue;
    }
    by_gpu[p.gpu_id].push_back(&p);
  }

  for (auto& [gpu_id, parts] : by_gpu) {
    const GpuSpec& gpu = *topo.find_gpu(gpu_id);
    std::sort(parts.begin(), parts.end(),
              [](const GmiPartition* a, const GmiPartition* b) { return a->gmi_id < b->gmi_id; });

    bool mixed = false;
    for (const auto* p : parts) mixed |= p->backend != parts.front()->backend;
    if (mixed) {
      violate(gpu_id, "mixed MPS and MIG backends on one GPU");
      continue;
    }

    const Backend backend = parts.front()->backend;
    bool fields_ok = true;
    for (const auto* p : parts) {
      if (!(p->sm_share > 0 && p->sm_share <= 1.0)) {
        violate(gpu_id, "gmi " + std::to_string(p->gmi_id) + " sm_share outside (0,1]");
        fields_ok = false;
      }
      if (p->mem_gb <= 0) {
        violate(gpu_id, "gmi " + std::to_string(p->gmi_id) + " mem_gb not positive");
        fields_ok = false;
      }
    }
    if (!fields_ok) continue;

    if (backend == Backend::MIG) {
      if (gpu.arch == GpuArch::SM70) {
        violate(gpu_id, "MIG unavailable on sm70 (only MPS)");
        continue;
      }
      if (gpu.sm_units != kSmUnitsPerGpu) {
        violate(gpu_id, "MIG profiles require an 8-unit GPU");
        continue;
      }
      int unit_sum = 0;
      bool profiles_ok = true;
      for (const auto* p : parts) {
        const MigProfile* prof = match_mig_profile(p->sm_share, p->mem_gb);
        if (!prof) {
          violate(gpu_id, "gmi " + std::to_string(p->gmi_id) + " not an allowed MIG profile");
          profiles_ok = false;
          continue;
        }
        unit_sum += prof->units;
      }
      if (profiles_ok && unit_sum > gpu.usable_units(Backend::MIG))
        violate(gpu_id, "exceeds 7 usable units (" + std::to_string(unit_sum) + "/8 allocated)");
    } else {
      double share_sum = 0;
      for (const auto* p : parts) share_sum += p->sm_share;
      if (share_sum > 1.0 + 1e-9)
        violate(gpu_id, "MPS shares exceed 1.0");
    }
  }
  return report;
}

/// Backend policy: sm70 has MPS only; sm80 uses MPS for training (communication
/// efficiency) and MIG for serving (compute isolation).
inline Backend select_backend(GpuArch arch, TaskMode mode) {
  switch (arch) {
    case GpuArch::SM70: return Backend::MPS;
    case GpuArch::SM80: return mode == TaskMode::Training ? Backend::MPS : Backend::MIG;
  }
  throw std::invalid_argument("unsupported GPU architecture");
}

enum class LinkKind { Intra, HostBounce, Ring, LocalReduce };

inline std::string to_string(LinkKind k) {
  switch (k) {
    case LinkKind::Intra: return "intra";
    case LinkKind::HostBounce: return "host_bounce";
    case LinkKind::Ring: return "ring";
    case LinkKind::LocalReduce: return "local_reduce";
  }
  return "?";
}

struct LinkPath {
  LinkKind kind;
  double bandwidth;  // infinite for intra (zero-cost)
};

/// Memory isolation forces a host bounce between GMIs on one GPU; distinct
/// GPUs talk over the ring path. Symmetric in its two endpoints.
inline LinkPath path_bandwidth(const Topology& topo, int src_gmi, int dst_gmi) {
  const GmiPartition* src = topo.find_gmi(src_gmi);
  const GmiPartition* dst = topo.find_gmi(dst_gmi);
  if (!src) throw std::invalid_argument("unknown gmi id " + std::to_string(src_gmi));
  if (!dst) throw std::invalid_argument("unknown gmi id " + std::to_string(dst_gmi));
  if (src_gmi == dst_gmi)
    return {LinkKind::Intra, std::numeric_limits<double>::infinity()};
  if (src->gpu_id == dst->gpu_id) return {LinkKind::HostBounce, topo.b1};
  return {LinkKind::Ring, topo.b2};
}

}  // namespace gmux
