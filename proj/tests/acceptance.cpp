// Acceptance suite. Each criterion prints one PASS/FAIL line; the binary runs
// under ctest alongside the unit suites.
#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>

#include "gmux/channels.hpp"
#include "gmux/config.hpp"
#include "gmux/mapping.hpp"
#include "gmux/reduction.hpp"
#include "gmux/search.hpp"
#include "gmux/topology.hpp"
#include "gmux/workload.hpp"

using namespace gmux;

namespace {

struct Criterion {
  int id;
  std::string name;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  double elapsed_s() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  void report(bool ok) const {
    std::cout << "[" << (ok ? "PASS" : "FAIL") << "] criterion " << id << ": " << name << " ("
              << elapsed_s() << " s)" << std::endl;
    REQUIRE(ok);
  }
};

std::vector<GradientBuffer> random_buffers(const GmiLayout& layout, std::size_t len,
                                           std::mt19937& rng) {
  std::uniform_real_distribution<double> val(0.1, 1.0);
  std::vector<GradientBuffer> buffers;
  for (int id : layout.all_gmis()) {
    GradientBuffer b{id, std::vector<double>(len)};
    for (auto& v : b.values) v = val(rng);
    buffers.push_back(std::move(b));
  }
  return buffers;
}

std::vector<double> brute_force_sum(const std::vector<GradientBuffer>& buffers) {
  std::vector<double> out(buffers.front().values.size(), 0.0);
  for (const auto& b : buffers)
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += b.values[e];
  return out;
}

bool close(const std::vector<double>& got, const std::vector<double>& want, double rel) {
  if (got.size() != want.size()) return false;
  for (std::size_t e = 0; e < got.size(); ++e)
    if (std::abs(got[e] - want[e]) > rel * std::max(1.0, std::abs(want[e]))) return false;
  return true;
}

GmiLayout uniform_layout(int g, int t) {
  GmiLayout layout;
  int next = 0;
  for (int i = 0; i < g; ++i) {
    layout.mpl.emplace_back();
    for (int j = 0; j < t; ++j) layout.mpl.back().push_back(next++);
  }
  return layout;
}

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(GMUX_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST_CASE("criterion 1: reduction oracle equivalence") {
  Criterion c{1, "1000 random layouts reduce to the brute-force sum (1e-9 rel)"};
  std::mt19937 rng(20240811);
  std::uniform_int_distribution<int> g_dist(1, 4), t_dist(1, 4), len_dist(1, 1024);
  const Topology topo = default_topology(4);
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    GmiLayout layout;
    const int g = g_dist(rng);
    int next = 10 * trial;
    for (int i = 0; i < g; ++i) {
      layout.mpl.emplace_back();
      const int t = t_dist(rng);
      for (int j = 0; j < t; ++j) layout.mpl.back().push_back(next++);
    }
    const auto buffers = random_buffers(layout, std::size_t(len_dist(rng)), rng);
    const auto expected = brute_force_sum(buffers);
    ok = ok && close(execute(Strategy::MPR, layout, buffers, topo).result, expected, 1e-9);
    ok = ok && close(execute(Strategy::HAR, layout, buffers, topo).result, expected, 1e-9);
    if (layout.uniform() && int(layout.mpl.front().size()) <= g)
      ok = ok && close(execute(Strategy::MRR, layout, buffers, topo).result, expected, 1e-9);
  }
  ok = ok && c.elapsed_s() < 10.0;
  c.report(ok);
}

TEST_CASE("criterion 2: strategy selection matches the transcription") {
  Criterion c{2, "selection equals an independent transcription over g,t <= 5"};
  auto oracle = [](const std::vector<std::vector<int>>& mpl) -> std::string {
    std::set<std::size_t> per_gpu;
    if (mpl.size() <= 1) return "MPR";
    for (const auto& li : mpl) per_gpu.insert(li.size());
    if (per_gpu.size() > 1) return "HAR";
    if (*per_gpu.begin() > mpl.size()) return "HAR";
    return "MRR";
  };
  bool ok = to_string(select_strategy(uniform_layout(1, 3))) == "MPR" &&
            to_string(select_strategy(uniform_layout(2, 2))) == "MRR" &&
            to_string(select_strategy(uniform_layout(2, 3))) == "HAR" &&
            to_string(select_strategy({{{0}, {1, 2}}})) == "HAR";
  for (int g = 1; g <= 5 && ok; ++g) {
    std::vector<int> counts(g, 1);
    while (ok) {
      GmiLayout layout;
      int next = 0;
      for (int cnt : counts) {
        layout.mpl.emplace_back();
        for (int i = 0; i < cnt; ++i) layout.mpl.back().push_back(next++);
      }
      ok = to_string(select_strategy(layout)) == oracle(layout.mpl);
      int i = g - 1;
      while (i >= 0 && counts[i] == 5) counts[i--] = 1;
      if (i < 0) break;
      ++counts[i];
    }
  }
  c.report(ok);
}

TEST_CASE("criterion 3: trace latency equals the closed forms") {
  Criterion c{3, "simulated latency == prediction (1e-12) over g in [1,8], t in [1,9]; "
                 "hierarchical beats host-only"};
  Topology topo = default_topology(8);  // b1 = 1, b2 = 30
  std::mt19937 rng(7);
  bool ok = true;
  for (int g = 1; g <= 8 && ok; ++g)
    for (int t = 1; t <= 9 && ok; ++t) {
      const GmiLayout layout = uniform_layout(g, t);
      const std::size_t len = 16;
      const double m_p = len * 8.0;
      const auto buffers = random_buffers(layout, len, rng);
      for (Strategy s : {Strategy::MPR, Strategy::MRR, Strategy::HAR}) {
        if (s == Strategy::MRR && t > g) continue;
        const double predicted = predict_latency(s, g, t, m_p, topo.b1, topo.b2);
        const double simulated = execute(s, layout, buffers, topo).latency;
        ok = ok && std::abs(simulated - predicted) <= 1e-12 * std::max(1.0, predicted);
      }
      if (g >= 2)
        ok = ok && predict_latency(Strategy::HAR, g, t, m_p, 1.0, 30.0) <
                       predict_latency(Strategy::MPR, g, t, m_p, 1.0, 30.0);
    }
  c.report(ok);
}

TEST_CASE("criterion 4: analytical ratio reproduction") {
  Criterion c{4, "serving ratio in [2.3,2.7], training ratio in [4.5,5.5], "
                 "penalties 0.16/0.47 (+-0.02)"};
  const DrlWorkload w = load_benchmark("AT");
  const double serving = serving_throughput_ratio(w);
  const double training = training_throughput_ratio(w);
  const double pen_serving = serving_colocation_penalty(w);
  const double pen_training = training_colocation_penalty(w);
  bool ok = serving >= 2.3 && serving <= 2.7;
  ok = ok && training >= 4.5 && training <= 5.5;
  ok = ok && std::abs(pen_serving - 0.16) <= 0.02;
  ok = ok && std::abs(pen_training - 0.47) <= 0.02;
  ok = ok && c.elapsed_s() < 1.0;
  c.report(ok);
}

TEST_CASE("criterion 5: search equals exhaustive enumeration") {
  Criterion c{5, "explore matches the unpruned argmax on 20+ synthetic models"};
  std::mt19937 rng(424242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const SearchConfig cfg;
  bool ok = true;
  for (int trial = 0; trial < 24 && ok; ++trial) {
    SyntheticCostModel model;
    model.peak_top = 5e4 + u(rng) * 2e5;
    model.mem_base = 0.25 + u(rng) * 2.0;
    model.mem_per_env = 0.0005 + u(rng) * 0.004;
    model.min_runnable_share = 0.05 + u(rng) * 0.3;
    model.mem_capacity = u(rng) < 0.5
                             ? 1e9
                             : 10.0 * (model.mem_base + 512.0 * model.mem_per_env) *
                                   (1.0 + u(rng) * 20.0);
    for (int g = 1; g <= 10; ++g) {
      model.knee_override[g] = 1 << (9 + int(u(rng) * 4.99));
      model.cap_scale[g] = 0.8 + u(rng) * 0.4;
    }
    ThroughputEstimator est{load_benchmark("AT"), 1.0, 30.0, 100.0 + u(rng) * 1000.0};
    const int num_gpu = 1 + trial % 4;

    const SearchResult got = explore(model, est, "AT", num_gpu, cfg);
    SearchResult want;
    double max_top = -1e300;
    for (int gpg = cfg.max_gmis_per_gpu; gpg >= 1; --gpg)
      for (int env : cfg.num_env_grid) {
        const ProfileResult r = model.profile("AT", gpg, env);
        if (!r.runnable) continue;
        const double acc = est.estimate(gpg, num_gpu, r.top);
        if (acc > max_top) {
          max_top = acc;
          want.feasible = true;
          want.num_env = env;
          want.gmis_per_gpu = gpg;
        }
      }
    ok = got.feasible == want.feasible &&
         (!want.feasible ||
          (got.num_env == want.num_env && got.gmis_per_gpu == want.gmis_per_gpu));
  }
  ok = ok && c.elapsed_s() < 5.0;
  c.report(ok);
}

TEST_CASE("criterion 6: pipeline conservation and channel benefit") {
  Criterion c{6, "record conservation exact; batched sends never lose to per-record sends"};
  const DrlWorkload w = load_benchmark("AT");
  const Topology topo = default_topology(2);
  std::mt19937 rng(99);
  bool ok = true;
  for (int trial = 0; trial < 16 && ok; ++trial) {
    PipelineConfig cfg;
    cfg.compress_threshold = std::uniform_int_distribution<int>(2, 12)(rng);
    cfg.target_batch = std::uniform_int_distribution<int>(1, 48)(rng);
    cfg.batch_mode = trial % 2 == 0 ? BatchMode::Stack : BatchMode::Slice;
    cfg.per_message_overhead =
        trial % 4 == 0 ? 0.0 : std::uniform_real_distribution<double>(0.05, 2.0)(rng);
    const MappingPlan plan = build_plan(TemplateKind::AsyncDecoupled, topo, w,
                                        std::uniform_int_distribution<int>(1, 3)(rng));
    const double duration = std::uniform_real_distribution<double>(300.0, 1500.0)(rng);

    const PipelineMetrics mcc = simulate_pipeline(w, plan, topo, cfg, duration);
    const PipelineMetrics ucc = simulate_pipeline(w, plan, topo, uni_channel(cfg), duration);

    for (const PipelineMetrics* m : {&mcc, &ucc}) {
      ok = ok && m->records_delivered == m->records_produced;
      std::set<std::pair<int, long>> seen;
      for (const auto& b : m->batches)
        for (const auto& r : b.records) ok = ok && seen.insert({r.agent_gmi, r.seq}).second;
      ok = ok && long(seen.size()) == m->records_produced;
    }
    if (cfg.per_message_overhead > 0)
      ok = ok && mcc.pps >= ucc.pps * (1.0 - 1e-12);
    else
      ok = ok && std::abs(mcc.pps - ucc.pps) / ucc.pps < 1e-6;
  }
  ok = ok && c.elapsed_s() < 10.0;
  c.report(ok);
}

TEST_CASE("criterion 7: MIG decision table matches the enumerated oracle") {
  Criterion c{7, "every profile multiset on one GPU: valid iff unit sum <= 7"};
  const auto& profiles = mig_profiles();
  bool ok = true;
  long cases = 0;
  // Counts per profile, at most 8 instances total.
  std::array<int, 5> counts{};
  auto total = [&] { int n = 0; for (int x : counts) n += x; return n; };
  while (true) {
    if (total() <= 8) {
      Topology topo = default_topology(1);
      int id = 0, unit_sum = 0;
      for (std::size_t p = 0; p < profiles.size(); ++p)
        for (int i = 0; i < counts[p]; ++i) {
          topo.partitions.push_back(mig_partition(id++, 0, profiles[p].name));
          unit_sum += profiles[p].units;
        }
      const bool expected_valid = unit_sum <= 7;
      ok = ok && validate_layout(topo).ok() == expected_valid;
      ++cases;
    }
    int i = 4;
    while (i >= 0 && counts[i] == 8) counts[i--] = 0;
    if (i < 0) break;
    ++counts[i];
  }
  ok = ok && cases > 1000;
  c.report(ok);
}

TEST_CASE("criterion 8: byte-identical structured reports") {
  Criterion c{8, "two runs of every command produce identical structured output"};
  std::ofstream("acc_topology.cfg") << "[topology]\n"
                                       "gpu = id=0 arch=sm80\n"
                                       "gpu = id=1 arch=sm80\n"
                                       "gmi = id=0 gpu=0 backend=mig profile=3g.20gb\n"
                                       "gmi = id=1 gpu=1 backend=mig profile=7g.40gb\n";
  const std::vector<std::string> commands = {
      "validate --topology acc_topology.cfg --format structured",
      "plan --mode serving --format structured",
      "plan --mode sync_train --format structured",
      "plan --mode async_train --format structured",
      "reduce --layout [[0,1],[2,3]] --payload 240 --format structured",
      "pipeline --duration 400 --format structured",
      "search --format structured",
  };
  bool ok = true;
  for (const auto& cmd : commands) {
    const RunResult a = run_cli(cmd);
    const RunResult b = run_cli(cmd);
    ok = ok && a.exit_code == b.exit_code && a.output == b.output && !a.output.empty();
  }
  std::remove("acc_topology.cfg");
  c.report(ok);
}
