// gmux: placement planning and simulation for sub-GPU multiplexed RL
// workloads. Subcommands: validate, plan, reduce, pipeline, search.
//
// Exit codes: 0 ok, 1 domain violation or infeasible, 2 usage or I/O error.
#include <cctype>
#include <cmath>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmux/config.hpp"
#include "gmux/report.hpp"

namespace {

using namespace gmux;

struct Options {
  std::string topology_path;
  std::string workload = "AT";
  std::string mode = "serving";
  std::string format = "text";
  std::optional<double> b1, b2;
  std::optional<double> sat_threshold;
  double duration = 2000.0;
  std::string force_strategy;
  std::string layout_text;
  double payload = 0;  // 0: use the workload's model size
  bool full_trace = false;
};

struct Context {
  ConfigFile cfg;
  Topology topo;
  DrlWorkload workload;
  ModelParams model;
  SearchSettings search;
};

Context make_context(const Options& opt, bool need_topology_file) {
  Context ctx;
  if (!opt.topology_path.empty()) {
    ctx.cfg = load_config(opt.topology_path);
  } else if (need_topology_file) {
    throw ConfigError("config not found: --topology is required for this command");
  }
  ctx.topo = ctx.cfg.has("topology") ? topology_from_config(ctx.cfg) : default_topology(2);
  if (ctx.topo.gpus.empty()) ctx.topo = default_topology(2);
  if (opt.b1) ctx.topo.b1 = *opt.b1;
  if (opt.b2) ctx.topo.b2 = *opt.b2;

  // --workload takes a catalog name or a config file with a [workload] section.
  if (std::ifstream probe(opt.workload); probe.good()) {
    ctx.workload = workload_from_config(load_config(opt.workload));
  } else if (ctx.cfg.has("workload") && opt.workload == "AT") {
    ctx.workload = workload_from_config(ctx.cfg);
  } else {
    ctx.workload = load_benchmark(opt.workload);
  }

  ctx.model = model_from_config(ctx.cfg);
  ctx.search = search_from_config(ctx.cfg);
  if (opt.sat_threshold) ctx.search.config.sat_threshold = *opt.sat_threshold;
  return ctx;
}

RunMode parse_mode(const std::string& mode) {
  if (mode == "serving") return RunMode::Serving;
  if (mode == "sync_train") return RunMode::SyncTrain;
  if (mode == "async_train") return RunMode::AsyncTrain;
  throw CLI::ValidationError("--mode", "expected serving, sync_train, or async_train");
}

std::vector<std::vector<int>> parse_layout(const std::string& text) {
  std::vector<std::vector<int>> mpl;
  std::size_t i = 0;
  auto skip = [&] { while (i < text.size() && std::isspace(unsigned(text[i]))) ++i; };
  auto expect = [&](char c) {
    skip();
    if (i >= text.size() || text[i] != c)
      throw std::invalid_argument("bad layout: expected '" + std::string(1, c) + "' in " + text);
    ++i;
  };
  expect('[');
  skip();
  while (i < text.size() && text[i] != ']') {
    expect('[');
    std::vector<int> gpu;
    skip();
    while (i < text.size() && text[i] != ']') {
      std::size_t used = 0;
      gpu.push_back(std::stoi(text.substr(i), &used));
      i += used;
      skip();
      if (i < text.size() && text[i] == ',') { ++i; skip(); }
    }
    expect(']');
    mpl.push_back(std::move(gpu));
    skip();
    if (i < text.size() && text[i] == ',') { ++i; skip(); }
  }
  expect(']');
  return mpl;
}

void emit(const Options& opt, const json& structured, const std::string& text) {
  if (opt.format == "structured")
    std::cout << structured.dump(2) << '\n';
  else
    std::cout << text;
}

int cmd_validate(const Options& opt) {
  Context ctx = make_context(opt, /*need_topology_file=*/true);
  const ValidationReport report = validate_layout(ctx.topo);
  std::ostringstream text;
  if (report.ok()) {
    text << "layout ok: " << ctx.topo.gpus.size() << " GPU(s), " << ctx.topo.partitions.size()
         << " partition(s)\n";
  } else {
    text << "layout invalid: " << report.violations.size() << " violation(s)\n";
    for (const auto& v : report.violations) {
      if (v.gpu_id >= 0) text << "  gpu " << v.gpu_id << ": " << v.rule << '\n';
      else text << "  topology: " << v.rule << '\n';
    }
  }
  emit(opt, to_json(report), text.str());
  return report.ok() ? 0 : 1;
}

int cmd_plan(const Options& opt) {
  Context ctx = make_context(opt, false);
  const RunMode mode = parse_mode(opt.mode);
  const TemplateKind selected = select_template(mode);
  const double r_all = double(ctx.topo.gpus.size());
  const int n_gmis = int(ctx.topo.gpus.size()) * ctx.model.gmis_per_gpu;

  json out;
  out["mode"] = to_string(mode);
  out["workload"] = ctx.workload.name;
  out["selected_template"] = to_string(selected);
  std::ostringstream text;
  text << "mode: " << to_string(mode) << "  workload: " << ctx.workload.name << '\n';

  if (mode == RunMode::Serving) {
    const CostEstimate tdg = serving_cost(TemplateKind::TDG, ctx.workload);
    const CostEstimate tcg = serving_cost(TemplateKind::TCG, ctx.workload);
    const double bw = calibrated_bandwidth(tdg.comm_bytes,
                                           ctx.model.calibration.serving_combw_factor,
                                           ctx.workload.interaction_time());
    const double top_tdg = serving_throughput(tdg, ctx.workload, r_all, bw);
    const double top_tcg = serving_throughput(tcg, ctx.workload, r_all, bw);
    const double ratio = serving_throughput_ratio(ctx.workload, ctx.model.calibration);
    out["cost_table"] = {{"TDG", to_json(tdg)}, {"TCG", to_json(tcg)}};
    out["throughput"] = {{"TDG", top_tdg}, {"TCG", top_tcg}, {"r_all", r_all},
                         {"calibrated_bw", bw}};
    out["ratio_over_dedicated"] = ratio;
    out["colocation_penalty"] = serving_colocation_penalty(ctx.workload);
    text << "cost table (serving):\n"
         << "  TDG: R=" << fmt(tdg.resource_size) << " COM=" << fmt(tdg.comm_bytes) << '\n'
         << "  TCG: R=" << fmt(tcg.resource_size) << " COM=" << fmt(tcg.comm_bytes) << '\n'
         << "throughput (R_all=" << fmt(r_all) << ", calibrated): TDG=" << fmt(top_tdg)
         << " TCG=" << fmt(top_tcg) << '\n'
         << "TCG selected, est. ratio " << fmt(ratio, 3) << "x over TDG\n";
  } else if (mode == RunMode::SyncTrain) {
    const CostEstimate tdg = training_cost(TemplateKind::TDG_EX, ctx.workload, n_gmis);
    const CostEstimate tcg = training_cost(TemplateKind::TCG_EX, ctx.workload, n_gmis);
    const double ratio = training_throughput_ratio(ctx.workload, ctx.model.calibration);
    out["cost_table"] = {{"TDG_EX", to_json(tdg)}, {"TCG_EX", to_json(tcg)}};
    out["n_gmis"] = n_gmis;
    out["ratio_over_dedicated"] = ratio;
    out["colocation_penalty"] = training_colocation_penalty(ctx.workload);
    text << "cost table (sync training, n=" << n_gmis << "):\n"
         << "  TDG_EX: R=" << fmt(tdg.resource_size) << " COM=" << fmt(tdg.comm_bytes) << '\n'
         << "  TCG_EX: R=" << fmt(tcg.resource_size) << " COM=" << fmt(tcg.comm_bytes) << '\n'
         << "TCG_EX selected, est. ratio " << fmt(ratio, 3) << "x over TDG_EX\n";
  } else {
    text << "async_train: decoupled serving/training split\n";
  }

  const MappingPlan plan = build_plan(selected, ctx.topo, ctx.workload, ctx.model.gmis_per_gpu);
  out["plan"] = to_json(plan);
  if (mode == RunMode::AsyncTrain) {
    text << "  serving GPUs:";
    for (int g : plan.serving_gpus) text << ' ' << g;
    text << "\n  training GPUs:";
    for (int g : plan.training_gpus) text << ' ' << g;
    text << '\n';
  }
  for (const auto& [gpu, gmis] : plan.gpu_layout) {
    text << "  gpu " << gpu << ":";
    for (int g : gmis) text << ' ' << g;
    text << '\n';
  }
  emit(opt, out, text.str());
  return 0;
}

int cmd_reduce(const Options& opt) {
  Context ctx = make_context(opt, false);
  if (opt.layout_text.empty())
    throw CLI::ValidationError("--layout", "a layout such as [[0,1],[2,3]] is required");
  GmiLayout layout{parse_layout(opt.layout_text)};
  layout.validate();

  const double requested = opt.payload > 0 ? opt.payload : ctx.workload.model_bytes;
  const std::size_t len = std::size_t(std::max(1.0, std::round(requested / 8.0)));
  const double m_p = double(len) * 8.0;

  Strategy strategy = select_strategy(layout);
  bool forced = false;
  if (!opt.force_strategy.empty()) {
    forced = true;
    if (opt.force_strategy == "mpr") strategy = Strategy::MPR;
    else if (opt.force_strategy == "mrr") strategy = Strategy::MRR;
    else if (opt.force_strategy == "har") strategy = Strategy::HAR;
    else throw CLI::ValidationError("--force-strategy", "expected mpr, mrr, or har");
  }

  std::vector<GradientBuffer> buffers;
  for (int id : layout.all_gmis()) {
    GradientBuffer b{id, std::vector<double>(len)};
    for (std::size_t e = 0; e < len; ++e)
      b.values[e] = 1.0 + 0.001 * id + 1e-6 * double(e);
    buffers.push_back(std::move(b));
  }
  std::vector<double> expected(len, 0.0);
  for (const auto& b : buffers)
    for (std::size_t e = 0; e < len; ++e) expected[e] += b.values[e];

  const ReductionRun run = execute(strategy, layout, buffers, ctx.topo);

  double max_rel = 0;
  for (std::size_t e = 0; e < len; ++e)
    max_rel = std::max(max_rel, std::abs(run.result[e] - expected[e]) /
                                    std::max(1.0, std::abs(expected[e])));
  if (max_rel > 1e-9) throw std::runtime_error("reduction result diverged from elementwise sum");

  json out;
  out["layout"] = layout.mpl;
  out["payload_bytes"] = m_p;
  out["strategy"] = to_string(strategy);
  out["forced"] = forced;
  std::ostringstream text;
  text << to_string(strategy) << " selected, latency " << fmt(run.latency);

  const int g = layout.num_gpus();
  if (layout.uniform()) {
    const int t = int(layout.mpl.front().size());
    json predicted;
    std::ostringstream others;
    for (Strategy s : {Strategy::MPR, Strategy::MRR, Strategy::HAR}) {
      const double p = predict_latency(s, g, t, m_p, ctx.topo.b1, ctx.topo.b2);
      predicted[to_string(s)] = p;
      if (s != strategy) others << (others.tellp() > 0 ? ", " : "") << to_string(s) << ' ' << fmt(p);
    }
    out["predicted_latency"] = predicted;
    const double own = predicted[to_string(strategy)].get<double>();
    if (std::abs(run.latency - own) > 1e-12 * std::max(1.0, std::abs(own)))
      throw std::runtime_error("trace latency disagrees with the closed-form prediction");
    out["trace_matches_prediction"] = true;
    text << " (" << others.str() << ")";
  }
  text << '\n';
  text << "result: elementwise sum verified over " << len << " elements\n";
  out["result_verified"] = true;
  out["broadcast_latency"] = run.broadcast_latency;
  out["trace"] = trace_digest(run);
  if (opt.full_trace) text << export_trace(run);
  emit(opt, out, text.str());
  return 0;
}

int cmd_pipeline(const Options& opt) {
  Context ctx = make_context(opt, false);
  const MappingPlan plan =
      build_plan(TemplateKind::AsyncDecoupled, ctx.topo, ctx.workload, ctx.model.gmis_per_gpu);
  const PipelineMetrics mcc =
      simulate_pipeline(ctx.workload, plan, ctx.topo, ctx.model.pipeline, opt.duration);
  const PipelineMetrics ucc =
      simulate_pipeline(ctx.workload, plan, ctx.topo, uni_channel(ctx.model.pipeline), opt.duration);

  json out;
  out["duration"] = opt.duration;
  out["compress_threshold"] = ctx.model.pipeline.compress_threshold;
  out["plan"] = to_json(plan);
  out["multi_channel"] = to_json(mcc);
  out["uni_channel"] = to_json(ucc);
  std::ostringstream text;
  text << "experience pipeline over " << opt.duration << " time units (threshold "
       << ctx.model.pipeline.compress_threshold << "):\n";
  text << "               multi-channel    uni-channel\n";
  text << "  PPS          " << std::setw(13) << fmt(mcc.pps) << "    " << std::setw(11)
       << fmt(ucc.pps) << '\n';
  text << "  TTOP         " << std::setw(13) << fmt(mcc.ttop) << "    " << std::setw(11)
       << fmt(ucc.ttop) << '\n';
  text << "  records      " << std::setw(13) << mcc.records_produced << "    " << std::setw(11)
       << ucc.records_produced << '\n';
  text << "  units sent   " << std::setw(13) << mcc.units_sent << "    " << std::setw(11)
       << ucc.units_sent << '\n';
  text << "  batches      " << std::setw(13) << mcc.batches_emitted << "    " << std::setw(11)
       << ucc.batches_emitted << '\n';
  emit(opt, out, text.str());
  return 0;
}

int cmd_search(const Options& opt) {
  Context ctx = make_context(opt, false);
  std::unique_ptr<Profiler> profiler;
  if (ctx.search.profile_trace)
    profiler = std::make_unique<RecordedTraceProfiler>(
        RecordedTraceProfiler::from_file(*ctx.search.profile_trace));
  else
    profiler = std::make_unique<SyntheticCostModel>();

  ThroughputEstimator estimator{ctx.workload, ctx.topo.b1, ctx.topo.b2, ctx.model.latency_scale};
  const int num_gpu = int(ctx.topo.gpus.size());
  const SearchResult result =
      explore(*profiler, estimator, ctx.workload.name, num_gpu, ctx.search.config);

  std::ostringstream text;
  if (result.feasible) {
    text << "best configuration: num_env=" << result.num_env
         << " gmis_per_gpu=" << result.gmis_per_gpu
         << " est_throughput=" << fmt(result.est_throughput) << '\n';
  } else {
    text << "infeasible: " << result.reason << '\n';
  }
  text << "visited points (" << result.visited.size() << "):\n";
  for (const auto& v : result.visited) {
    text << "  gpg=" << v.gmis_per_gpu << " env=" << v.num_env;
    if (!v.runnable) { text << " not-runnable\n"; continue; }
    text << " top=" << fmt(v.top) << " mem=" << fmt(v.mem);
    if (v.sat) text << " sat=" << fmt(*v.sat, 4);
    if (v.acc_top) text << " acc_top=" << fmt(*v.acc_top);
    if (v.pruned_here) text << " pruned";
    text << '\n';
  }
  emit(opt, to_json(result), text.str());
  return result.feasible ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"placement planning and simulation for sub-GPU multiplexed RL workloads"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--topology", opt.topology_path, "sectioned key/value config file");
  app.add_option("--workload", opt.workload, "benchmark name (AT AY BB FC HM SH) or config file");
  app.add_option("--mode", opt.mode, "serving | sync_train | async_train");
  app.add_option("--b1", opt.b1, "inter-GMI host-bounce bandwidth override");
  app.add_option("--b2", opt.b2, "inter-GPU ring bandwidth override");
  app.add_option("--sat-threshold", opt.sat_threshold, "saturation pruning threshold");
  app.add_option("--format", opt.format, "text | structured")
      ->check(CLI::IsMember({"text", "structured"}));

  auto* validate = app.add_subcommand("validate", "check a partition layout");
  auto* plan = app.add_subcommand("plan", "cost tables, template selection, mapping plan");
  auto* reduce = app.add_subcommand("reduce", "select and simulate gradient reduction");
  reduce->add_option("--layout", opt.layout_text, "GMI-to-GPU mapping list, e.g. [[0,1],[2,3]]");
  reduce->add_option("--payload", opt.payload, "gradient payload in bytes");
  reduce->add_option("--force-strategy", opt.force_strategy, "mpr | mrr | har");
  reduce->add_flag("--full-trace", opt.full_trace, "print every trace event");
  auto* pipeline = app.add_subcommand("pipeline", "experience-sharing pipeline metrics");
  pipeline->add_option("--duration", opt.duration, "simulated serving window")
      ->check(CLI::PositiveNumber);
  auto* search = app.add_subcommand("search", "explore (num_env, gmis_per_gpu)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (validate->parsed()) return cmd_validate(opt);
    if (plan->parsed()) return cmd_plan(opt);
    if (reduce->parsed()) return cmd_reduce(opt);
    if (pipeline->parsed()) return cmd_pipeline(opt);
    if (search->parsed()) return cmd_search(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const MultiStreamError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const PlanError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const PipelineError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
