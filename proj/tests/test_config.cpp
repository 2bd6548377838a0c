#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "gmux/config.hpp"

using namespace gmux;

namespace {

ConfigFile parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace

TEST_CASE("sectioned key/value parsing") {
  const ConfigFile cfg = parse(
      "# comment\n"
      "[topology]\n"
      "b1 = 2.0   # inline comment\n"
      "gpu = id=0 arch=sm80\n"
      "gpu = id=1\n"
      "\n"
      "[model]\n"
      "gmis_per_gpu = 3\n");
  CHECK(cfg.has("topology"));
  CHECK(cfg.get("topology", "b1") == "2.0");
  CHECK(cfg.lines("topology").size() == 3);  // repeated keys preserved
  CHECK(cfg.get("model", "gmis_per_gpu") == "3");
  CHECK_FALSE(cfg.has("search"));
}

TEST_CASE("parse errors carry line numbers") {
  CHECK_THROWS_WITH(parse("[topology\nb1 = 1\n"), Catch::Matchers::ContainsSubstring("line 1"));
  CHECK_THROWS_WITH(parse("b1 = 1\n"), Catch::Matchers::ContainsSubstring("before any [section]"));
  CHECK_THROWS_WITH(parse("[topology]\njust words\n"),
                    Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("topology loading") {
  const ConfigFile cfg = parse(
      "[topology]\n"
      "b1 = 1.5\n"
      "b2 = 45\n"
      "gpu = id=0 arch=sm80 sm_units=8 mem_gb=40\n"
      "gpu = id=1 arch=sm70\n"
      "gmi = id=0 gpu=0 backend=mig profile=3g.20gb\n"
      "gmi = id=1 gpu=0 backend=mig profile=1g.5gb\n"
      "gmi = id=2 gpu=1 backend=mps share=0.5\n");
  const Topology topo = topology_from_config(cfg);
  CHECK(topo.b1 == 1.5);
  CHECK(topo.b2 == 45.0);
  REQUIRE(topo.gpus.size() == 2);
  CHECK(topo.gpus[1].arch == GpuArch::SM70);
  REQUIRE(topo.partitions.size() == 3);
  CHECK(topo.partitions[0].sm_share == 3.0 / 8.0);
  CHECK(topo.partitions[2].backend == Backend::MPS);
  CHECK(topo.partitions[2].mem_gb == 20.0);  // proportional default
  CHECK(validate_layout(topo).ok());
}

TEST_CASE("topology field diagnostics") {
  CHECK_THROWS_WITH(topology_from_config(parse("[topology]\ngpu = arch=sm80\n")),
                    Catch::Matchers::ContainsSubstring("missing field 'id'"));
  CHECK_THROWS_WITH(topology_from_config(parse("[topology]\ngpu = id=zero\n")),
                    Catch::Matchers::ContainsSubstring("not an integer"));
  CHECK_THROWS_WITH(topology_from_config(parse("[topology]\ngmi = id=0 gpu=0 backend=foo\n")),
                    Catch::Matchers::ContainsSubstring("unknown backend"));
  CHECK_THROWS_WITH(
      topology_from_config(parse("[topology]\ngmi = id=0 gpu=0 backend=mig profile=9g.90gb\n")),
      Catch::Matchers::ContainsSubstring("unknown MIG profile"));
  CHECK_THROWS_WITH(topology_from_config(parse("[topology]\nwhatever = 1\n")),
                    Catch::Matchers::ContainsSubstring("unknown topology key"));
}

TEST_CASE("workload loading with overrides") {
  const ConfigFile cfg = parse(
      "[workload]\n"
      "benchmark = HM\n"
      "alpha = 0.25\n"
      "steps_per_train = 16\n");
  const DrlWorkload w = workload_from_config(cfg);
  CHECK(w.name == "HM");
  CHECK(w.alpha == 0.25);
  CHECK(w.steps_per_train == 16);
  CHECK(w.policy_dims == load_benchmark("HM").policy_dims);

  CHECK_THROWS_AS(workload_from_config(parse("[workload]\nbenchmark = ZZ\n")),
                  std::invalid_argument);
  CHECK_THROWS_WITH(workload_from_config(parse("[workload]\nbogus = 1\n")),
                    Catch::Matchers::ContainsSubstring("unknown workload key"));
  // Overrides that break the invariants are rejected.
  CHECK_THROWS_AS(workload_from_config(parse("[workload]\nalpha = 2.0\n")),
                  std::invalid_argument);
}

TEST_CASE("model and search sections") {
  const ConfigFile cfg = parse(
      "[model]\n"
      "serving_combw_factor = 2.5\n"
      "training_combw_factor = 6.0\n"
      "gmis_per_gpu = 4\n"
      "compress_threshold = 16\n"
      "batch_mode = slice\n"
      "message_overhead = 0.5\n"
      "[search]\n"
      "sat_threshold = 0.2\n"
      "max_gmis_per_gpu = 6\n"
      "num_env_min = 256\n"
      "num_env_max = 4096\n");
  const ModelParams m = model_from_config(cfg);
  CHECK(m.calibration.serving_combw_factor == 2.5);
  CHECK(m.calibration.training_combw_factor == 6.0);
  CHECK(m.gmis_per_gpu == 4);
  CHECK(m.pipeline.compress_threshold == 16);
  CHECK(m.pipeline.batch_mode == BatchMode::Slice);
  CHECK(m.pipeline.per_message_overhead == 0.5);

  const SearchSettings s = search_from_config(cfg);
  CHECK(s.config.sat_threshold == 0.2);
  CHECK(s.config.max_gmis_per_gpu == 6);
  CHECK(s.config.num_env_grid == std::vector<int>{256, 512, 1024, 2048, 4096});

  CHECK_THROWS_WITH(model_from_config(parse("[model]\nbatch_mode = shuffle\n")),
                    Catch::Matchers::ContainsSubstring("slice or stack"));
}

TEST_CASE("defaults hold when sections are absent") {
  const ConfigFile cfg = parse("[topology]\nb1 = 1\n");
  const ModelParams m = model_from_config(cfg);
  CHECK(m.calibration.serving_combw_factor == 2.0);
  CHECK(m.calibration.training_combw_factor == 7.0);
  CHECK(m.gmis_per_gpu == 2);
  const SearchSettings s = search_from_config(cfg);
  CHECK(s.config.sat_threshold == 0.1);
  CHECK(s.config.num_env_grid.front() == 128);
  CHECK(s.config.num_env_grid.back() == 16384);
}

TEST_CASE("missing config file") {
  CHECK_THROWS_WITH(load_config("does_not_exist.cfg"),
                    Catch::Matchers::ContainsSubstring("config not found"));
}
