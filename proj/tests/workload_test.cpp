#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>

#include "delta/workload.hpp"
#include "oracles.hpp"

using namespace delta;
using namespace delta::testing;

namespace {

std::vector<Slot> stage_slots(const ParallelConfig& cfg, int stage) {
  return synthesize_1f1b_schedule(cfg)[stage];
}

}  // namespace

TEST_CASE("1f1b schedule shape") {
  ParallelConfig cfg;
  cfg.tp = 1;
  cfg.dp = 1;
  cfg.num_pods = 2;
  cfg.gpus_per_pod_per_replica = 4;

  SUBCASE("first stage of a deep pipeline") {
    cfg.pp = 4;
    cfg.num_micro_batches = 8;
    auto slots = stage_slots(cfg, 0);
    REQUIRE(slots.size() == 16);
    // Warmup holds back three forwards, then strict alternation, then drain.
    std::vector<Slot> expected = {
        {true, 0},  {true, 1},  {true, 2},  {true, 3},  {false, 0}, {true, 4},
        {false, 1}, {true, 5},  {false, 2}, {true, 6},  {false, 3}, {true, 7},
        {false, 4}, {false, 5}, {false, 6}, {false, 7}};
    CHECK(slots == expected);
  }

  SUBCASE("no pipeline means plain alternation") {
    cfg.pp = 1;
    cfg.num_micro_batches = 3;
    std::vector<Slot> expected = {{true, 0}, {false, 0}, {true, 1},
                                  {false, 1}, {true, 2}, {false, 2}};
    CHECK(stage_slots(cfg, 0) == expected);
  }

  SUBCASE("last stage has no warmup surplus") {
    cfg.pp = 2;
    cfg.num_micro_batches = 2;
    std::vector<Slot> expected = {{true, 0}, {false, 0}, {true, 1}, {false, 1}};
    CHECK(stage_slots(cfg, 1) == expected);
  }

  SUBCASE("per stage, forward precedes backward of the same micro-batch") {
    cfg.pp = 3;
    cfg.num_micro_batches = 5;
    auto schedule = synthesize_1f1b_schedule(cfg);
    for (const auto& slots : schedule) {
      std::map<int, int> fwd_pos, bwd_pos;
      for (size_t i = 0; i < slots.size(); ++i)
        (slots[i].forward ? fwd_pos : bwd_pos)[slots[i].micro_batch] =
            static_cast<int>(i);
      for (auto [mb, pos] : fwd_pos) CHECK(pos < bwd_pos.at(mb));
    }
  }

  SUBCASE("rejects an unfillable pipeline") {
    cfg.pp = 4;
    cfg.num_micro_batches = 3;
    CHECK_THROWS_AS(synthesize_1f1b_schedule(cfg), ConfigError);
  }
}

TEST_CASE("count_tasks evaluates the per-replica formulas") {
  ParallelConfig cfg;
  cfg.tp = 8;
  cfg.dp = 1;
  cfg.num_pods = 3;
  cfg.gpus_per_pod_per_replica = 16;

  cfg.pp = 6;
  cfg.num_micro_batches = 48;
  CHECK(count_tasks(cfg) == std::pair<int, int>{480, 6});

  cfg.pp = 1;
  cfg.num_micro_batches = 8;
  CHECK(count_tasks(cfg) == std::pair<int, int>{0, 1});

  cfg.tp = 2;
  cfg.pp = 16;
  cfg.num_micro_batches = 128;
  cfg.gpus_per_pod_per_replica = 32;
  cfg.num_pods = 4;
  CHECK(count_tasks(cfg) == std::pair<int, int>{3840, 16});
}

TEST_CASE("build_workload emits the expected task population") {
  ParallelConfig cfg = fig_config();
  Workload w = build_workload(cfg, Placement::round_robin(cfg));

  SUBCASE("per-replica pipeline task count matches 2*(pp-1)*mbs") {
    for (int r = 0; r < cfg.dp; ++r) {
      int pp_tasks = 0;
      for (const auto& task : w.tasks)
        if (task.replica == r && (task.kind == TaskKind::PipelineForward ||
                                  task.kind == TaskKind::PipelineBackward))
          ++pp_tasks;
      CHECK(pp_tasks == 2 * (cfg.pp - 1) * cfg.num_micro_batches);
    }
  }

  SUBCASE("per-replica gradient-sync task count equals the pipeline depth") {
    for (int r = 0; r < cfg.dp; ++r) {
      int dp_tasks = 0;
      for (const auto& task : w.tasks)
        if (task.replica == r && task.kind == TaskKind::GradientSync) ++dp_tasks;
      CHECK(dp_tasks == cfg.pp);
    }
  }

  SUBCASE("full DAG is acyclic with a single virtual source") {
    CHECK(w.full_dag.is_acyclic());
    CHECK(w.tasks[0].is_virtual());
    int virtual_count = 0;
    for (const auto& t : w.tasks) virtual_count += t.is_virtual();
    CHECK(virtual_count == 1);
  }

  SUBCASE("pipeline tasks carry tp flows matching their GPU sets") {
    for (const auto& task : w.tasks) {
      if (task.is_virtual()) continue;
      CHECK(task.flows == cfg.tp);
      CHECK(task.src_gpus.size() == static_cast<size_t>(task.flows));
      CHECK(task.dst_gpus.size() == static_cast<size_t>(task.flows));
      CHECK(task.src_pod != task.dst_pod);
    }
  }
}

TEST_CASE("single-pod replica leaves only gradient-sync traffic") {
  ParallelConfig cfg;
  cfg.tp = 1;
  cfg.pp = 2;
  cfg.dp = 2;
  cfg.num_micro_batches = 4;
  cfg.num_pods = 2;
  cfg.gpus_per_pod_per_replica = 2;

  Placement place;
  place.stage_to_pod = {{0, 0}, {1, 1}};  // each replica fully inside one pod
  place.gpu_assignment = {{{0}, {1}}, {{2}, {3}}};

  Workload w = build_workload(cfg, place);
  for (const auto& task : w.tasks) {
    if (task.is_virtual()) continue;
    CHECK(task.kind == TaskKind::GradientSync);
  }
}

TEST_CASE("degenerate placement with zero inter-pod tasks is rejected") {
  ParallelConfig cfg;
  cfg.tp = 1;
  cfg.pp = 2;
  cfg.dp = 1;
  cfg.num_micro_batches = 4;
  cfg.num_pods = 1;
  cfg.gpus_per_pod_per_replica = 2;
  CHECK_THROWS_AS(build_workload(cfg, Placement::round_robin(cfg)), ConfigError);
}

TEST_CASE("permuted GPU ids yield an isomorphic workload") {
  ParallelConfig cfg = fig_config();
  Placement a = Placement::round_robin(cfg);
  Placement b = a;
  for (auto& replica : b.gpu_assignment)
    for (auto& gpus : replica) std::reverse(gpus.begin(), gpus.end());
  for (auto& replica : b.gpu_assignment)
    for (auto& gpus : replica)
      for (auto& g : gpus) g += 1000;

  Workload wa = build_workload(cfg, a);
  Workload wb = build_workload(cfg, b);
  REQUIRE(wa.tasks.size() == wb.tasks.size());
  REQUIRE(wa.full_dag.nodes.size() == wb.full_dag.nodes.size());
  REQUIRE(wa.full_dag.edges.size() == wb.full_dag.edges.size());

  auto signature = [](const Workload& w) {
    std::multiset<std::tuple<int, int, int, int, int, int, double>> sig;
    for (const auto& t : w.tasks)
      sig.insert({static_cast<int>(t.kind), t.replica, t.stage, t.micro_batch,
                  t.src_pod, t.dst_pod, t.volume_gb});
    return sig;
  };
  CHECK(signature(wa) == signature(wb));

  // Edge multiset over node labels is identical (labels never mention GPUs).
  auto edge_sig = [](const Workload& w) {
    std::multiset<std::pair<std::string, std::string>> sig;
    for (auto [u, v] : w.full_dag.edges)
      sig.insert({w.full_dag.nodes[u].label, w.full_dag.nodes[v].label});
    return sig;
  };
  CHECK(edge_sig(wa) == edge_sig(wb));
}

TEST_CASE("sequence length scales activation volume linearly") {
  ParallelConfig cfg = fig_config();
  cfg.seq_len = 8192;
  CHECK(cfg.effective_pp_volume_gb() == doctest::Approx(2 * cfg.pp_volume_gb));
  Workload w = build_workload(cfg, Placement::round_robin(cfg));
  for (const auto& task : w.tasks) {
    if (task.kind == TaskKind::PipelineForward)
      CHECK(task.volume_gb == doctest::Approx(2 * cfg.pp_volume_gb));
    if (task.kind == TaskKind::GradientSync)
      CHECK(task.volume_gb == doctest::Approx(cfg.dp_volume_gb));
  }
}
