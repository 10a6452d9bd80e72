#include "doctest.h"

#include <random>

#include "delta/des.hpp"
#include "oracles.hpp"

using namespace delta;
using namespace delta::testing;

namespace {

LogicalTopology uniform_topology(const ReducedDag& dag, int circuits) {
  LogicalTopology topo = LogicalTopology::zero(dag.port_caps);
  for (auto [i, j] : dag.active_pairs()) topo.set_symmetric(i, j, circuits);
  return topo;
}

LogicalTopology random_topology(const ReducedDag& dag, std::mt19937_64& rng, int max_x) {
  LogicalTopology topo = LogicalTopology::zero(dag.port_caps);
  std::uniform_int_distribution<int> dist(1, max_x);
  for (auto [i, j] : dag.active_pairs()) topo.set_symmetric(i, j, dist(rng));
  return topo;
}

}  // namespace

TEST_CASE("single task saturates its circuit") {
  DagBuilder b(2);
  TaskId m = b.task(0, 1, 1, 400.0);
  ReducedDag dag = b.build();
  SimTrace trace = simulate(uniform_topology(dag, 1), dag, 400.0);
  CHECK(trace.start[m] == doctest::Approx(0.0));
  CHECK(trace.completion[m] == doctest::Approx(1000.0));  // 400 Gb at 400 Gb/s
  CHECK(trace.makespan_ms == doctest::Approx(1000.0));
}

TEST_CASE("two concurrent flows split one circuit equally") {
  DagBuilder b(2);
  TaskId m1 = b.task(0, 1, 1, 100.0);
  TaskId m2 = b.task(0, 1, 1, 100.0);
  ReducedDag dag = b.build();
  std::vector<double> rates = max_min_share({m1, m2}, dag, uniform_topology(dag, 1),
                                            400.0, false);
  CHECK(rates[0] == doctest::Approx(0.2));  // Gb/ms == 200 Gb/s
  CHECK(rates[1] == doctest::Approx(0.2));

  SimTrace trace = simulate(uniform_topology(dag, 1), dag, 400.0);
  CHECK(trace.makespan_ms == doctest::Approx(500.0));
}

TEST_CASE("water-filling freezes NIC-capped flows first") {
  // Four tasks share one source GPU (per-flow 100 Gb/s each); one of them
  // also rides a single-circuit pair together with a fifth task, which
  // then soaks up the remaining 300 Gb/s.
  DagBuilder b(3);
  TaskId t1 = b.task_on_gpus(0, 1, {0}, {10}, 100.0);
  TaskId t2 = b.task_on_gpus(0, 2, {0}, {11}, 100.0);
  TaskId t3 = b.task_on_gpus(0, 2, {0}, {12}, 100.0);
  TaskId t4 = b.task_on_gpus(0, 2, {0}, {13}, 100.0);
  TaskId t5 = b.task_on_gpus(0, 1, {1}, {14}, 100.0);
  ReducedDag dag = b.build();
  LogicalTopology topo = LogicalTopology::zero(dag.port_caps);
  topo.set_symmetric(0, 1, 1);  // 400 Gb/s total on pair (0,1)
  topo.set_symmetric(0, 2, 8);  // ample

  std::vector<double> rates =
      max_min_share({t1, t2, t3, t4, t5}, dag, topo, 400.0, false);
  CHECK(rates[0] == doctest::Approx(0.1));   // NIC share 100 Gb/s
  CHECK(rates[1] == doctest::Approx(0.1));
  CHECK(rates[2] == doctest::Approx(0.1));
  CHECK(rates[3] == doctest::Approx(0.1));
  CHECK(rates[4] == doctest::Approx(0.3));   // leftover circuit capacity
}

TEST_CASE("max-min trivial splits") {
  DagBuilder b(2);
  TaskId solo = b.task(0, 1, 1, 50.0);
  TaskId a = b.task(0, 1, 1, 50.0);
  TaskId c = b.task(0, 1, 1, 50.0);
  TaskId d = b.task(0, 1, 1, 50.0);
  ReducedDag dag = b.build();

  // Single flow gets the full circuit.
  auto rates = max_min_share({solo}, dag, uniform_topology(dag, 1), 400.0, false);
  CHECK(rates[0] == doctest::Approx(0.4));

  // Three equal flows on a 300 Gb/s pair: 100 each.
  auto rates3 = max_min_share({a, c, d}, dag, uniform_topology(dag, 3), 100.0, false);
  for (double r : rates3) CHECK(r == doctest::Approx(0.1));
}

TEST_CASE("ideal makespan equals the reduced-DAG longest path") {
  SUBCASE("hybrid-parallel workload") {
    ParallelConfig cfg = fig_config();
    ReducedDag dag = reduce_dag(build_workload(cfg, Placement::round_robin(cfg)));
    SimTrace trace = simulate(LogicalTopology::zero(dag.port_caps), dag,
                              cfg.nic_bandwidth_gbps, {.ideal = true});
    CHECK(trace.makespan_ms ==
          doctest::Approx(longest_path_oracle(dag)).epsilon(1e-12));
  }

  SUBCASE("randomized lane instances") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
      ReducedDag dag = random_lane_dag(rng);
      SimTrace trace = simulate(LogicalTopology::zero(dag.port_caps), dag,
                                dag.bandwidth_gbps, {.ideal = true});
      CHECK(trace.makespan_ms ==
            doctest::Approx(longest_path_oracle(dag)).epsilon(1e-9));
    }
  }
}

TEST_CASE("trace invariants on random instances") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 15; ++i) {
    ReducedDag dag = random_lane_dag(rng);
    LogicalTopology topo = random_topology(dag, rng, 3);
    SimTrace trace = simulate(topo, dag, dag.bandwidth_gbps);

    // Conservation: interval volumes add up to each task's volume.
    for (const auto& task : dag.tasks) {
      double moved = 0;
      for (double w : trace.interval_volumes[task.id]) moved += w;
      CHECK(moved == doctest::Approx(task.volume_gb).epsilon(1e-9));
    }

    // Dependencies hold in the executed schedule.
    for (const auto& dep : dag.deps)
      CHECK(trace.start[dep.succ] >=
            trace.completion[dep.pre] + dep.gap_ms - 1e-9 * (1 + trace.makespan_ms));

    // Event-count bound.
    CHECK(trace.events.size() <= 2 * dag.tasks.size() - 1);

    // Starts precede completions for real tasks.
    for (const auto& task : dag.tasks)
      if (!task.is_virtual()) CHECK(trace.start[task.id] < trace.completion[task.id]);
  }
}

TEST_CASE("adding circuits never slows the iteration") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    ReducedDag dag = random_lane_dag(rng);
    LogicalTopology base = random_topology(dag, rng, 2);
    LogicalTopology more = base;
    for (auto [a, b2] : dag.active_pairs())
      more.set_symmetric(a, b2, more.at(a, b2) + (rng() % 2));
    double t_base = simulate(base, dag, dag.bandwidth_gbps).makespan_ms;
    double t_more = simulate(more, dag, dag.bandwidth_gbps).makespan_ms;
    CHECK(t_more <= t_base * (1 + 1e-12));
  }
}

TEST_CASE("simulation is deterministic") {
  std::mt19937_64 rng(13);
  ReducedDag dag = random_lane_dag(rng);
  LogicalTopology topo = random_topology(dag, rng, 3);
  SimTrace a = simulate(topo, dag, dag.bandwidth_gbps);
  SimTrace b = simulate(topo, dag, dag.bandwidth_gbps);
  CHECK(a.start == b.start);
  CHECK(a.completion == b.completion);
  CHECK(a.events == b.events);
  CHECK(a.interval_volumes == b.interval_volumes);
}

TEST_CASE("unroutable task fails loudly") {
  DagBuilder b(3);
  b.task(0, 1, 1, 10.0);
  b.task(1, 2, 1, 10.0);
  ReducedDag dag = b.build();
  LogicalTopology topo = LogicalTopology::zero(dag.port_caps);
  topo.set_symmetric(0, 1, 1);  // pair (1,2) left without a circuit
  CHECK_THROWS_AS(simulate(topo, dag, 400.0), InfeasibleError);
}

TEST_CASE("critical-path communication time") {
  SUBCASE("a single chain sums its durations") {
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 1, 100.0);
    TaskId c = b.task(0, 1, 1, 200.0);
    b.dep(a, c, 5.0);
    ReducedDag dag = b.build();
    SimTrace trace = simulate(uniform_topology(dag, 1), dag, 400.0);
    double expected = (trace.completion[a] - trace.start[a]) +
                      (trace.completion[c] - trace.start[c]);
    CHECK(critical_path_comm_time(trace, dag) == doctest::Approx(expected));
    CHECK(critical_path_comm_time(trace, dag) ==
          doctest::Approx(trace.makespan_ms - 5.0));
  }

  SUBCASE("independent tasks: the slower one decides") {
    DagBuilder b(3);
    TaskId fast = b.task(0, 1, 1, 50.0);
    TaskId slow = b.task(0, 2, 1, 400.0);
    ReducedDag dag = b.build();
    SimTrace trace = simulate(uniform_topology(dag, 1), dag, 400.0);
    CHECK(critical_path_comm_time(trace, dag) ==
          doctest::Approx(trace.completion[slow] - trace.start[slow]));
    (void)fast;
  }

  SUBCASE("identical traces give unit normalized time") {
    std::mt19937_64 rng(17);
    ReducedDag dag = random_lane_dag(rng);
    SimTrace trace = simulate(uniform_topology(dag, 4), dag, dag.bandwidth_gbps);
    CHECK(nct(trace, trace, dag) == doctest::Approx(1.0));
  }

  SUBCASE("halved binding rate doubles normalized time") {
    // One task with two flows: the ideal network grants 800 Gb/s, a single
    // circuit only 400, so the communication time doubles.
    DagBuilder b(2);
    b.task(0, 1, 2, 400.0);
    ReducedDag dag = b.build();
    SimTrace ideal = simulate(LogicalTopology::zero(dag.port_caps), dag, 400.0,
                              {.ideal = true});
    SimTrace ocs = simulate(uniform_topology(dag, 1), dag, 400.0);
    CHECK(nct(ocs, ideal, dag) == doctest::Approx(2.0));
  }

  SUBCASE("full-port topology reaches the ideal") {
    std::mt19937_64 rng(19);
    for (int i = 0; i < 5; ++i) {
      ReducedDag dag = random_lane_dag(rng);
      LogicalTopology full = LogicalTopology::full_port(dag.port_caps, dag.active_pairs());
      SimTrace ideal = simulate(LogicalTopology::zero(dag.port_caps), dag,
                                dag.bandwidth_gbps, {.ideal = true});
      SimTrace ocs = simulate(full, dag, dag.bandwidth_gbps);
      CHECK(nct(ocs, ideal, dag) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("anchor derivation indexes intervals") {
  SUBCASE("spec'd interval arithmetic") {
    SimTrace trace;
    trace.events = {0.0, 1.0, 2.0, 3.0, 4.0};
    trace.start = {0.0, 1.0, 3.0};
    trace.completion = {0.0, 3.0, 4.0};
    trace.makespan_ms = 4.0;
    TaskAnchors anchors = derive_anchors(trace);
    CHECK(anchors.num_intervals == 4);
    CHECK(anchors.start_interval[1] == 2);  // spans events 2..4
    CHECK(anchors.end_interval[1] == 3);
    CHECK(anchors.start_interval[2] == 4);  // exactly one interval
    CHECK(anchors.end_interval[2] == 4);
    CHECK(anchors.start_interval[0] == 1);  // instantaneous virtual source
    CHECK(anchors.end_interval[0] == 1);
  }

  SUBCASE("hybrid workload anchors are narrow relative to the horizon") {
    ParallelConfig cfg = fig_config();
    cfg.num_micro_batches = 32;
    ReducedDag dag = reduce_dag(build_workload(cfg, Placement::round_robin(cfg)));
    LogicalTopology full = LogicalTopology::full_port(dag.port_caps, dag.active_pairs());
    SimTrace trace = simulate(full, dag, dag.bandwidth_gbps);
    TaskAnchors anchors = derive_anchors(trace);
    int max_width = 0;
    for (const auto& task : dag.tasks) {
      if (task.is_virtual()) continue;
      max_width = std::max(max_width, anchors.end_interval[task.id] -
                                          anchors.start_interval[task.id] + 1);
    }
    CHECK(static_cast<double>(max_width) / anchors.num_intervals < 0.2);
  }
}
