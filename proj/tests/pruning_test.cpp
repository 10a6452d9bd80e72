#include "doctest.h"

#include <random>

#include "delta/pruning.hpp"
#include "oracles.hpp"

using namespace delta;
using namespace delta::testing;

namespace {

TaskAnchors loose_anchors(size_t tasks, int k) {
  TaskAnchors anchors;
  anchors.num_intervals = k;
  anchors.start_interval.assign(tasks, 1);
  anchors.end_interval.assign(tasks, k);
  return anchors;
}

}  // namespace

TEST_CASE("task time windows") {
  SUBCASE("minimum duration from volume, flows and bandwidth") {
    DagBuilder b(2);
    TaskId m = b.task(0, 1, 2, 100.0);
    ReducedDag dag = b.build();
    TimeWindows w = cal_task_time_windows(dag, 400.0, 1000.0);
    CHECK(w.tau[m] == doctest::Approx(125.0));  // 0.125 s
  }

  SUBCASE("hand-propagated chain") {
    // a (tau=1ms) --gap 2ms--> b (tau=3ms), horizon 10ms.
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 1, 0.4);
    TaskId c = b.task(0, 1, 1, 1.2);
    b.dep(a, c, 2.0);
    ReducedDag dag = b.build();
    TimeWindows w = cal_task_time_windows(dag, 400.0, 10.0);
    CHECK(w.tau[a] == doctest::Approx(1.0));
    CHECK(w.tau[c] == doctest::Approx(3.0));
    CHECK(w.est[c] == doctest::Approx(3.0));
    CHECK(w.lct[a] == doctest::Approx(5.0));
  }

  SUBCASE("exactly tight horizon") {
    DagBuilder b(2);
    TaskId m = b.task(0, 1, 1, 0.4);
    ReducedDag dag = b.build();
    TimeWindows w = cal_task_time_windows(dag, 400.0, 1.0);
    CHECK(w.est[m] == doctest::Approx(0.0));
    CHECK(w.lct[m] == doctest::Approx(1.0));
  }

  SUBCASE("inverted window reports infeasible horizon") {
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 1, 0.4);
    TaskId c = b.task(0, 1, 1, 1.2);
    b.dep(a, c, 2.0);
    ReducedDag dag = b.build();
    CHECK_THROWS_AS(cal_task_time_windows(dag, 400.0, 3.0), InfeasibleError);
  }
}

TEST_CASE("index pruning steps") {
  SUBCASE("zero-gap edge advances one interval") {
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 1, 10.0);
    TaskId c = b.task(0, 1, 1, 10.0);
    b.dep(a, c, 0.0);
    ReducedDag dag = b.build();
    IndexBounds bounds =
        task_time_index_pruning(dag, 3, loose_anchors(dag.tasks.size(), 3));
    CHECK(bounds.k_min[c] == 2);
  }

  SUBCASE("positive-gap edge advances two intervals") {
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 1, 10.0);
    TaskId c = b.task(0, 1, 1, 10.0);
    b.dep(a, c, 1.5);
    ReducedDag dag = b.build();
    IndexBounds bounds =
        task_time_index_pruning(dag, 4, loose_anchors(dag.tasks.size(), 4));
    CHECK(bounds.k_min[c] == 3);
  }

  SUBCASE("backward pass lowers the latest index symmetrically") {
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 1, 10.0);
    TaskId c = b.task(0, 1, 1, 10.0);
    b.dep(a, c, 0.0);
    ReducedDag dag = b.build();
    IndexBounds bounds =
        task_time_index_pruning(dag, 3, loose_anchors(dag.tasks.size(), 3));
    CHECK(bounds.k_max[a] == 2);
  }

  SUBCASE("over-tight anchors are rejected") {
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 1, 10.0);
    TaskId c = b.task(0, 1, 1, 10.0);
    TaskId d = b.task(0, 1, 1, 10.0);
    b.dep(a, c, 1.0);
    b.dep(c, d, 1.0);
    ReducedDag dag = b.build();
    // K=3 cannot host a chain needing indices 1, 3, 5.
    CHECK_THROWS_AS(
        task_time_index_pruning(dag, 3, loose_anchors(dag.tasks.size(), 3), 0),
        InfeasibleError);
  }

  SUBCASE("retained fraction shrinks as the task count grows") {
    double prev_fraction = 1.0;
    for (int mbs : {4, 8, 16}) {
      ParallelConfig cfg = fig_config();
      cfg.num_micro_batches = mbs;
      ReducedDag dag = reduce_dag(build_workload(cfg, Placement::round_robin(cfg)));
      LogicalTopology full = LogicalTopology::full_port(dag.port_caps, dag.active_pairs());
      SimTrace trace = simulate(full, dag, dag.bandwidth_gbps);
      TaskAnchors anchors = derive_anchors(trace);
      IndexBounds bounds =
          task_time_index_pruning(dag, trace.num_intervals(), anchors);
      double fraction =
          static_cast<double>(bounds.retained_cells()) /
          (static_cast<double>(dag.tasks.size()) * bounds.num_intervals);
      CHECK(fraction < prev_fraction);
      prev_fraction = fraction;
    }
  }
}

TEST_CASE("window soundness against executed schedules") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 10; ++i) {
    ReducedDag dag = random_lane_dag(rng);
    LogicalTopology topo = LogicalTopology::zero(dag.port_caps);
    std::uniform_int_distribution<int> dist(1, 3);
    for (auto [a, b2] : dag.active_pairs()) topo.set_symmetric(a, b2, dist(rng));
    SimTrace trace = simulate(topo, dag, dag.bandwidth_gbps);
    TimeWindows w = cal_task_time_windows(dag, dag.bandwidth_gbps, trace.makespan_ms);
    double tol = 1e-9 * (1 + trace.makespan_ms);
    for (const auto& task : dag.tasks) {
      CHECK(trace.start[task.id] >= w.est[task.id] - tol);
      CHECK(trace.completion[task.id] <= w.lct[task.id] + tol);
    }
  }
}

TEST_CASE("baseline trace stays inside its own pruned bounds") {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 10; ++i) {
    ReducedDag dag = random_lane_dag(rng);
    LogicalTopology full = LogicalTopology::full_port(dag.port_caps, dag.active_pairs());
    SimTrace trace = simulate(full, dag, dag.bandwidth_gbps);
    TaskAnchors anchors = derive_anchors(trace);
    IndexBounds bounds = task_time_index_pruning(dag, trace.num_intervals(), anchors);
    for (const auto& task : dag.tasks) {
      if (task.is_virtual()) continue;
      CHECK(anchors.start_interval[task.id] >= bounds.k_min[task.id]);
      CHECK(anchors.end_interval[task.id] <= bounds.k_max[task.id]);
    }
  }
}

TEST_CASE("circuit upper bounds from interval MWIS") {
  SUBCASE("dependent tasks cannot stack") {
    DagBuilder b(2);
    TaskId a = b.task(0, 1, 3, 10.0);
    TaskId c = b.task(0, 1, 5, 10.0);
    b.dep(a, c, 0.0);
    ReducedDag dag = b.build();
    CircuitUpperBounds caps = x_upper_bound(dag, 400.0, 1000.0);
    CHECK(caps.at(0, 1) == 5);
  }

  SUBCASE("independent tasks add up") {
    DagBuilder b(2);
    b.task(0, 1, 3, 10.0);
    b.task(0, 1, 5, 10.0);
    ReducedDag dag = b.build();
    CircuitUpperBounds caps = x_upper_bound(dag, 400.0, 1000.0);
    CHECK(caps.at(0, 1) == 8);
  }

  SUBCASE("bound never exceeds the pair's total flows") {
    ParallelConfig cfg = fig_config();
    ReducedDag dag = reduce_dag(build_workload(cfg, Placement::round_robin(cfg)));
    LogicalTopology full = LogicalTopology::full_port(dag.port_caps, dag.active_pairs());
    SimTrace baseline = simulate(full, dag, dag.bandwidth_gbps);
    CircuitUpperBounds caps = x_upper_bound(dag, dag.bandwidth_gbps,
                                            2 * baseline.makespan_ms);
    std::map<std::pair<PodId, PodId>, int> total_flows;
    for (const auto& task : dag.tasks) {
      if (task.is_virtual()) continue;
      auto key = std::minmax(task.src_pod, task.dst_pod);
      total_flows[{key.first, key.second}] += task.flows;
    }
    for (auto [pair, flows] : total_flows) {
      CHECK(caps.at(pair.first, pair.second) >= 1);
      CHECK(caps.at(pair.first, pair.second) <= flows);
    }
  }
}

TEST_CASE("exact MWIS") {
  SUBCASE("empty graph") {
    ConflictGraph g;
    CHECK(solve_mwis(g) == 0);
  }

  SUBCASE("triangle keeps only the heaviest vertex") {
    ConflictGraph g;
    g.weights = {1, 2, 3};
    g.adjacency = {{false, true, true}, {true, false, true}, {true, true, false}};
    CHECK(solve_mwis(g) == 3);
  }

  SUBCASE("matches brute force on random graphs") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> size_dist(1, 15);
    std::uniform_int_distribution<int> weight_dist(1, 9);
    std::uniform_real_distribution<double> edge_dist(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      int n = size_dist(rng);
      ConflictGraph g;
      g.weights.resize(n);
      for (int i = 0; i < n; ++i) g.weights[i] = weight_dist(rng);
      g.adjacency.assign(n, std::vector<bool>(n, false));
      double density = edge_dist(rng);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (edge_dist(rng) < density) g.adjacency[i][j] = g.adjacency[j][i] = true;
      CHECK(solve_mwis(g) == mwis_oracle(g));
    }
  }
}
