#pragma once

#include <vector>

#include "delta/dag.hpp"
#include "delta/des.hpp"

namespace delta {

/// Earliest-start / latest-completion windows plus minimum physical
/// durations, derived by forward/backward propagation over the DAG.
struct TimeWindows {
  std::vector<TimeMs> est;
  std::vector<TimeMs> lct;
  std::vector<TimeMs> tau;  // V/(F*B) per task
};

/// Per-task interval-index bounds for the variable-interval model; every
/// (task, interval) cell outside [k_min, k_max] is fixed to zero.
struct IndexBounds {
  std::vector<int> k_min;  // 1-based
  std::vector<int> k_max;
  int num_intervals = 0;   // K

  long long retained_cells() const;
};

/// Per-pod-pair circuit caps from interval-wise maximum-weight
/// independent sets over the task conflict graph.
struct CircuitUpperBounds {
  std::vector<std::vector<int>> cap;  // cap[i][j], symmetric

  int at(PodId i, PodId j) const { return cap.at(i).at(j); }
};

/// Forward/backward window propagation. Throws InfeasibleError when some
/// window inverts (T_up below the critical path).
TimeWindows cal_task_time_windows(const ReducedDag& dag, double bandwidth_gbps,
                                  TimeMs t_up);

/// Anchor-guided index pruning: tasks with successors start from their
/// profiled anchor bounds (widened by `widen` intervals); bounds tighten
/// through forward/backward passes stepping 2 intervals across gap edges
/// and 1 otherwise. Throws InfeasibleError when bounds invert.
IndexBounds task_time_index_pruning(const ReducedDag& dag, int num_intervals,
                                    const TaskAnchors& anchors, int widen = 1);

/// Circuit upper bounds per pod pair via MWIS over active-task conflict
/// graphs at every window interval.
CircuitUpperBounds x_upper_bound(const ReducedDag& dag, double bandwidth_gbps,
                                 TimeMs t_up);

struct ConflictGraph {
  std::vector<int> weights;
  std::vector<std::vector<bool>> adjacency;  // symmetric, no self loops
};

/// Exact maximum-weight independent set via branch and bound with a
/// greedy incumbent.
long long solve_mwis(const ConflictGraph& graph);

}  // namespace delta
