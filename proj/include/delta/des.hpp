#pragma once

#include <vector>

#include "delta/dag.hpp"
#include "delta/types.hpp"

namespace delta {

/// Execution trace of one simulated iteration: per-task start/completion
/// times, the ordered unique event timestamps, and per-interval
/// transmitted volumes.
struct SimTrace {
  std::vector<TimeMs> start;       // S_m
  std::vector<TimeMs> completion;  // C_m
  std::vector<TimeMs> events;      // sorted unique timestamps, events[0] == 0
  // interval_volumes[m][k] = volume task m moved during [events[k], events[k+1})
  std::vector<std::vector<VolumeGb>> interval_volumes;
  TimeMs makespan_ms = 0.0;

  int num_intervals() const { return static_cast<int>(events.size()) - 1; }
  /// 1-based interval index whose start equals t; throws if t is not an event.
  int interval_of_event(TimeMs t) const;
};

struct SimOptions {
  bool ideal = false;  // drop per-pair circuit caps; NIC limits stay
};

/// Event-driven execution of the reduced DAG over a logical topology with
/// max-min fair bandwidth sharing. Deterministic for fixed inputs. Throws
/// InfeasibleError when a task's pod pair has no circuit.
SimTrace simulate(const LogicalTopology& topo, const ReducedDag& dag,
                  double bandwidth_gbps, const SimOptions& opts = {});

/// One max-min fair allocation instant: per-task aggregate rates (Gb/ms)
/// for the given active tasks under circuit and NIC caps. Exposed for
/// direct testing; simulate() uses it between events.
std::vector<double> max_min_share(const std::vector<TaskId>& active,
                                  const ReducedDag& dag,
                                  const LogicalTopology& topo,
                                  double bandwidth_gbps, bool ideal);

/// Sum of communication durations (C_m - S_m) along the executed
/// schedule's critical path, found by backtracking binding constraints
/// from the last-finishing task. Ties break toward the smallest task id.
TimeMs critical_path_comm_time(const SimTrace& trace, const ReducedDag& dag);

/// The same chain as critical_path_comm_time, exposed for reporting.
std::vector<TaskId> critical_path_tasks(const SimTrace& trace, const ReducedDag& dag);

/// Normalized communication time: critical-path communication time under
/// the OCS topology over that under the ideal non-blocking network.
double nct(const SimTrace& trace_ocs, const SimTrace& trace_ideal, const ReducedDag& dag);

struct TaskAnchors {
  int num_intervals = 0;            // K
  std::vector<int> start_interval;  // 1-based, interval containing S_m
  std::vector<int> end_interval;    // 1-based, last interval before C_m
};

/// Interval-index anchors profiled from a baseline trace; consumed by the
/// task-time index pruning.
TaskAnchors derive_anchors(const SimTrace& trace);

}  // namespace delta
