#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "delta/types.hpp"
#include "delta/workload.hpp"

namespace delta {

struct Dependency {
  TaskId pre = 0;
  TaskId succ = 0;
  TimeMs gap_ms = 0.0;  // rigid interval between pre's completion and succ's start
};

/// Inter-pod communication DAG: tasks plus weighted precedence edges that
/// absorb all intra-pod work. The optimization substrate for every
/// algorithm in the toolkit.
struct ReducedDag {
  std::vector<CommTask> tasks;
  std::vector<Dependency> deps;

  // Network context carried along so files are self-contained.
  int num_pods = 0;
  std::vector<int> port_caps;
  double bandwidth_gbps = 0.0;
  int num_replicas = 1;

  TaskId virtual_source = 0;

  std::vector<std::vector<std::pair<TaskId, TimeMs>>> successors() const;
  std::vector<std::vector<std::pair<TaskId, TimeMs>>> predecessors() const;
  std::vector<TaskId> topological_order() const;  // throws ConfigError on a cycle
  bool is_acyclic() const;

  /// Tasks indexed by the GPU they inject from / receive into.
  std::map<GpuId, std::vector<TaskId>> src_index() const;
  std::map<GpuId, std::vector<TaskId>> dst_index() const;

  /// Ordered pod pairs that carry at least one task.
  std::vector<std::pair<PodId, PodId>> active_directed_pairs() const;
  /// Unordered active pairs (i < j), union of both directions.
  std::vector<std::pair<PodId, PodId>> active_pairs() const;

  void validate() const;
};

/// Reachability closure over tasks: reachable(u, v) is true iff a
/// dependency path u -> v exists (reflexive).
struct Reachability {
  std::vector<std::vector<bool>> matrix;
  bool reachable(TaskId u, TaskId v) const { return matrix[u][v]; }
};

/// Collapses intra-pod nodes of the full DAG into weighted edges between
/// inter-pod tasks. Parallel intra-pod chains between the same task pair
/// merge keeping the largest gap.
ReducedDag reduce_dag(const Workload& workload);

/// Map from reference-replica task ids to the corresponding task ids in
/// every replica of the original DAG.
struct ReplicationMap {
  std::vector<std::vector<TaskId>> peers;  // peers[ref_task][replica]
  int num_replicas = 1;
};

struct BarrierRecord {
  // dp_tasks[stage][replica] = DP task id in the original DAG
  std::vector<std::vector<TaskId>> dp_tasks;
  int bottleneck_replica = 0;  // replica whose sync phase starts last
};

enum class ProjectionMode { Auto, Homogeneous, Decompose };

struct ProjectionResult {
  bool homogeneous = true;
  // Homogeneous mode: the reference replica's DAG plus the broadcast map.
  ReducedDag reference;
  ReplicationMap map;
  // Decomposition mode: independent per-replica sub-DAGs plus the
  // synchronization barrier alignment record.
  std::vector<ReducedDag> per_replica;
  BarrierRecord barrier;
};

/// Projects a multi-replica DAG onto a single reference replica when the
/// replicas are isomorphic, or decomposes it into per-replica sub-DAGs
/// otherwise.
ProjectionResult project_single_replica(const ReducedDag& dag, int replicas,
                                        ProjectionMode mode = ProjectionMode::Auto);

/// Expands a topology solved on the reference replica back onto the full
/// pod set: translated pair demands accumulate where replicas share pairs.
LogicalTopology broadcast_topology(const LogicalTopology& reference_topo,
                                   const ReducedDag& full_dag,
                                   const ProjectionResult& projection);

/// Reflexive-transitive closure via repeated boolean matrix squaring.
Reachability transitive_closure(const ReducedDag& dag);

/// Longest weighted path through the reduced DAG with task durations
/// V/(F*B) and edge gaps; equals the iteration makespan under
/// unconstrained inter-pod capacity.
TimeMs longest_path_ms(const ReducedDag& dag);

}  // namespace delta
