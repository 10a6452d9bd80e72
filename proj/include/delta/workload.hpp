#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "delta/types.hpp"

namespace delta {

/// Declarative description of one hybrid-parallel training iteration.
struct ParallelConfig {
  int tp = 1;
  int pp = 1;
  int dp = 1;
  int ep = 0;  // 0 for dense models; EP traffic stays intra-pod either way
  int num_micro_batches = 1;
  int num_pods = 1;
  int gpus_per_pod_per_replica = 1;
  double nic_bandwidth_gbps = 400.0;
  TimeMs fwd_compute_ms = 1.0;
  TimeMs bwd_compute_ms = 2.0;
  VolumeGb pp_volume_gb = 1.0;   // per micro-batch per stage boundary, at base_seq_len
  VolumeGb dp_volume_gb = 1.0;   // gradient volume per stage
  int seq_len = 4096;
  int base_seq_len = 4096;

  void validate() const;

  /// Activation volume scales linearly with sequence length.
  VolumeGb effective_pp_volume_gb() const {
    return pp_volume_gb * static_cast<double>(seq_len) / static_cast<double>(base_seq_len);
  }
};

/// Stage-to-pod and stage-to-GPU assignment for every replica.
struct Placement {
  // stage_to_pod[replica][stage]
  std::vector<std::vector<PodId>> stage_to_pod;
  // gpu_assignment[replica][stage] = ordered GPU ids (tp of them)
  std::vector<std::vector<std::vector<GpuId>>> gpu_assignment;

  static Placement round_robin(const ParallelConfig& cfg, bool reversed_stages = false);
  /// Redeploys the model with the stage order flipped: stage s takes over
  /// the pods (and their GPUs) that hosted stage pp-1-s.
  static Placement reversed(const ParallelConfig& cfg, const Placement& place);

  void validate(const ParallelConfig& cfg) const;
  /// Port budget per pod: the number of GPUs the job occupies there.
  std::vector<int> port_caps(const ParallelConfig& cfg) const;
  /// GPUs of one (pod, replica) pair; used by the replica projection.
  int num_pods(const ParallelConfig& cfg) const { return cfg.num_pods; }
};

struct Slot {
  bool forward = true;
  int micro_batch = 0;  // 0-based
  bool operator==(const Slot&) const = default;
};

/// Per-stage 1F1B execution order: warmup forwards, strict
/// forward/backward alternation, backward drain.
std::vector<std::vector<Slot>> synthesize_1f1b_schedule(const ParallelConfig& cfg);

struct FullDagNode {
  int id = 0;
  bool is_comm = false;   // true: inter-pod communication (duration topology-dependent)
  TimeMs duration_ms = 0; // fixed duration of compute / intra-pod transfer nodes
  TaskId comm_task = -1;  // index into the CommTask list when is_comm
  std::string label;
};

/// Complete computation-communication DAG of one iteration. Compute and
/// intra-pod transfer nodes carry fixed durations; inter-pod
/// communication nodes reference CommTasks whose durations the topology
/// decides.
struct FullDag {
  std::vector<FullDagNode> nodes;
  std::vector<std::pair<int, int>> edges;

  std::vector<std::vector<int>> adjacency() const;
  bool is_acyclic() const;
  std::vector<int> topological_order() const;  // throws ConfigError on a cycle
};

struct Workload {
  FullDag full_dag;
  std::vector<CommTask> tasks;  // tasks[0] is the virtual source
  ParallelConfig cfg;
  Placement placement;
};

/// Expands the 1F1B schedule and placement into the full DAG plus the
/// aggregated inter-pod communication task list. Throws ConfigError when
/// the placement leaves no inter-pod task at all.
Workload build_workload(const ParallelConfig& cfg, const Placement& place);

/// (PP tasks per replica, DP tasks per replica) assuming every stage
/// boundary crosses pods: 2*(pp-1)*mbs and pp.
std::pair<int, int> count_tasks(const ParallelConfig& cfg);

}  // namespace delta
