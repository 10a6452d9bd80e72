#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace delta {

// All times are milliseconds, volumes are gigabits, bandwidths are Gb/s.
using TimeMs = double;
using VolumeGb = double;

inline constexpr double kGbpsToGbPerMs = 1.0 / 1000.0;

using PodId = int;
using GpuId = int;
using TaskId = int;

enum class TaskKind {
  VirtualSource,     // zero-volume anchor at t=0
  PipelineForward,   // activation transfer to the next stage
  PipelineBackward,  // gradient transfer to the previous stage
  GradientSync,      // data-parallel weight-gradient synchronization
};

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

/// One inter-pod communication task: source/destination pod, concurrent
/// flow count (one flow per GPU pair) and total volume, plus the GPU sets
/// behind the flows.
struct CommTask {
  TaskId id = 0;
  PodId src_pod = -1;
  PodId dst_pod = -1;
  int flows = 0;
  VolumeGb volume_gb = 0.0;
  std::vector<GpuId> src_gpus;
  std::vector<GpuId> dst_gpus;
  TaskKind kind = TaskKind::VirtualSource;

  // Structural coordinates used for replica projection and reporting.
  int replica = -1;      // -1 for the virtual source
  int stage = -1;        // sending stage (PP) or synced stage (DP)
  int micro_batch = -1;  // -1 for DP and the virtual source

  bool is_virtual() const { return kind == TaskKind::VirtualSource; }

  /// Minimum physical duration at per-flow bandwidth B (Gb/s).
  TimeMs min_duration_ms(double bandwidth_gbps) const {
    if (is_virtual()) return 0.0;
    return volume_gb / (static_cast<double>(flows) * bandwidth_gbps * kGbpsToGbPerMs);
  }
};

/// Number of optical circuits provisioned between every pod pair.
/// Symmetric with a zero diagonal; row/column sums are capped by the
/// per-pod port budgets.
struct LogicalTopology {
  std::vector<std::vector<int>> circuits;  // circuits[i][j]
  std::vector<int> port_caps;              // U_p per pod

  int num_pods() const { return static_cast<int>(circuits.size()); }

  static LogicalTopology zero(const std::vector<int>& port_caps);
  /// Per active pair (i,j): circuits = min(U_i, U_j). May exceed port
  /// budgets; used only as a profiling reference, never deployed.
  static LogicalTopology full_port(const std::vector<int>& port_caps,
                                   const std::vector<std::pair<PodId, PodId>>& active_pairs);

  int at(PodId i, PodId j) const { return circuits.at(i).at(j); }
  void set_symmetric(PodId i, PodId j, int value);
  int total_ports() const;                 // sum over ordered pairs (both directions)
  int allocated_ports(PodId p) const;      // row sum for pod p

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverUnavailableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace delta
