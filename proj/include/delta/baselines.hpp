#pragma once

#include <vector>

#include "delta/dag.hpp"
#include "delta/types.hpp"

namespace delta {

/// Iteration-aggregated traffic volume per ordered pod pair.
struct TrafficMatrix {
  std::vector<std::vector<VolumeGb>> volume_gb;

  static TrafficMatrix from_dag(const ReducedDag& dag);
  int num_pods() const { return static_cast<int>(volume_gb.size()); }
  /// Symmetrized weight of an unordered pair.
  VolumeGb pair_weight(PodId i, PodId j) const;
};

/// Ports split proportionally to traffic volume (largest-remainder
/// apportionment, one circuit per active pair guaranteed first).
LogicalTopology prop_alloc(const TrafficMatrix& tm, const std::vector<int>& port_caps);

/// As prop_alloc with square-root volume weights.
LogicalTopology sqrt_alloc(const TrafficMatrix& tm, const std::vector<int>& port_caps);

/// Repeatedly grants one circuit to the heaviest pair with headroom at
/// both ends, halving its weight each time. Lexicographic tie-break.
LogicalTopology iter_halve(const TrafficMatrix& tm, const std::vector<int>& port_caps);

}  // namespace delta
