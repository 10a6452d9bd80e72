#pragma once

#include <string>
#include <utility>

#include "delta/dag.hpp"
#include "delta/des.hpp"
#include "delta/pruning.hpp"
#include "delta/types.hpp"
#include "delta/workload.hpp"

namespace delta {

// JSON (de)serialization for every file the CLI reads or writes. All
// writers emit stable key order so files round-trip byte-identically.

std::string workload_config_to_json(const ParallelConfig& cfg, const Placement& place);
std::pair<ParallelConfig, Placement> workload_config_from_json(const std::string& text);

std::string reduced_dag_to_json(const ReducedDag& dag);
ReducedDag reduced_dag_from_json(const std::string& text);

std::string topology_to_json(const LogicalTopology& topo);
LogicalTopology topology_from_json(const std::string& text);  // validates on load

std::string trace_to_json(const SimTrace& trace);
SimTrace trace_from_json(const std::string& text);

std::string bounds_to_json(const TimeWindows& windows, const IndexBounds& bounds,
                           const CircuitUpperBounds& caps);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace delta
