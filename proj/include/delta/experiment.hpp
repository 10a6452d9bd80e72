#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delta/heuristic.hpp"
#include "delta/types.hpp"
#include "delta/workload.hpp"

namespace delta {

struct WorkloadRef {
  std::string name;
  std::string config_path;
};

struct ExperimentSpec {
  std::vector<WorkloadRef> workloads;
  std::vector<std::string> algorithms;  // prop, sqrt, iterhalve, fast, topo, joint
  std::vector<double> bandwidths_gbps;
  std::vector<int> seq_lens;
  std::string solver_cmd;  // empty: $DELTA_SOLVER_CMD, else MILP rows are skipped
  double timeout_s = 600.0;
  std::string out_dir;
  std::uint64_t seed = 1;
  int workers = 4;
  bool hot_start = false;
  bool min_ports = false;
  GaParams ga;

  void validate() const;
};

ExperimentSpec experiment_spec_from_json(const std::string& text);

struct ReportRow {
  std::string workload;
  std::string algorithm;
  double bandwidth_gbps = 0.0;
  int seq_len = 0;
  std::string status;  // ok | skipped:<reason> | error:<reason>
  double nct = 0.0;
  TimeMs makespan_ms = 0.0;
  TimeMs ideal_makespan_ms = 0.0;
  int total_ports = 0;
  double allocated_port_ratio = 0.0;
  double wall_ms = 0.0;  // reported in report.json only; report.csv stays deterministic
};

struct Report {
  std::vector<ReportRow> rows;

  std::string to_csv() const;   // deterministic: excludes wall time
  std::string to_json() const;  // includes wall time
};

/// Sweeps every (workload, algorithm, bandwidth, seq_len) cell: builds the
/// workload, profiles the full-port baseline, dispatches the algorithm,
/// and evaluates NCT against the ideal run. Cells run concurrently up to
/// spec.workers; per-cell failures land in the report without aborting
/// the sweep. Writes manifest.json, report.csv, report.json, topologies/
/// and traces/ under spec.out_dir.
Report run_experiment(const ExperimentSpec& spec);

struct ReallocationReport {
  ReportRow original;        // workload A after port minimization
  ReportRow reversed_base;   // A^T with its own port budget only
  ReportRow reversed_boost;  // A^T with A's freed ports added
  std::vector<int> freed_ports;  // per pod
};

/// The port-reallocation scenario: minimize A's ports at its optimal
/// makespan, hand the freed per-pod ports to the reversed-placement
/// workload, and re-optimize. Asserts A's makespan is unchanged.
ReallocationReport port_reallocation_scenario(const std::string& workload_config_path,
                                              const std::string& algorithm,
                                              const ExperimentSpec& spec);

}  // namespace delta
