#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "delta/dag.hpp"
#include "delta/des.hpp"
#include "delta/pruning.hpp"

namespace delta {

enum class VarKind { Continuous, Binary, Integer };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = 0.0;
};

enum class Sense { LessEq, GreaterEq, Equal };

struct Constraint {
  std::string name;                              // tag + index suffix, unique
  std::vector<std::pair<int, double>> terms;     // (variable index, coefficient)
  Sense sense = Sense::LessEq;
  double rhs = 0.0;
  std::string tag;                               // constraint family
};

/// Solver-agnostic MILP intermediate representation.
struct MilpModel {
  std::vector<Variable> variables;
  std::vector<Constraint> constraints;
  std::vector<std::pair<int, double>> objective;  // minimized
  std::string objective_name = "obj";

  // Metadata for audits and hot-starting.
  int num_intervals = 0;     // K (variable-interval) or T (fixed-step)
  double big_m = 0.0;
  bool fixed_step = false;
  double step_ms = 0.0;

  std::map<std::string, int> name_index;  // variable name -> index

  int add_variable(const std::string& name, VarKind kind, double lower, double upper);
  int var(const std::string& name) const;  // throws on unknown name
  bool has_var(const std::string& name) const;
  void add_constraint(std::string tag, std::string name,
                      std::vector<std::pair<int, double>> terms, Sense sense, double rhs);

  std::map<std::string, int> constraint_counts_by_tag() const;
  /// Variables whose bounds leave more than a single point.
  int free_variable_count() const;

  /// Largest violation across all constraints and variable bounds for a
  /// full assignment (by variable index).
  double max_violation(const std::vector<double>& assignment) const;
  double objective_value(const std::vector<double>& assignment) const;
};

enum class MilpMode {
  Topology,  // fair-sharing constraints on: topology-only optimization
  Joint,     // rates co-optimized: fair-sharing constraints omitted
};

struct VarIntervalOptions {
  MilpMode mode = MilpMode::Joint;
  int num_intervals = 0;                    // K; required
  TimeMs t_up = 0.0;                        // time horizon and Big-M for time constraints
  const IndexBounds* index_bounds = nullptr;         // optional zero-fixes
  const CircuitUpperBounds* circuit_caps = nullptr;  // optional x upper bounds
};

/// The variable-length time interval formulation: interval durations are
/// decision variables anchored to task start/completion events, so the
/// model size is independent of temporal resolution.
MilpModel build_var_interval_model(const ReducedDag& dag, double bandwidth_gbps,
                                   const VarIntervalOptions& opts);

struct FixedStepOptions {
  MilpMode mode = MilpMode::Joint;
  TimeMs step_ms = 1.0;
  int num_steps = 0;  // T; horizon = T * step
};

/// Uniform time-slice formulation used for cross-validation at tiny
/// scale; the variable count grows with the number of slices.
MilpModel build_fixed_step_model(const ReducedDag& dag, double bandwidth_gbps,
                                 const FixedStepOptions& opts);

/// CPLEX-style LP format text; byte-stable for a fixed model.
std::string emit_lp(const MilpModel& model);

enum class SolveStatus { Optimal, Feasible, Infeasible, Timeout, Error };

struct Solution {
  SolveStatus status = SolveStatus::Error;
  double objective = 0.0;
  std::map<std::string, double> values;
  double solve_seconds = 0.0;
  std::string raw_status;  // solver's own wording, kept for diagnostics

  double value(const std::string& name, double fallback = 0.0) const;
  std::vector<double> assignment_vector(const MilpModel& model) const;
};

/// Runs `solver_cmd` as a subprocess with {lp}, {sol}, {timeout} (and
/// optional {mst}) placeholders, then parses the solution file (CBC and
/// HiGHS dialects, plus plain name/value pairs). Throws
/// SolverUnavailableError when the command cannot run.
Solution solve(const MilpModel& model, const std::string& solver_cmd, double timeout_s,
               const std::map<std::string, double>* hot_start = nullptr,
               const std::string& work_dir = "");

/// Default solver command: $DELTA_SOLVER_CMD if set, otherwise empty.
std::string default_solver_cmd();

/// Maps a DES trace into a complete feasible assignment of the joint
/// model built with at least the trace's interval count. Throws
/// InfeasibleError when a pruned index bound cuts the trace off.
std::map<std::string, double> hot_start_from_trace(const SimTrace& trace,
                                                   const LogicalTopology& topo,
                                                   const MilpModel& model,
                                                   const ReducedDag& dag);

/// Second solve: minimize total allocated ports subject to the makespan
/// staying at (or under) c_star.
MilpModel with_port_minimization(const MilpModel& model, double c_star);

/// Rounds the integer circuit variables of a feasible solution into a
/// validated topology.
LogicalTopology extract_topology(const Solution& sol, const ReducedDag& dag);

/// Parses a solution file body; exposed for tests.
Solution parse_solution_text(const std::string& text);

}  // namespace delta
