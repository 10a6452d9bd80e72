#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "delta/baselines.hpp"
#include "delta/des.hpp"
#include "delta/experiment.hpp"
#include "delta/json_io.hpp"
#include "delta/milp.hpp"

using namespace delta;

namespace {

int dispatch(int argc, char** argv) {
  CLI::App app{"OCS logical topology optimization for training clusters"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Build the inter-pod DAG from a config");
  std::string gen_config, gen_out = "dag.json";
  generate->add_option("--config", gen_config, "workload config JSON")->required();
  generate->add_option("--out", gen_out, "output DAG path");

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "Run the DES over a topology");
  std::string sim_dag, sim_topo, sim_out;
  bool sim_ideal = false;
  simulate_cmd->add_option("--dag", sim_dag, "reduced DAG JSON")->required();
  simulate_cmd->add_option("--topo", sim_topo, "topology JSON");
  simulate_cmd->add_flag("--ideal", sim_ideal, "unbounded pair capacity (NIC limits stay)");
  simulate_cmd->add_option("--out", sim_out, "trace output path");

  // prune
  auto* prune = app.add_subcommand("prune", "Compute windows, index bounds, circuit caps");
  std::string prune_dag, prune_trace, prune_out = "bounds.json";
  prune->add_option("--dag", prune_dag, "reduced DAG JSON")->required();
  prune->add_option("--trace", prune_trace, "baseline trace (full-port DES if omitted)");
  prune->add_option("--out", prune_out, "bounds output path");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Compute a logical topology");
  std::string opt_algo, opt_dag, opt_out = "topology.json", opt_solver = default_solver_cmd();
  std::string opt_convergence;
  double opt_timeout = 600.0;
  std::uint64_t opt_seed = 1;
  int opt_pop = 64, opt_gens = 500, opt_workers = 4;
  bool opt_hot = false, opt_min_ports = false;
  optimize->add_option("--algo", opt_algo, "prop|sqrt|iterhalve|fast|topo|joint")
      ->required();
  optimize->add_option("--dag", opt_dag, "reduced DAG JSON")->required();
  optimize->add_option("--out", opt_out, "topology output path");
  optimize->add_option("--solver-cmd", opt_solver,
                       "solver command template with {lp} {sol} {timeout}");
  optimize->add_option("--timeout", opt_timeout, "solver time limit (s)");
  optimize->add_option("--seed", opt_seed, "random seed");
  optimize->add_option("--pop", opt_pop, "GA population");
  optimize->add_option("--gens", opt_gens, "GA generations");
  optimize->add_option("--workers", opt_workers, "parallel fitness evaluations");
  optimize->add_flag("--hot-start", opt_hot, "seed the solver from a DES trace");
  optimize->add_flag("--min-ports", opt_min_ports, "lexicographic port minimization");
  optimize->add_option("--convergence", opt_convergence, "GA convergence CSV path");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "NCT of a topology against the ideal run");
  std::string eval_dag, eval_topo;
  evaluate->add_option("--dag", eval_dag, "reduced DAG JSON")->required();
  evaluate->add_option("--topo", eval_topo, "topology JSON")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a full experiment spec");
  std::string sweep_spec;
  sweep->add_option("--spec", sweep_spec, "experiment spec JSON")->required();

  // realloc
  auto* realloc_cmd =
      app.add_subcommand("realloc", "Port reallocation onto the reversed workload");
  std::string re_spec, re_workload, re_algo = "fast";
  realloc_cmd->add_option("--spec", re_spec, "experiment spec JSON")->required();
  realloc_cmd->add_option("--workload", re_workload, "workload config JSON")->required();
  realloc_cmd->add_option("--algo", re_algo, "fast|topo|joint");

  CLI11_PARSE(app, argc, argv);

  if (*generate) {
    auto [cfg, place] = workload_config_from_json(read_file(gen_config));
    ReducedDag dag = reduce_dag(build_workload(cfg, place));
    write_file(gen_out, reduced_dag_to_json(dag));
    std::printf("wrote %s: %zu tasks, %zu dependencies, %d pods\n", gen_out.c_str(),
                dag.tasks.size(), dag.deps.size(), dag.num_pods);
    return 0;
  }

  if (*simulate_cmd) {
    ReducedDag dag = reduced_dag_from_json(read_file(sim_dag));
    LogicalTopology topo = sim_topo.empty()
                               ? LogicalTopology::zero(dag.port_caps)
                               : topology_from_json(read_file(sim_topo));
    if (sim_topo.empty() && !sim_ideal)
      throw ConfigError("simulate needs --topo or --ideal");
    SimTrace trace = simulate(topo, dag, dag.bandwidth_gbps, {.ideal = sim_ideal});
    if (!sim_out.empty()) write_file(sim_out, trace_to_json(trace));
    std::printf("makespan %.6f ms over %d intervals, critical-path comm %.6f ms\n",
                trace.makespan_ms, trace.num_intervals(),
                critical_path_comm_time(trace, dag));
    return 0;
  }

  if (*prune) {
    ReducedDag dag = reduced_dag_from_json(read_file(prune_dag));
    SimTrace trace;
    if (prune_trace.empty()) {
      LogicalTopology full = LogicalTopology::full_port(dag.port_caps, dag.active_pairs());
      trace = simulate(full, dag, dag.bandwidth_gbps);
    } else {
      trace = trace_from_json(read_file(prune_trace));
    }
    double t_up = 2.0 * trace.makespan_ms;
    TimeWindows windows = cal_task_time_windows(dag, dag.bandwidth_gbps, t_up);
    TaskAnchors anchors = derive_anchors(trace);
    IndexBounds bounds = task_time_index_pruning(dag, trace.num_intervals(), anchors);
    CircuitUpperBounds caps = x_upper_bound(dag, dag.bandwidth_gbps, t_up);
    write_file(prune_out, bounds_to_json(windows, bounds, caps));
    std::printf("wrote %s: K=%d, retained cells %lld of %lld\n", prune_out.c_str(),
                bounds.num_intervals, bounds.retained_cells(),
                static_cast<long long>(dag.tasks.size()) * bounds.num_intervals);
    return 0;
  }

  if (*optimize) {
    ReducedDag dag = reduced_dag_from_json(read_file(opt_dag));
    LogicalTopology topo;
    if (opt_algo == "prop" || opt_algo == "sqrt" || opt_algo == "iterhalve") {
      TrafficMatrix tm = TrafficMatrix::from_dag(dag);
      topo = (opt_algo == "prop")   ? prop_alloc(tm, dag.port_caps)
             : (opt_algo == "sqrt") ? sqrt_alloc(tm, dag.port_caps)
                                    : iter_halve(tm, dag.port_caps);
    } else if (opt_algo == "fast") {
      GaParams params;
      params.seed = opt_seed;
      params.population = opt_pop;
      params.generations = opt_gens;
      params.workers = opt_workers;
      GaResult result = run_ga(dag, params);
      topo = result.topology;
      if (!opt_convergence.empty()) {
        std::ostringstream os;
        os << "generation,best_makespan_ms,best_total_ports\n";
        for (auto [gen, makespan, ports] : result.convergence)
          os << gen << "," << makespan << "," << ports << "\n";
        write_file(opt_convergence, os.str());
      }
      std::printf("GA finished after %d generations, makespan %.6f ms\n",
                  result.generations_run, result.best.makespan_ms);
    } else if (opt_algo == "topo" || opt_algo == "joint") {
      ExperimentSpec spec;
      spec.solver_cmd = opt_solver;
      spec.timeout_s = opt_timeout;
      spec.hot_start = opt_hot;
      spec.min_ports = opt_min_ports;
      spec.workloads.push_back({"cli", ""});
      spec.algorithms.push_back(opt_algo);
      spec.bandwidths_gbps.push_back(dag.bandwidth_gbps);
      spec.seq_lens.push_back(0);
      // run_milp is internal to the experiment module; reuse via a one-cell
      // call path would drag file IO along, so invoke the pieces directly.
      if (opt_solver.empty())
        throw SolverUnavailableError("no solver command (set DELTA_SOLVER_CMD)");
      ProjectionResult projection = project_single_replica(dag, dag.num_replicas);
      const ReducedDag& ref = projection.reference;
      TrafficMatrix ref_tm = TrafficMatrix::from_dag(ref);
      LogicalTopology seed_topo = prop_alloc(ref_tm, ref.port_caps);
      SimTrace seed_trace = simulate(seed_topo, ref, ref.bandwidth_gbps);
      CircuitUpperBounds caps =
          x_upper_bound(ref, ref.bandwidth_gbps, 2.0 * seed_trace.makespan_ms);
      LogicalTopology baseline_topo = seed_topo;
      for (auto [i, j] : ref.active_pairs())
        baseline_topo.set_symmetric(
            i, j, std::min(baseline_topo.at(i, j), std::max(1, caps.at(i, j))));
      SimTrace baseline = simulate(baseline_topo, ref, ref.bandwidth_gbps);
      double t_up = 2.0 * baseline.makespan_ms;
      TaskAnchors anchors = derive_anchors(baseline);
      int k_model = baseline.num_intervals() + std::max(1, baseline.num_intervals() / 10);
      anchors.num_intervals = k_model;
      IndexBounds bounds = task_time_index_pruning(ref, k_model, anchors);
      VarIntervalOptions opts;
      opts.mode = opt_algo == "topo" ? MilpMode::Topology : MilpMode::Joint;
      opts.num_intervals = k_model;
      opts.t_up = t_up;
      opts.index_bounds = &bounds;
      opts.circuit_caps = &caps;
      MilpModel model = build_var_interval_model(ref, ref.bandwidth_gbps, opts);
      std::map<std::string, double> start_values;
      const std::map<std::string, double>* start_ptr = nullptr;
      if (opt_hot && opt_algo == "joint") {
        start_values = hot_start_from_trace(baseline, baseline_topo, model, ref);
        start_ptr = &start_values;
      }
      Solution sol = solve(model, opt_solver, opt_timeout, start_ptr);
      if (sol.status == SolveStatus::Infeasible) throw InfeasibleError("MILP infeasible");
      if (sol.status == SolveStatus::Error)
        throw InfeasibleError("MILP solve failed: " + sol.raw_status);
      double c_star = sol.objective;
      if (opt_min_ports) {
        Solution sol2 = solve(with_port_minimization(model, c_star), opt_solver, opt_timeout);
        if (!sol2.values.empty() && sol2.status != SolveStatus::Infeasible &&
            sol2.status != SolveStatus::Error)
          sol = std::move(sol2);
      }
      LogicalTopology ref_topo = extract_topology(sol, ref);
      topo = broadcast_topology(ref_topo, dag, projection);
      std::printf("MILP %s: objective %.6f ms (%s)\n", opt_algo.c_str(), c_star,
                  sol.raw_status.c_str());
    } else {
      throw ConfigError("unknown algorithm: " + opt_algo);
    }
    topo.validate();
    write_file(opt_out, topology_to_json(topo));
    std::printf("wrote %s: %d total ports\n", opt_out.c_str(), topo.total_ports());
    return 0;
  }

  if (*evaluate) {
    ReducedDag dag = reduced_dag_from_json(read_file(eval_dag));
    LogicalTopology topo = topology_from_json(read_file(eval_topo));
    SimTrace ocs = simulate(topo, dag, dag.bandwidth_gbps);
    SimTrace ideal = simulate(LogicalTopology::zero(dag.port_caps), dag, dag.bandwidth_gbps,
                              {.ideal = true});
    std::printf("makespan %.6f ms, ideal %.6f ms, NCT %.6f, ports %d\n", ocs.makespan_ms,
                ideal.makespan_ms, nct(ocs, ideal, dag), topo.total_ports());
    return 0;
  }

  if (*sweep) {
    ExperimentSpec spec = experiment_spec_from_json(read_file(sweep_spec));
    Report report = run_experiment(spec);
    int ok = 0;
    for (const auto& row : report.rows)
      if (row.status == "ok") ++ok;
    std::printf("%d/%zu cells ok; report at %s/report.csv\n", ok, report.rows.size(),
                spec.out_dir.c_str());
    return 0;
  }

  if (*realloc_cmd) {
    ExperimentSpec spec = experiment_spec_from_json(read_file(re_spec));
    ReallocationReport report = port_reallocation_scenario(re_workload, re_algo, spec);
    std::printf("A: NCT %.6f, ports %d\n", report.original.nct,
                report.original.total_ports);
    std::printf("A^T (own budget): NCT %.6f\n", report.reversed_base.nct);
    std::printf("A^T (with freed ports): NCT %.6f\n", report.reversed_boost.nct);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const SolverUnavailableError& e) {
    std::fprintf(stderr, "solver unavailable: %s\n", e.what());
    return 3;
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
