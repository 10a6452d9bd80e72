#include "delta/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "delta/baselines.hpp"
#include "delta/des.hpp"
#include "delta/json_io.hpp"
#include "delta/milp.hpp"

#include "json.hpp"

namespace delta {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentSpec::validate() const {
  if (workloads.empty()) throw ConfigError("experiment needs at least one workload");
  if (algorithms.empty()) throw ConfigError("experiment needs at least one algorithm");
  if (bandwidths_gbps.empty()) throw ConfigError("experiment needs a bandwidth sweep");
  if (seq_lens.empty()) throw ConfigError("experiment needs a sequence-length sweep");
  if (workers < 1) throw ConfigError("experiment workers must be >= 1");
  static const std::set<std::string> known{"prop", "sqrt", "iterhalve",
                                          "fast", "topo", "joint"};
  for (const auto& a : algorithms)
    if (!known.count(a)) throw ConfigError("unknown algorithm: " + a);
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment spec: ") + e.what());
  }
  ExperimentSpec spec;
  for (const json& w : j.at("workloads"))
    spec.workloads.push_back({w.at("name").get<std::string>(),
                              w.at("config").get<std::string>()});
  spec.algorithms = j.at("algorithms").get<std::vector<std::string>>();
  spec.bandwidths_gbps = j.at("bandwidths_gbps").get<std::vector<double>>();
  spec.seq_lens = j.value("seq_lens", std::vector<int>{4096});
  spec.solver_cmd = j.value("solver_cmd", default_solver_cmd());
  spec.timeout_s = j.value("timeout_s", 600.0);
  spec.out_dir = j.value("out_dir", std::string("delta_run"));
  spec.seed = j.value("seed", 1ull);
  spec.workers = j.value("workers", 4);
  spec.hot_start = j.value("hot_start", false);
  spec.min_ports = j.value("min_ports", false);
  if (j.contains("ga")) {
    const json& g = j["ga"];
    spec.ga.population = g.value("population", spec.ga.population);
    spec.ga.generations = g.value("generations", spec.ga.generations);
    spec.ga.elite = g.value("elite", spec.ga.elite);
    spec.ga.tournament = g.value("tournament", spec.ga.tournament);
    spec.ga.crossover_rate = g.value("crossover_rate", spec.ga.crossover_rate);
    spec.ga.mutation_rate = g.value("mutation_rate", spec.ga.mutation_rate);
    spec.ga.stagnation_window = g.value("stagnation_window", spec.ga.stagnation_window);
    spec.ga.seed_baselines = g.value("seed_baselines", spec.ga.seed_baselines);
  }
  spec.validate();
  return spec;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t h = seed ^ (salt + 0x9e3779b97f4a7c15ull);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

SimTrace trace_from_solution(const Solution& sol, const MilpModel& model,
                             const ReducedDag& dag) {
  SimTrace trace;
  const size_t n = dag.tasks.size();
  trace.start.resize(n);
  trace.completion.resize(n);
  for (size_t m = 0; m < n; ++m) {
    trace.start[m] = sol.value("S_" + std::to_string(m));
    trace.completion[m] = sol.value("C_" + std::to_string(m));
  }
  std::vector<double> events{0.0};
  for (size_t m = 0; m < n; ++m) {
    events.push_back(trace.start[m]);
    events.push_back(trace.completion[m]);
  }
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());
  trace.events = events;
  trace.makespan_ms = sol.value("C");
  return trace;
}

struct MilpOutcome {
  LogicalTopology topology;      // broadcast to the full pod set
  SimTrace schedule;             // the solver's own schedule (reference domain)
  double makespan = 0.0;
  bool optimal = false;
};

MilpOutcome run_milp(const ReducedDag& full_dag, const std::string& algo,
                     const ExperimentSpec& spec) {
  ProjectionResult projection =
      project_single_replica(full_dag, full_dag.num_replicas);
  if (!projection.homogeneous)
    throw ConfigError("MILP path requires homogeneous replicas at this scale");
  const ReducedDag& ref = projection.reference;

  // Circuit caps from the window analysis; the horizon for the windows
  // comes from a port-feasible reference run.
  TrafficMatrix tm = TrafficMatrix::from_dag(ref);
  LogicalTopology seed_topo = prop_alloc(tm, ref.port_caps);
  SimTrace seed_trace = simulate(seed_topo, ref, ref.bandwidth_gbps);
  CircuitUpperBounds caps =
      x_upper_bound(ref, ref.bandwidth_gbps, 2.0 * seed_trace.makespan_ms);

  // Baseline for anchors, interval count and hot-starting: the seed
  // topology clamped into the caps (still port-feasible).
  LogicalTopology baseline_topo = seed_topo;
  for (auto [i, j] : ref.active_pairs()) {
    int clamped = std::min(baseline_topo.at(i, j), std::max(1, caps.at(i, j)));
    baseline_topo.set_symmetric(i, j, clamped);
  }
  SimTrace baseline = simulate(baseline_topo, ref, ref.bandwidth_gbps);
  double t_up = 2.0 * baseline.makespan_ms;

  TaskAnchors anchors = derive_anchors(baseline);
  int k_model = baseline.num_intervals() + std::max(1, baseline.num_intervals() / 10);
  anchors.num_intervals = k_model;
  IndexBounds bounds = task_time_index_pruning(ref, k_model, anchors);

  VarIntervalOptions opts;
  opts.mode = (algo == "topo") ? MilpMode::Topology : MilpMode::Joint;
  opts.num_intervals = k_model;
  opts.t_up = t_up;
  opts.index_bounds = &bounds;
  opts.circuit_caps = &caps;
  MilpModel model = build_var_interval_model(ref, ref.bandwidth_gbps, opts);

  std::map<std::string, double> start_values;
  const std::map<std::string, double>* start_ptr = nullptr;
  if (spec.hot_start && algo == "joint") {
    start_values = hot_start_from_trace(baseline, baseline_topo, model, ref);
    start_ptr = &start_values;
  }

  Solution sol = solve(model, spec.solver_cmd, spec.timeout_s, start_ptr);
  if (sol.status == SolveStatus::Infeasible)
    throw InfeasibleError("MILP reported infeasible");
  if (sol.status == SolveStatus::Error)
    throw InfeasibleError("MILP solve failed: " + sol.raw_status);

  MilpOutcome outcome;
  outcome.optimal = sol.status == SolveStatus::Optimal;
  double c_star = sol.objective;

  if (spec.min_ports) {
    MilpModel stage2 = with_port_minimization(model, c_star);
    Solution sol2 = solve(stage2, spec.solver_cmd, spec.timeout_s);
    if (sol2.status == SolveStatus::Optimal || sol2.status == SolveStatus::Feasible ||
        sol2.status == SolveStatus::Timeout) {
      if (!sol2.values.empty()) sol = std::move(sol2);
    }
  }

  LogicalTopology ref_topo = extract_topology(sol, ref);
  outcome.topology = broadcast_topology(ref_topo, full_dag, projection);
  outcome.schedule = trace_from_solution(sol, model, ref);
  outcome.makespan = sol.value("C", c_star);
  return outcome;
}

struct Cell {
  int workload_idx;
  int bw_idx;
  int seq_idx;
  int algo_idx;
  int flat_index;
};

}  // namespace

std::string Report::to_csv() const {
  std::ostringstream os;
  os << "workload,algorithm,bandwidth_gbps,seq_len,status,nct,makespan_ms,"
        "ideal_makespan_ms,total_ports,allocated_port_ratio\n";
  for (const auto& r : rows) {
    os << r.workload << "," << r.algorithm << "," << format_double(r.bandwidth_gbps) << ","
       << r.seq_len << "," << r.status << "," << format_double(r.nct) << ","
       << format_double(r.makespan_ms) << "," << format_double(r.ideal_makespan_ms) << ","
       << r.total_ports << "," << format_double(r.allocated_port_ratio) << "\n";
  }
  return os.str();
}

std::string Report::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"workload", r.workload},
                         {"algorithm", r.algorithm},
                         {"bandwidth_gbps", r.bandwidth_gbps},
                         {"seq_len", r.seq_len},
                         {"status", r.status},
                         {"nct", r.nct},
                         {"makespan_ms", r.makespan_ms},
                         {"ideal_makespan_ms", r.ideal_makespan_ms},
                         {"total_ports", r.total_ports},
                         {"allocated_port_ratio", r.allocated_port_ratio},
                         {"wall_ms", r.wall_ms}});
  }
  return json{{"rows", rows_json}}.dump(2) + "\n";
}

Report run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  fs::create_directories(spec.out_dir);
  fs::create_directories(fs::path(spec.out_dir) / "topologies");
  fs::create_directories(fs::path(spec.out_dir) / "traces");

  std::vector<std::pair<ParallelConfig, Placement>> configs;
  for (const auto& w : spec.workloads)
    configs.push_back(workload_config_from_json(read_file(w.config_path)));

  std::vector<Cell> cells;
  for (int wi = 0; wi < static_cast<int>(spec.workloads.size()); ++wi)
    for (int bi = 0; bi < static_cast<int>(spec.bandwidths_gbps.size()); ++bi)
      for (int si = 0; si < static_cast<int>(spec.seq_lens.size()); ++si)
        for (int ai = 0; ai < static_cast<int>(spec.algorithms.size()); ++ai)
          cells.push_back({wi, bi, si, ai, static_cast<int>(cells.size())});

  std::vector<ReportRow> rows(cells.size());
  std::mutex io_mutex;

  auto run_cell = [&](const Cell& cell) {
    auto started = std::chrono::steady_clock::now();
    ReportRow row;
    row.workload = spec.workloads[cell.workload_idx].name;
    row.algorithm = spec.algorithms[cell.algo_idx];
    row.bandwidth_gbps = spec.bandwidths_gbps[cell.bw_idx];
    row.seq_len = spec.seq_lens[cell.seq_idx];
    try {
      ParallelConfig cfg = configs[cell.workload_idx].first;
      cfg.nic_bandwidth_gbps = row.bandwidth_gbps;
      cfg.seq_len = row.seq_len;
      const Placement& place = configs[cell.workload_idx].second;
      Workload workload = build_workload(cfg, place);
      ReducedDag dag = reduce_dag(workload);

      SimTrace ideal = simulate(LogicalTopology::zero(dag.port_caps), dag,
                                dag.bandwidth_gbps, {.ideal = true});

      LogicalTopology topo;
      SimTrace evaluated;
      const std::string& algo = row.algorithm;
      if (algo == "prop" || algo == "sqrt" || algo == "iterhalve") {
        TrafficMatrix tm = TrafficMatrix::from_dag(dag);
        topo = (algo == "prop")   ? prop_alloc(tm, dag.port_caps)
               : (algo == "sqrt") ? sqrt_alloc(tm, dag.port_caps)
                                  : iter_halve(tm, dag.port_caps);
        evaluated = simulate(topo, dag, dag.bandwidth_gbps);
        row.nct = nct(evaluated, ideal, dag);
        row.makespan_ms = evaluated.makespan_ms;
      } else if (algo == "fast") {
        GaParams params = spec.ga;
        params.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(cell.flat_index));
        params.workers = spec.workers;
        GaResult result = run_ga(dag, params);
        topo = result.topology;
        evaluated = simulate(topo, dag, dag.bandwidth_gbps);
        row.nct = nct(evaluated, ideal, dag);
        row.makespan_ms = evaluated.makespan_ms;
      } else {  // topo | joint
        if (spec.solver_cmd.empty()) {
          row.status = "skipped:no-solver";
          row.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - started)
                            .count();
          rows[cell.flat_index] = row;
          return;
        }
        MilpOutcome outcome = run_milp(dag, algo, spec);
        topo = outcome.topology;
        evaluated = outcome.schedule;
        ProjectionResult projection = project_single_replica(dag, dag.num_replicas);
        SimTrace ref_ideal =
            simulate(LogicalTopology::zero(projection.reference.port_caps),
                     projection.reference, projection.reference.bandwidth_gbps,
                     {.ideal = true});
        row.nct = nct(outcome.schedule, ref_ideal, projection.reference);
        row.makespan_ms = outcome.makespan;
      }

      row.ideal_makespan_ms = ideal.makespan_ms;
      row.total_ports = topo.total_ports();
      int total_caps = 0;
      for (int cap : dag.port_caps) total_caps += cap;
      row.allocated_port_ratio =
          total_caps > 0 ? static_cast<double>(row.total_ports) / total_caps : 0.0;
      row.status = "ok";

      std::ostringstream base;
      base << row.workload << "_" << row.algorithm << "_bw" << row.bandwidth_gbps << "_seq"
           << row.seq_len;
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        write_file((fs::path(spec.out_dir) / "topologies" / (base.str() + ".json")).string(),
                   topology_to_json(topo));
        write_file((fs::path(spec.out_dir) / "traces" / (base.str() + ".json")).string(),
                   trace_to_json(evaluated));
      }
    } catch (const SolverUnavailableError& e) {
      row.status = std::string("skipped:") + e.what();
    } catch (const std::exception& e) {
      row.status = std::string("error:") + e.what();
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - started)
                      .count();
    rows[cell.flat_index] = row;
  };

  int threads = std::min<int>(spec.workers, static_cast<int>(cells.size()));
  if (threads <= 1) {
    for (const auto& cell : cells) run_cell(cell);
  } else {
    std::vector<std::thread> crew;
    for (int w = 0; w < threads; ++w) {
      crew.emplace_back([&, w]() {
        for (size_t i = w; i < cells.size(); i += threads) run_cell(cells[i]);
      });
    }
    for (auto& t : crew) t.join();
  }

  Report report;
  report.rows = std::move(rows);

  json manifest;
  manifest["algorithms"] = spec.algorithms;
  manifest["bandwidths_gbps"] = spec.bandwidths_gbps;
  manifest["seq_lens"] = spec.seq_lens;
  manifest["seed"] = spec.seed;
  manifest["timeout_s"] = spec.timeout_s;
  json workloads = json::array();
  for (const auto& w : spec.workloads)
    workloads.push_back({{"name", w.name}, {"config", w.config_path}});
  manifest["workloads"] = workloads;
  write_file((fs::path(spec.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  write_file((fs::path(spec.out_dir) / "report.csv").string(), report.to_csv());
  write_file((fs::path(spec.out_dir) / "report.json").string(), report.to_json());
  return report;
}

ReallocationReport port_reallocation_scenario(const std::string& workload_config_path,
                                              const std::string& algorithm,
                                              const ExperimentSpec& spec) {
  auto [cfg, forward] = workload_config_from_json(read_file(workload_config_path));
  Placement reversed = Placement::reversed(cfg, forward);

  ReducedDag dag_a = reduce_dag(build_workload(cfg, forward));
  SimTrace ideal_a =
      simulate(LogicalTopology::zero(dag_a.port_caps), dag_a, dag_a.bandwidth_gbps,
               {.ideal = true});

  // Optimize A with port minimization.
  LogicalTopology topo_a;
  double c_star = 0.0;
  if (algorithm == "fast") {
    GaParams params = spec.ga;
    params.seed = spec.seed;
    params.workers = spec.workers;
    GaResult result = run_ga(dag_a, params);
    topo_a = shed_idle_ports(dag_a, result.topology);
    c_star = result.best.makespan_ms;
  } else if (algorithm == "topo" || algorithm == "joint") {
    ExperimentSpec milp_spec = spec;
    milp_spec.min_ports = false;
    MilpOutcome outcome = run_milp(dag_a, algorithm, milp_spec);
    c_star = simulate(outcome.topology, dag_a, dag_a.bandwidth_gbps).makespan_ms;
    // Port minimization against the deployed fair-share executor: walk the
    // solved topology down while re-simulation confirms the makespan holds.
    topo_a = shed_idle_ports(dag_a, outcome.topology);
  } else {
    throw ConfigError("port reallocation requires an algorithm with port minimization");
  }

  SimTrace trace_a = simulate(topo_a, dag_a, dag_a.bandwidth_gbps);
  if (std::abs(trace_a.makespan_ms - c_star) > 1e-9 * std::max(1.0, c_star))
    throw std::logic_error("port minimization changed the optimized makespan");

  ReallocationReport report;
  report.original.workload = "A";
  report.original.algorithm = algorithm;
  report.original.bandwidth_gbps = cfg.nic_bandwidth_gbps;
  report.original.seq_len = cfg.seq_len;
  report.original.status = "ok";
  report.original.nct = nct(trace_a, ideal_a, dag_a);
  report.original.makespan_ms = trace_a.makespan_ms;
  report.original.ideal_makespan_ms = ideal_a.makespan_ms;
  report.original.total_ports = topo_a.total_ports();

  report.freed_ports.resize(dag_a.num_pods);
  for (PodId p = 0; p < dag_a.num_pods; ++p)
    report.freed_ports[p] = dag_a.port_caps[p] - topo_a.allocated_ports(p);

  auto optimize_reversed = [&](const std::vector<int>& caps,
                               const LogicalTopology* incumbent) {
    ReducedDag dag_t = reduce_dag(build_workload(cfg, reversed));
    dag_t.port_caps = caps;
    SimTrace ideal_t = simulate(LogicalTopology::zero(dag_t.port_caps), dag_t,
                                dag_t.bandwidth_gbps, {.ideal = true});
    LogicalTopology topo_t;
    if (algorithm == "fast") {
      GaParams params = spec.ga;
      params.seed = spec.seed + 1;
      params.workers = spec.workers;
      topo_t = run_ga(dag_t, params).topology;
    } else {
      ExperimentSpec milp_spec = spec;
      milp_spec.min_ports = false;
      topo_t = run_milp(dag_t, algorithm, milp_spec).topology;
    }
    // A budget increase keeps every previous topology feasible; never
    // report worse than the incumbent it extends.
    if (incumbent) {
      double fresh = simulate(topo_t, dag_t, dag_t.bandwidth_gbps).makespan_ms;
      double held = simulate(*incumbent, dag_t, dag_t.bandwidth_gbps).makespan_ms;
      if (held < fresh) topo_t = *incumbent;
    }
    SimTrace trace_t = simulate(topo_t, dag_t, dag_t.bandwidth_gbps);
    ReportRow row;
    row.workload = "A_reversed";
    row.algorithm = algorithm;
    row.bandwidth_gbps = cfg.nic_bandwidth_gbps;
    row.seq_len = cfg.seq_len;
    row.status = "ok";
    row.nct = nct(trace_t, ideal_t, dag_t);
    row.makespan_ms = trace_t.makespan_ms;
    row.ideal_makespan_ms = ideal_t.makespan_ms;
    row.total_ports = topo_t.total_ports();
    return std::make_pair(row, topo_t);
  };

  ReducedDag dag_t_probe = reduce_dag(build_workload(cfg, reversed));
  auto [base_row, base_topo] = optimize_reversed(dag_t_probe.port_caps, nullptr);
  report.reversed_base = base_row;
  std::vector<int> boosted = dag_t_probe.port_caps;
  for (PodId p = 0; p < dag_a.num_pods; ++p) boosted[p] += report.freed_ports[p];
  report.reversed_boost = optimize_reversed(boosted, &base_topo).first;
  return report;
}

}  // namespace delta
