#include "delta/json_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace delta {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing config key: " + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for key '" + key + "': " + e.what());
  }
}

template <typename T>
T optional_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

std::string workload_config_to_json(const ParallelConfig& cfg, const Placement& place) {
  json j;
  j["parallel"] = {{"tp", cfg.tp},
                   {"pp", cfg.pp},
                   {"dp", cfg.dp},
                   {"ep", cfg.ep},
                   {"num_micro_batches", cfg.num_micro_batches},
                   {"num_pods", cfg.num_pods},
                   {"gpus_per_pod_per_replica", cfg.gpus_per_pod_per_replica},
                   {"nic_bandwidth_gbps", cfg.nic_bandwidth_gbps},
                   {"fwd_compute_ms", cfg.fwd_compute_ms},
                   {"bwd_compute_ms", cfg.bwd_compute_ms},
                   {"pp_volume_gb", cfg.pp_volume_gb},
                   {"dp_volume_gb", cfg.dp_volume_gb},
                   {"seq_len", cfg.seq_len},
                   {"base_seq_len", cfg.base_seq_len}};
  j["placement"] = {{"mode", "explicit"},
                    {"stage_to_pod", place.stage_to_pod},
                    {"gpu_assignment", place.gpu_assignment}};
  return j.dump(2) + "\n";
}

std::pair<ParallelConfig, Placement> workload_config_from_json(const std::string& text) {
  json j = parse(text);
  if (!j.contains("parallel")) throw ConfigError("missing 'parallel' section");
  const json& p = j["parallel"];
  ParallelConfig cfg;
  cfg.tp = require<int>(p, "tp");
  cfg.pp = require<int>(p, "pp");
  cfg.dp = require<int>(p, "dp");
  cfg.ep = optional_or(p, "ep", 0);
  cfg.num_micro_batches = require<int>(p, "num_micro_batches");
  cfg.num_pods = require<int>(p, "num_pods");
  cfg.gpus_per_pod_per_replica = require<int>(p, "gpus_per_pod_per_replica");
  cfg.nic_bandwidth_gbps = require<double>(p, "nic_bandwidth_gbps");
  cfg.fwd_compute_ms = require<double>(p, "fwd_compute_ms");
  cfg.bwd_compute_ms = require<double>(p, "bwd_compute_ms");
  cfg.pp_volume_gb = require<double>(p, "pp_volume_gb");
  cfg.dp_volume_gb = require<double>(p, "dp_volume_gb");
  cfg.seq_len = optional_or(p, "seq_len", 4096);
  cfg.base_seq_len = optional_or(p, "base_seq_len", 4096);
  cfg.validate();

  Placement place;
  std::string mode = "round_robin";
  if (j.contains("placement")) mode = optional_or<std::string>(j["placement"], "mode", mode);
  if (mode == "round_robin") {
    place = Placement::round_robin(cfg);
  } else if (mode == "reversed") {
    place = Placement::round_robin(cfg, true);
  } else if (mode == "explicit") {
    const json& pl = j["placement"];
    place.stage_to_pod = require<std::vector<std::vector<int>>>(pl, "stage_to_pod");
    place.gpu_assignment =
        require<std::vector<std::vector<std::vector<int>>>>(pl, "gpu_assignment");
    place.validate(cfg);
  } else {
    throw ConfigError("unknown placement mode: " + mode);
  }
  return {cfg, place};
}

std::string reduced_dag_to_json(const ReducedDag& dag) {
  json j;
  j["num_pods"] = dag.num_pods;
  j["port_caps"] = dag.port_caps;
  j["bandwidth_gbps"] = dag.bandwidth_gbps;
  j["num_replicas"] = dag.num_replicas;
  j["virtual_source"] = dag.virtual_source;
  json tasks = json::array();
  for (const auto& t : dag.tasks) {
    tasks.push_back({{"id", t.id},
                     {"kind", to_string(t.kind)},
                     {"src_pod", t.src_pod},
                     {"dst_pod", t.dst_pod},
                     {"flows", t.flows},
                     {"volume_gb", t.volume_gb},
                     {"src_gpus", t.src_gpus},
                     {"dst_gpus", t.dst_gpus},
                     {"replica", t.replica},
                     {"stage", t.stage},
                     {"micro_batch", t.micro_batch}});
  }
  j["tasks"] = tasks;
  json deps = json::array();
  for (const auto& d : dag.deps)
    deps.push_back({{"pre", d.pre}, {"succ", d.succ}, {"gap_ms", d.gap_ms}});
  j["deps"] = deps;
  return j.dump(2) + "\n";
}

ReducedDag reduced_dag_from_json(const std::string& text) {
  json j = parse(text);
  ReducedDag dag;
  dag.num_pods = require<int>(j, "num_pods");
  dag.port_caps = require<std::vector<int>>(j, "port_caps");
  dag.bandwidth_gbps = require<double>(j, "bandwidth_gbps");
  dag.num_replicas = optional_or(j, "num_replicas", 1);
  dag.virtual_source = optional_or(j, "virtual_source", 0);
  for (const json& t : require<json>(j, "tasks")) {
    CommTask task;
    task.id = require<int>(t, "id");
    task.kind = task_kind_from_string(require<std::string>(t, "kind"));
    task.src_pod = require<int>(t, "src_pod");
    task.dst_pod = require<int>(t, "dst_pod");
    task.flows = require<int>(t, "flows");
    task.volume_gb = require<double>(t, "volume_gb");
    task.src_gpus = require<std::vector<int>>(t, "src_gpus");
    task.dst_gpus = require<std::vector<int>>(t, "dst_gpus");
    task.replica = optional_or(t, "replica", -1);
    task.stage = optional_or(t, "stage", -1);
    task.micro_batch = optional_or(t, "micro_batch", -1);
    dag.tasks.push_back(std::move(task));
  }
  for (const json& d : require<json>(j, "deps"))
    dag.deps.push_back(
        {require<int>(d, "pre"), require<int>(d, "succ"), require<double>(d, "gap_ms")});
  dag.validate();
  return dag;
}

std::string topology_to_json(const LogicalTopology& topo) {
  json j;
  j["num_pods"] = topo.num_pods();
  j["port_caps"] = topo.port_caps;
  j["circuits"] = topo.circuits;
  return j.dump(2) + "\n";
}

LogicalTopology topology_from_json(const std::string& text) {
  json j = parse(text);
  LogicalTopology topo;
  topo.port_caps = require<std::vector<int>>(j, "port_caps");
  topo.circuits = require<std::vector<std::vector<int>>>(j, "circuits");
  topo.validate();
  return topo;
}

std::string trace_to_json(const SimTrace& trace) {
  json j;
  json tasks = json::array();
  for (size_t m = 0; m < trace.start.size(); ++m)
    tasks.push_back({{"id", m}, {"start_ms", trace.start[m]},
                     {"completion_ms", trace.completion[m]}});
  j["tasks"] = tasks;
  j["events"] = trace.events;
  j["interval_volumes"] = trace.interval_volumes;
  j["makespan_ms"] = trace.makespan_ms;
  return j.dump(2) + "\n";
}

SimTrace trace_from_json(const std::string& text) {
  json j = parse(text);
  SimTrace trace;
  const json& tasks = require<json>(j, "tasks");
  trace.start.resize(tasks.size());
  trace.completion.resize(tasks.size());
  for (const json& t : tasks) {
    int id = require<int>(t, "id");
    trace.start.at(id) = require<double>(t, "start_ms");
    trace.completion.at(id) = require<double>(t, "completion_ms");
  }
  trace.events = require<std::vector<double>>(j, "events");
  trace.interval_volumes =
      optional_or<std::vector<std::vector<double>>>(j, "interval_volumes", {});
  trace.makespan_ms = require<double>(j, "makespan_ms");
  return trace;
}

std::string bounds_to_json(const TimeWindows& windows, const IndexBounds& bounds,
                           const CircuitUpperBounds& caps) {
  json j;
  j["windows"] = {{"est_ms", windows.est}, {"lct_ms", windows.lct}, {"tau_ms", windows.tau}};
  j["index_bounds"] = {{"k_min", bounds.k_min},
                       {"k_max", bounds.k_max},
                       {"num_intervals", bounds.num_intervals}};
  j["circuit_upper_bounds"] = caps.cap;
  return j.dump(2) + "\n";
}

}  // namespace delta
