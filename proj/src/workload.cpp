#include "delta/workload.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace delta {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::VirtualSource: return "virtual_source";
    case TaskKind::PipelineForward: return "pp_fwd";
    case TaskKind::PipelineBackward: return "pp_bwd";
    case TaskKind::GradientSync: return "dp";
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "virtual_source") return TaskKind::VirtualSource;
  if (s == "pp_fwd") return TaskKind::PipelineForward;
  if (s == "pp_bwd") return TaskKind::PipelineBackward;
  if (s == "dp") return TaskKind::GradientSync;
  throw ConfigError("unknown task kind: " + s);
}

LogicalTopology LogicalTopology::zero(const std::vector<int>& port_caps) {
  LogicalTopology topo;
  topo.port_caps = port_caps;
  topo.circuits.assign(port_caps.size(), std::vector<int>(port_caps.size(), 0));
  return topo;
}

LogicalTopology LogicalTopology::full_port(
    const std::vector<int>& port_caps,
    const std::vector<std::pair<PodId, PodId>>& active_pairs) {
  LogicalTopology topo = zero(port_caps);
  for (auto [i, j] : active_pairs) {
    int cap = std::min(port_caps[i], port_caps[j]);
    topo.circuits[i][j] = cap;
    topo.circuits[j][i] = cap;
  }
  return topo;
}

void LogicalTopology::set_symmetric(PodId i, PodId j, int value) {
  circuits.at(i).at(j) = value;
  circuits.at(j).at(i) = value;
}

int LogicalTopology::total_ports() const {
  int total = 0;
  for (const auto& row : circuits) total += std::accumulate(row.begin(), row.end(), 0);
  return total;
}

int LogicalTopology::allocated_ports(PodId p) const {
  const auto& row = circuits.at(p);
  return std::accumulate(row.begin(), row.end(), 0);
}

void LogicalTopology::validate() const {
  const int n = num_pods();
  if (static_cast<int>(port_caps.size()) != n)
    throw std::invalid_argument("topology: port_caps size mismatch");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(circuits[i].size()) != n)
      throw std::invalid_argument("topology: ragged circuit matrix");
    if (circuits[i][i] != 0) throw std::invalid_argument("topology: nonzero diagonal");
    int row_sum = 0;
    int col_sum = 0;
    for (int j = 0; j < n; ++j) {
      if (circuits[i][j] < 0) throw std::invalid_argument("topology: negative circuits");
      if (circuits[i][j] != circuits[j][i])
        throw std::invalid_argument("topology: asymmetric circuits");
      row_sum += circuits[i][j];
      col_sum += circuits[j][i];
    }
    if (row_sum > port_caps[i] || col_sum > port_caps[i]) {
      std::ostringstream os;
      os << "topology: pod " << i << " uses " << row_sum << " ports, cap " << port_caps[i];
      throw std::invalid_argument(os.str());
    }
  }
}

void ParallelConfig::validate() const {
  if (tp < 1 || pp < 1 || dp < 1) throw ConfigError("tp, pp, dp must be >= 1");
  if (ep < 0) throw ConfigError("ep must be >= 0");
  if (num_micro_batches < pp)
    throw ConfigError("num_micro_batches must be >= pp to fill the pipeline");
  if (num_pods < 1) throw ConfigError("num_pods must be >= 1");
  if (gpus_per_pod_per_replica < tp)
    throw ConfigError("gpus_per_pod_per_replica must fit at least one stage (tp GPUs)");
  if (nic_bandwidth_gbps <= 0) throw ConfigError("nic_bandwidth_gbps must be > 0");
  if (fwd_compute_ms <= 0 || bwd_compute_ms <= 0)
    throw ConfigError("compute durations must be > 0");
  if (pp_volume_gb <= 0 || dp_volume_gb <= 0) throw ConfigError("volumes must be > 0");
  if (seq_len < 1 || base_seq_len < 1) throw ConfigError("sequence lengths must be >= 1");
}

Placement Placement::round_robin(const ParallelConfig& cfg, bool reversed_stages) {
  cfg.validate();
  Placement place;
  place.stage_to_pod.assign(cfg.dp, std::vector<PodId>(cfg.pp, 0));
  place.gpu_assignment.assign(cfg.dp, std::vector<std::vector<GpuId>>(cfg.pp));
  for (int r = 0; r < cfg.dp; ++r) {
    for (int s = 0; s < cfg.pp; ++s) {
      int logical_stage = reversed_stages ? (cfg.pp - 1 - s) : s;
      place.stage_to_pod[r][s] = (logical_stage + r) % cfg.num_pods;
      auto& gpus = place.gpu_assignment[r][s];
      gpus.resize(cfg.tp);
      for (int t = 0; t < cfg.tp; ++t) gpus[t] = (r * cfg.pp + s) * cfg.tp + t;
    }
  }
  place.validate(cfg);
  return place;
}

Placement Placement::reversed(const ParallelConfig& cfg, const Placement& place) {
  Placement out = place;
  for (int r = 0; r < cfg.dp; ++r) {
    for (int s = 0; s < cfg.pp; ++s) {
      out.stage_to_pod[r][s] = place.stage_to_pod[r][cfg.pp - 1 - s];
      out.gpu_assignment[r][s] = place.gpu_assignment[r][cfg.pp - 1 - s];
    }
  }
  out.validate(cfg);
  return out;
}

void Placement::validate(const ParallelConfig& cfg) const {
  if (static_cast<int>(stage_to_pod.size()) != cfg.dp ||
      static_cast<int>(gpu_assignment.size()) != cfg.dp)
    throw ConfigError("placement: replica count mismatch");
  std::set<GpuId> seen;
  std::map<std::pair<PodId, int>, int> per_pod_replica;
  for (int r = 0; r < cfg.dp; ++r) {
    if (static_cast<int>(stage_to_pod[r].size()) != cfg.pp ||
        static_cast<int>(gpu_assignment[r].size()) != cfg.pp)
      throw ConfigError("placement: stage count mismatch");
    for (int s = 0; s < cfg.pp; ++s) {
      PodId pod = stage_to_pod[r][s];
      if (pod < 0 || pod >= cfg.num_pods) throw ConfigError("placement: pod id out of range");
      const auto& gpus = gpu_assignment[r][s];
      if (static_cast<int>(gpus.size()) != cfg.tp)
        throw ConfigError("placement: stage must hold exactly tp GPUs");
      for (GpuId g : gpus) {
        if (!seen.insert(g).second) throw ConfigError("placement: duplicate GPU id");
      }
      per_pod_replica[{pod, r}] += cfg.tp;
    }
  }
  for (const auto& [key, count] : per_pod_replica) {
    if (count > cfg.gpus_per_pod_per_replica) {
      std::ostringstream os;
      os << "placement: pod " << key.first << " holds " << count << " GPUs of replica "
         << key.second << ", cap " << cfg.gpus_per_pod_per_replica;
      throw ConfigError(os.str());
    }
  }
}

std::vector<int> Placement::port_caps(const ParallelConfig& cfg) const {
  std::vector<int> caps(cfg.num_pods, 0);
  for (int r = 0; r < cfg.dp; ++r)
    for (int s = 0; s < cfg.pp; ++s)
      caps[stage_to_pod[r][s]] += static_cast<int>(gpu_assignment[r][s].size());
  return caps;
}

std::vector<std::vector<Slot>> synthesize_1f1b_schedule(const ParallelConfig& cfg) {
  cfg.validate();
  const int mbs = cfg.num_micro_batches;
  std::vector<std::vector<Slot>> schedule(cfg.pp);
  for (int s = 0; s < cfg.pp; ++s) {
    auto& slots = schedule[s];
    const int warmup = std::min(cfg.pp - 1 - s, mbs);
    int next_fwd = 0;
    int next_bwd = 0;
    for (int i = 0; i < warmup; ++i) slots.push_back({true, next_fwd++});
    while (next_fwd < mbs) {
      slots.push_back({true, next_fwd++});
      slots.push_back({false, next_bwd++});
    }
    while (next_bwd < mbs) slots.push_back({false, next_bwd++});
  }
  return schedule;
}

std::vector<std::vector<int>> FullDag::adjacency() const {
  std::vector<std::vector<int>> adj(nodes.size());
  for (auto [u, v] : edges) adj[u].push_back(v);
  return adj;
}

std::vector<int> FullDag::topological_order() const {
  std::vector<int> indeg(nodes.size(), 0);
  auto adj = adjacency();
  for (auto [u, v] : edges) ++indeg[v];
  std::deque<int> queue;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (indeg[i] == 0) queue.push_back(static_cast<int>(i));
  std::vector<int> order;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    order.push_back(u);
    for (int v : adj[u])
      if (--indeg[v] == 0) queue.push_back(v);
  }
  if (order.size() != nodes.size()) throw ConfigError("full DAG contains a cycle");
  return order;
}

bool FullDag::is_acyclic() const {
  try {
    topological_order();
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

namespace {

struct Builder {
  const ParallelConfig& cfg;
  const Placement& place;
  Workload out;

  // node ids of compute slots: slot_node[r][s][slot index]
  std::vector<std::vector<std::vector<int>>> slot_node;

  explicit Builder(const ParallelConfig& c, const Placement& p) : cfg(c), place(p) {}

  int add_node(FullDagNode node) {
    node.id = static_cast<int>(out.full_dag.nodes.size());
    out.full_dag.nodes.push_back(std::move(node));
    return out.full_dag.nodes.back().id;
  }

  void add_edge(int u, int v) { out.full_dag.edges.emplace_back(u, v); }

  TaskId add_comm_task(CommTask task) {
    task.id = static_cast<TaskId>(out.tasks.size());
    out.tasks.push_back(std::move(task));
    return out.tasks.back().id;
  }

  // Transfer node between pods: a real communication task when the pods
  // differ, otherwise an intra-pod node with its wire-time as duration.
  int add_transfer(TaskKind kind, int replica, int stage, int micro_batch,
                   PodId src_pod, PodId dst_pod, const std::vector<GpuId>& src_gpus,
                   const std::vector<GpuId>& dst_gpus, VolumeGb volume,
                   const std::string& label) {
    if (src_pod != dst_pod) {
      CommTask task;
      task.src_pod = src_pod;
      task.dst_pod = dst_pod;
      task.flows = static_cast<int>(src_gpus.size());
      task.volume_gb = volume;
      task.src_gpus = src_gpus;
      task.dst_gpus = dst_gpus;
      task.kind = kind;
      task.replica = replica;
      task.stage = stage;
      task.micro_batch = micro_batch;
      TaskId id = add_comm_task(std::move(task));
      return add_node({0, true, 0.0, id, label});
    }
    double wire_ms = volume / (static_cast<double>(src_gpus.size()) *
                               cfg.nic_bandwidth_gbps * kGbpsToGbPerMs);
    return add_node({0, false, wire_ms, -1, label + "(intra)"});
  }
};

std::string slot_label(int r, int s, const Slot& slot) {
  std::ostringstream os;
  os << (slot.forward ? "fwd" : "bwd") << " r" << r << " s" << s << " b" << slot.micro_batch;
  return os.str();
}

}  // namespace

Workload build_workload(const ParallelConfig& cfg, const Placement& place) {
  cfg.validate();
  place.validate(cfg);

  Builder b(cfg, place);
  b.out.cfg = cfg;
  b.out.placement = place;

  // Task 0: virtual source at t=0, ancestor of every communication task.
  CommTask virtual_source;
  virtual_source.kind = TaskKind::VirtualSource;
  b.add_comm_task(std::move(virtual_source));
  int virtual_node = b.add_node({0, true, 0.0, 0, "virtual source"});

  const auto schedule = synthesize_1f1b_schedule(cfg);
  const int mbs = cfg.num_micro_batches;

  b.slot_node.assign(cfg.dp, {});
  for (int r = 0; r < cfg.dp; ++r) {
    b.slot_node[r].assign(cfg.pp, {});
    for (int s = 0; s < cfg.pp; ++s) {
      const auto& slots = schedule[s];
      b.slot_node[r][s].resize(slots.size());
      for (size_t i = 0; i < slots.size(); ++i) {
        double dur = slots[i].forward ? cfg.fwd_compute_ms : cfg.bwd_compute_ms;
        b.slot_node[r][s][i] = b.add_node({0, false, dur, -1, slot_label(r, s, slots[i])});
      }
      // GPUs of a stage run their 1F1B slots strictly in order.
      for (size_t i = 0; i + 1 < slots.size(); ++i)
        b.add_edge(b.slot_node[r][s][i], b.slot_node[r][s][i + 1]);
      b.add_edge(virtual_node, b.slot_node[r][s][0]);
    }
  }

  // Slot lookup: (forward, micro_batch) -> slot index per stage.
  std::vector<std::map<std::pair<bool, int>, int>> slot_index(cfg.pp);
  for (int s = 0; s < cfg.pp; ++s)
    for (size_t i = 0; i < schedule[s].size(); ++i)
      slot_index[s][{schedule[s][i].forward, schedule[s][i].micro_batch}] =
          static_cast<int>(i);

  for (int r = 0; r < cfg.dp; ++r) {
    // Send queue per stage: transfers issued by one stage's GPUs go out in
    // launch order, so consecutive transfers never contend for the NIC.
    std::vector<std::vector<std::pair<int, int>>> send_queue(cfg.pp);  // (slot idx, node)

    for (int s = 0; s + 1 < cfg.pp; ++s) {
      for (int mb = 0; mb < mbs; ++mb) {
        // Activations: fwd(s, mb) -> transfer -> fwd(s+1, mb)
        std::ostringstream lbl;
        lbl << "act r" << r << " s" << s << "->" << s + 1 << " b" << mb;
        int node = b.add_transfer(TaskKind::PipelineForward, r, s, mb,
                                  place.stage_to_pod[r][s], place.stage_to_pod[r][s + 1],
                                  place.gpu_assignment[r][s], place.gpu_assignment[r][s + 1],
                                  cfg.effective_pp_volume_gb(), lbl.str());
        int src_slot = slot_index[s].at({true, mb});
        b.add_edge(b.slot_node[r][s][src_slot], node);
        b.add_edge(node, b.slot_node[r][s + 1][slot_index[s + 1].at({true, mb})]);
        send_queue[s].emplace_back(src_slot, node);

        // Gradients: bwd(s+1, mb) -> transfer -> bwd(s, mb)
        std::ostringstream lbl2;
        lbl2 << "grad r" << r << " s" << s + 1 << "->" << s << " b" << mb;
        int node2 = b.add_transfer(TaskKind::PipelineBackward, r, s + 1, mb,
                                   place.stage_to_pod[r][s + 1], place.stage_to_pod[r][s],
                                   place.gpu_assignment[r][s + 1], place.gpu_assignment[r][s],
                                   cfg.effective_pp_volume_gb(), lbl2.str());
        int src_slot2 = slot_index[s + 1].at({false, mb});
        b.add_edge(b.slot_node[r][s + 1][src_slot2], node2);
        b.add_edge(node2, b.slot_node[r][s][slot_index[s].at({false, mb})]);
        send_queue[s + 1].emplace_back(src_slot2, node2);
      }
    }

    // Loss turnaround at the last stage.
    for (int mb = 0; mb < mbs; ++mb) {
      int s = cfg.pp - 1;
      b.add_edge(b.slot_node[r][s][slot_index[s].at({true, mb})],
                 b.slot_node[r][s][slot_index[s].at({false, mb})]);
    }

    // Gradient synchronization: replica r pushes stage gradients to the
    // next replica in the ring once the final micro-batch's backward is done.
    if (cfg.dp >= 2) {
      int peer = (r + 1) % cfg.dp;
      for (int s = 0; s < cfg.pp; ++s) {
        std::ostringstream lbl;
        lbl << "dp r" << r << " s" << s;
        int node = b.add_transfer(TaskKind::GradientSync, r, s, -1,
                                  place.stage_to_pod[r][s], place.stage_to_pod[peer][s],
                                  place.gpu_assignment[r][s], place.gpu_assignment[peer][s],
                                  cfg.dp_volume_gb, lbl.str());
        int last_bwd_slot = slot_index[s].at({false, mbs - 1});
        b.add_edge(b.slot_node[r][s][last_bwd_slot], node);
        send_queue[s].emplace_back(last_bwd_slot, node);
      }
    }

    for (int s = 0; s < cfg.pp; ++s) {
      auto& queue = send_queue[s];
      std::stable_sort(queue.begin(), queue.end(),
                       [](const auto& a, const auto& b2) { return a.first < b2.first; });
      for (size_t i = 0; i + 1 < queue.size(); ++i)
        b.add_edge(queue[i].second, queue[i + 1].second);
    }
  }

  bool has_inter_pod = false;
  for (const auto& task : b.out.tasks)
    if (!task.is_virtual()) has_inter_pod = true;
  if (!has_inter_pod)
    throw ConfigError("placement leaves zero inter-pod communication tasks");

  if (!b.out.full_dag.is_acyclic()) throw ConfigError("generated full DAG has a cycle");
  return std::move(b.out);
}

std::pair<int, int> count_tasks(const ParallelConfig& cfg) {
  cfg.validate();
  return {2 * (cfg.pp - 1) * cfg.num_micro_batches, cfg.pp};
}

}  // namespace delta
