#include "delta/dag.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace delta {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::vector<std::vector<std::pair<TaskId, TimeMs>>> ReducedDag::successors() const {
  std::vector<std::vector<std::pair<TaskId, TimeMs>>> out(tasks.size());
  for (const auto& d : deps) out[d.pre].emplace_back(d.succ, d.gap_ms);
  return out;
}

std::vector<std::vector<std::pair<TaskId, TimeMs>>> ReducedDag::predecessors() const {
  std::vector<std::vector<std::pair<TaskId, TimeMs>>> out(tasks.size());
  for (const auto& d : deps) out[d.succ].emplace_back(d.pre, d.gap_ms);
  return out;
}

std::vector<TaskId> ReducedDag::topological_order() const {
  std::vector<int> indeg(tasks.size(), 0);
  auto succ = successors();
  for (const auto& d : deps) ++indeg[d.succ];
  std::deque<TaskId> queue;
  for (size_t i = 0; i < tasks.size(); ++i)
    if (indeg[i] == 0) queue.push_back(static_cast<TaskId>(i));
  std::vector<TaskId> order;
  while (!queue.empty()) {
    TaskId u = queue.front();
    queue.pop_front();
    order.push_back(u);
    for (auto [v, gap] : succ[u])
      if (--indeg[v] == 0) queue.push_back(v);
  }
  if (order.size() != tasks.size()) throw ConfigError("reduced DAG contains a cycle");
  return order;
}

bool ReducedDag::is_acyclic() const {
  try {
    topological_order();
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

std::map<GpuId, std::vector<TaskId>> ReducedDag::src_index() const {
  std::map<GpuId, std::vector<TaskId>> index;
  for (const auto& task : tasks)
    for (GpuId g : task.src_gpus) index[g].push_back(task.id);
  return index;
}

std::map<GpuId, std::vector<TaskId>> ReducedDag::dst_index() const {
  std::map<GpuId, std::vector<TaskId>> index;
  for (const auto& task : tasks)
    for (GpuId g : task.dst_gpus) index[g].push_back(task.id);
  return index;
}

std::vector<std::pair<PodId, PodId>> ReducedDag::active_directed_pairs() const {
  std::set<std::pair<PodId, PodId>> pairs;
  for (const auto& task : tasks)
    if (!task.is_virtual()) pairs.emplace(task.src_pod, task.dst_pod);
  return {pairs.begin(), pairs.end()};
}

std::vector<std::pair<PodId, PodId>> ReducedDag::active_pairs() const {
  std::set<std::pair<PodId, PodId>> pairs;
  for (const auto& task : tasks)
    if (!task.is_virtual())
      pairs.emplace(std::min(task.src_pod, task.dst_pod), std::max(task.src_pod, task.dst_pod));
  return {pairs.begin(), pairs.end()};
}

void ReducedDag::validate() const {
  for (size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    if (task.id != static_cast<TaskId>(i)) throw ConfigError("task ids must be dense");
    if (task.is_virtual()) continue;
    if (task.src_pod == task.dst_pod) throw ConfigError("task with identical src and dst pod");
    if (task.src_pod < 0 || task.src_pod >= num_pods || task.dst_pod < 0 ||
        task.dst_pod >= num_pods)
      throw ConfigError("task pod out of range");
    if (task.volume_gb <= 0) throw ConfigError("non-virtual task with zero volume");
    if (task.flows <= 0 || task.flows != static_cast<int>(task.src_gpus.size()) ||
        task.flows != static_cast<int>(task.dst_gpus.size()))
      throw ConfigError("task flow count must match its GPU sets");
  }
  for (const auto& d : deps) {
    if (d.pre < 0 || d.succ < 0 || d.pre >= static_cast<TaskId>(tasks.size()) ||
        d.succ >= static_cast<TaskId>(tasks.size()))
      throw ConfigError("dependency endpoint out of range");
    if (d.gap_ms < 0) throw ConfigError("negative dependency gap");
  }
  topological_order();  // throws on cycles

  // Every non-virtual task must be reachable from the virtual source.
  auto succ = successors();
  std::vector<bool> reached(tasks.size(), false);
  std::deque<TaskId> queue{virtual_source};
  reached[virtual_source] = true;
  while (!queue.empty()) {
    TaskId u = queue.front();
    queue.pop_front();
    for (auto [v, gap] : succ[u])
      if (!reached[v]) {
        reached[v] = true;
        queue.push_back(v);
      }
  }
  for (const auto& task : tasks)
    if (!task.is_virtual() && !reached[task.id])
      throw ConfigError("task unreachable from the virtual source");
}

ReducedDag reduce_dag(const Workload& workload) {
  const FullDag& full = workload.full_dag;
  if (!full.is_acyclic()) throw ConfigError("cannot reduce a cyclic DAG");

  ReducedDag out;
  out.tasks = workload.tasks;
  out.num_pods = workload.cfg.num_pods;
  out.port_caps = workload.placement.port_caps(workload.cfg);
  out.bandwidth_gbps = workload.cfg.nic_bandwidth_gbps;
  out.num_replicas = workload.cfg.dp;

  const auto order = full.topological_order();
  const auto adj = full.adjacency();
  std::vector<int> order_pos(full.nodes.size());
  for (size_t i = 0; i < order.size(); ++i) order_pos[order[i]] = static_cast<int>(i);

  // For every communication node, the longest intra-pod-only chain to each
  // communication node downstream becomes one weighted edge.
  std::map<std::pair<TaskId, TaskId>, TimeMs> merged;
  std::vector<double> dist(full.nodes.size());
  for (const auto& src_node : full.nodes) {
    if (!src_node.is_comm) continue;
    std::fill(dist.begin(), dist.end(), kNegInf);
    dist[src_node.id] = 0.0;
    // Walk in global topological order; expansion stops at comm nodes.
    for (int pos = order_pos[src_node.id]; pos < static_cast<int>(order.size()); ++pos) {
      int u = order[pos];
      if (dist[u] == kNegInf) continue;
      if (full.nodes[u].is_comm && u != src_node.id) continue;
      double carry = dist[u] + (u == src_node.id ? 0.0 : full.nodes[u].duration_ms);
      for (int v : adj[u])
        if (carry > dist[v]) dist[v] = carry;
    }
    for (const auto& node : full.nodes) {
      if (!node.is_comm || node.id == src_node.id || dist[node.id] == kNegInf) continue;
      auto key = std::make_pair(src_node.comm_task, node.comm_task);
      auto it = merged.find(key);
      if (it == merged.end() || it->second < dist[node.id]) merged[key] = dist[node.id];
    }
  }
  for (const auto& [key, gap] : merged) out.deps.push_back({key.first, key.second, gap});

  out.validate();
  return out;
}

namespace {

// Structural identity of a task within its replica.
using TaskSignature = std::tuple<int, int, int>;  // (kind, stage, micro_batch)

TaskSignature signature(const CommTask& task) {
  return {static_cast<int>(task.kind), task.stage, task.micro_batch};
}

ReducedDag subset_dag(const ReducedDag& dag, const std::vector<TaskId>& keep,
                      std::vector<TaskId>* old_to_new_out) {
  std::vector<TaskId> old_to_new(dag.tasks.size(), -1);
  ReducedDag out;
  out.num_pods = dag.num_pods;
  out.bandwidth_gbps = dag.bandwidth_gbps;
  out.num_replicas = 1;
  for (TaskId old_id : keep) {
    CommTask task = dag.tasks[old_id];
    task.id = static_cast<TaskId>(out.tasks.size());
    old_to_new[old_id] = task.id;
    out.tasks.push_back(std::move(task));
  }
  for (const auto& d : dag.deps) {
    TaskId pre = old_to_new[d.pre];
    TaskId succ = old_to_new[d.succ];
    if (pre >= 0 && succ >= 0) out.deps.push_back({pre, succ, d.gap_ms});
  }
  out.virtual_source = old_to_new[dag.virtual_source];

  // Port budget: this sub-problem's per-replica share, counted as the
  // distinct GPUs injecting from each pod (receive-only pods fall back to
  // their receiving GPUs). Keeping the share below the pod's full budget
  // leaves room for the other replicas at broadcast time.
  std::vector<std::set<GpuId>> src_gpus(dag.num_pods), dst_gpus(dag.num_pods);
  for (const auto& task : out.tasks) {
    if (task.is_virtual()) continue;
    src_gpus[task.src_pod].insert(task.src_gpus.begin(), task.src_gpus.end());
    dst_gpus[task.dst_pod].insert(task.dst_gpus.begin(), task.dst_gpus.end());
  }
  out.port_caps.resize(dag.num_pods);
  for (int p = 0; p < dag.num_pods; ++p) {
    out.port_caps[p] = static_cast<int>(src_gpus[p].empty() ? dst_gpus[p].size()
                                                            : src_gpus[p].size());
    out.port_caps[p] = std::min(out.port_caps[p], dag.port_caps[p]);
  }
  if (old_to_new_out) *old_to_new_out = std::move(old_to_new);
  return out;
}

}  // namespace

ProjectionResult project_single_replica(const ReducedDag& dag, int replicas,
                                        ProjectionMode mode) {
  ProjectionResult result;
  if (replicas <= 1) {
    result.homogeneous = true;
    result.reference = dag;
    result.map.num_replicas = 1;
    result.map.peers.resize(dag.tasks.size());
    for (size_t i = 0; i < dag.tasks.size(); ++i)
      result.map.peers[i] = {static_cast<TaskId>(i)};
    return result;
  }

  std::vector<std::vector<TaskId>> by_replica(replicas);
  for (const auto& task : dag.tasks) {
    if (task.is_virtual()) continue;
    if (task.replica < 0 || task.replica >= replicas)
      throw ConfigError("task replica out of range during projection");
    by_replica[task.replica].push_back(task.id);
  }

  // Replicas are isomorphic when their task signature multisets agree.
  bool isomorphic = true;
  std::map<TaskSignature, std::vector<TaskId>> peers_by_sig;
  for (int r = 0; r < replicas && isomorphic; ++r) {
    if (by_replica[r].size() != by_replica[0].size()) isomorphic = false;
  }
  if (isomorphic) {
    for (int r = 0; r < replicas; ++r)
      for (TaskId id : by_replica[r]) peers_by_sig[signature(dag.tasks[id])].push_back(id);
    for (const auto& [sig, ids] : peers_by_sig)
      if (static_cast<int>(ids.size()) != replicas) isomorphic = false;
  }

  bool decompose = (mode == ProjectionMode::Decompose) ||
                   (mode == ProjectionMode::Auto && !isomorphic);
  if (mode == ProjectionMode::Homogeneous && !isomorphic)
    throw ConfigError("replicas are not isomorphic; homogeneous projection impossible");

  if (!decompose) {
    result.homogeneous = true;
    std::vector<TaskId> keep{dag.virtual_source};
    keep.insert(keep.end(), by_replica[0].begin(), by_replica[0].end());
    std::sort(keep.begin(), keep.end());
    std::vector<TaskId> old_to_new;
    result.reference = subset_dag(dag, keep, &old_to_new);
    result.map.num_replicas = replicas;
    result.map.peers.assign(result.reference.tasks.size(), {});
    for (TaskId old_id : keep) {
      TaskId new_id = old_to_new[old_id];
      if (dag.tasks[old_id].is_virtual()) {
        result.map.peers[new_id].assign(replicas, dag.virtual_source);
      } else {
        result.map.peers[new_id] = peers_by_sig.at(signature(dag.tasks[old_id]));
      }
    }
    return result;
  }

  result.homogeneous = false;
  result.per_replica.resize(replicas);
  std::vector<std::vector<TaskId>> old_to_new_all(replicas);
  for (int r = 0; r < replicas; ++r) {
    std::vector<TaskId> keep{dag.virtual_source};
    keep.insert(keep.end(), by_replica[r].begin(), by_replica[r].end());
    std::sort(keep.begin(), keep.end());
    result.per_replica[r] = subset_dag(dag, keep, &old_to_new_all[r]);
  }

  // Barrier alignment: the replica whose synchronization phase becomes
  // eligible last sets the global temporal baseline.
  int max_stage = -1;
  for (const auto& task : dag.tasks)
    if (task.kind == TaskKind::GradientSync) max_stage = std::max(max_stage, task.stage);
  result.barrier.dp_tasks.assign(std::max(0, max_stage + 1),
                                 std::vector<TaskId>(replicas, -1));
  for (const auto& task : dag.tasks)
    if (task.kind == TaskKind::GradientSync)
      result.barrier.dp_tasks[task.stage][task.replica] = task.id;

  double worst = -1.0;
  result.barrier.bottleneck_replica = 0;
  for (int r = 0; r < replicas; ++r) {
    const auto& sub = result.per_replica[r];
    auto order = sub.topological_order();
    auto preds = sub.predecessors();
    std::vector<double> est(sub.tasks.size(), 0.0);
    for (TaskId v : order)
      for (auto [u, gap] : preds[v])
        est[v] = std::max(est[v],
                          est[u] + sub.tasks[u].min_duration_ms(sub.bandwidth_gbps) + gap);
    double sync_start = 0.0;
    for (const auto& task : sub.tasks)
      if (task.kind == TaskKind::GradientSync) sync_start = std::max(sync_start, est[task.id]);
    if (sync_start > worst) {
      worst = sync_start;
      result.barrier.bottleneck_replica = r;
    }
  }
  return result;
}

LogicalTopology broadcast_topology(const LogicalTopology& reference_topo,
                                   const ReducedDag& full_dag,
                                   const ProjectionResult& projection) {
  LogicalTopology out = LogicalTopology::zero(full_dag.port_caps);
  if (!projection.homogeneous)
    throw ConfigError("broadcast requires a homogeneous projection");

  const ReducedDag& ref = projection.reference;
  // Each reference pair's capacity is replayed onto every pair its tasks
  // translate to. Replicas run the same schedule in lockstep, so flows
  // arriving at one physical pair from different reference pairs are
  // direction- or phase-disjoint; the max of their needs suffices.
  for (const auto& task : ref.tasks) {
    if (task.is_virtual()) continue;
    auto pair = std::minmax(task.src_pod, task.dst_pod);
    int value = reference_topo.at(pair.first, pair.second);
    for (int r = 0; r < projection.map.num_replicas; ++r) {
      const CommTask& peer = full_dag.tasks[projection.map.peers[task.id][r]];
      auto tpair = std::minmax(peer.src_pod, peer.dst_pod);
      if (out.circuits[tpair.first][tpair.second] < value) {
        out.circuits[tpair.first][tpair.second] = value;
        out.circuits[tpair.second][tpair.first] = value;
      }
    }
  }
  out.validate();
  return out;
}

Reachability transitive_closure(const ReducedDag& dag) {
  const size_t n = dag.tasks.size();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (size_t i = 0; i < n; ++i) r[i][i] = true;
  for (const auto& d : dag.deps) r[d.pre][d.succ] = true;

  // Boolean matrix squaring: closure after ceil(log2(n)) squarings.
  size_t steps = 1;
  std::vector<std::vector<bool>> next(n, std::vector<bool>(n, false));
  while (steps < n) {
    for (size_t i = 0; i < n; ++i) {
      for (size_t k = 0; k < n; ++k) {
        if (!r[i][k]) continue;
        for (size_t j = 0; j < n; ++j)
          if (r[k][j]) next[i][j] = true;
      }
    }
    r = next;
    for (auto& row : next) std::fill(row.begin(), row.end(), false);
    steps *= 2;
  }
  return Reachability{std::move(r)};
}

TimeMs longest_path_ms(const ReducedDag& dag) {
  auto order = dag.topological_order();
  auto preds = dag.predecessors();
  double best = 0.0;
  std::vector<double> finish(dag.tasks.size(), 0.0);
  for (TaskId v : order) {
    double start = 0.0;
    for (auto [u, gap] : preds[v]) start = std::max(start, finish[u] + gap);
    finish[v] = start + dag.tasks[v].min_duration_ms(dag.bandwidth_gbps);
    best = std::max(best, finish[v]);
  }
  return best;
}

}  // namespace delta
