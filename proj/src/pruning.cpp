#include "delta/pruning.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace delta {

long long IndexBounds::retained_cells() const {
  long long cells = 0;
  for (size_t m = 0; m < k_min.size(); ++m)
    cells += std::max(0, k_max[m] - k_min[m] + 1);
  return cells;
}

TimeWindows cal_task_time_windows(const ReducedDag& dag, double bandwidth_gbps,
                                  TimeMs t_up) {
  const size_t n = dag.tasks.size();
  TimeWindows w;
  w.tau.resize(n);
  for (size_t m = 0; m < n; ++m) w.tau[m] = dag.tasks[m].min_duration_ms(bandwidth_gbps);
  w.est.assign(n, 0.0);
  w.lct.assign(n, t_up);

  auto order = dag.topological_order();
  auto preds = dag.predecessors();
  auto succs = dag.successors();
  for (TaskId v : order)
    for (auto [u, gap] : preds[v])
      w.est[v] = std::max(w.est[v], w.est[u] + w.tau[u] + gap);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (auto [v, gap] : succs[*it])
      w.lct[*it] = std::min(w.lct[*it], w.lct[v] - w.tau[v] - gap);

  for (size_t m = 0; m < n; ++m) {
    if (w.est[m] + w.tau[m] > w.lct[m] + 1e-9) {
      std::ostringstream os;
      os << "task " << m << " window inverted (est " << w.est[m] << " + tau " << w.tau[m]
         << " > lct " << w.lct[m] << "); raise the time upper bound";
      throw InfeasibleError(os.str());
    }
  }
  return w;
}

IndexBounds task_time_index_pruning(const ReducedDag& dag, int num_intervals,
                                    const TaskAnchors& anchors, int widen) {
  const size_t n = dag.tasks.size();
  if (static_cast<size_t>(anchors.start_interval.size()) != n)
    throw ConfigError("anchors do not match the task set");
  const int k_total = num_intervals;

  IndexBounds bounds;
  bounds.num_intervals = k_total;
  bounds.k_min.assign(n, 1);
  bounds.k_max.assign(n, k_total);

  auto succs = dag.successors();
  auto preds = dag.predecessors();

  // Intermediate tasks (those with successors) anchor to their profiled
  // interval range, widened to hedge against schedules that deviate from
  // the fair-share baseline.
  for (size_t m = 0; m < n; ++m) {
    if (succs[m].empty()) continue;
    bounds.k_min[m] = std::max(1, anchors.start_interval[m] - widen);
    bounds.k_max[m] = std::min(k_total, anchors.end_interval[m] + widen);
  }

  // An active task occupies at least one interval, and a positive gap
  // occupies at least one more; instantaneous tasks occupy none.
  auto step = [&](TaskId pre, TimeMs gap) {
    if (dag.tasks[pre].volume_gb <= 0) return gap > 0 ? 1 : 0;
    return gap > 0 ? 2 : 1;
  };
  auto back_step = [&](TaskId succ, TimeMs gap) {
    if (dag.tasks[succ].volume_gb <= 0) return gap > 0 ? 1 : 0;
    return gap > 0 ? 2 : 1;
  };

  auto order = dag.topological_order();
  for (TaskId u : order)
    for (auto [v, gap] : succs[u])
      bounds.k_min[v] = std::max(bounds.k_min[v], bounds.k_min[u] + step(u, gap));
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (auto [v, gap] : succs[*it])
      bounds.k_max[*it] = std::min(bounds.k_max[*it], bounds.k_max[v] - back_step(v, gap));

  for (size_t m = 0; m < n; ++m) {
    if (bounds.k_min[m] > bounds.k_max[m]) {
      std::ostringstream os;
      os << "task " << m << " index bounds inverted [" << bounds.k_min[m] << ", "
         << bounds.k_max[m] << "]; widen the anchors or raise K";
      throw InfeasibleError(os.str());
    }
  }
  return bounds;
}

CircuitUpperBounds x_upper_bound(const ReducedDag& dag, double bandwidth_gbps,
                                 TimeMs t_up) {
  TimeWindows windows = cal_task_time_windows(dag, bandwidth_gbps, t_up);
  Reachability reach = transitive_closure(dag);

  CircuitUpperBounds caps;
  caps.cap.assign(dag.num_pods, std::vector<int>(dag.num_pods, 0));

  std::map<std::pair<PodId, PodId>, std::vector<TaskId>> by_pair;
  for (const auto& task : dag.tasks)
    if (!task.is_virtual()) by_pair[{task.src_pod, task.dst_pod}].push_back(task.id);

  for (const auto& [pair, tasks] : by_pair) {
    std::vector<double> boundaries;
    for (TaskId m : tasks) {
      boundaries.push_back(windows.est[m]);
      boundaries.push_back(windows.lct[m]);
    }
    std::sort(boundaries.begin(), boundaries.end());
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());

    long long bound = 0;
    for (size_t k = 0; k + 1 < boundaries.size(); ++k) {
      double mid = (boundaries[k] + boundaries[k + 1]) / 2.0;
      std::vector<TaskId> active;
      for (TaskId m : tasks)
        if (windows.est[m] <= mid && mid < windows.lct[m]) active.push_back(m);
      if (active.empty()) continue;

      ConflictGraph graph;
      graph.weights.resize(active.size());
      graph.adjacency.assign(active.size(), std::vector<bool>(active.size(), false));
      for (size_t a = 0; a < active.size(); ++a) {
        graph.weights[a] = dag.tasks[active[a]].flows;
        for (size_t b2 = a + 1; b2 < active.size(); ++b2) {
          if (reach.reachable(active[a], active[b2]) ||
              reach.reachable(active[b2], active[a])) {
            graph.adjacency[a][b2] = graph.adjacency[b2][a] = true;
          }
        }
      }
      bound = std::max(bound, solve_mwis(graph));
    }
    int value = static_cast<int>(bound);
    // Full-duplex circuits: the symmetric cap serves both directions.
    caps.cap[pair.first][pair.second] = std::max(caps.cap[pair.first][pair.second], value);
    caps.cap[pair.second][pair.first] = caps.cap[pair.first][pair.second];
  }
  return caps;
}

namespace {

struct MwisSearch {
  const ConflictGraph& graph;
  long long best = 0;

  explicit MwisSearch(const ConflictGraph& g) : graph(g) {}

  void run(std::vector<int> candidates, long long current) {
    best = std::max(best, current);
    while (!candidates.empty()) {
      long long potential = current;
      for (int v : candidates) potential += graph.weights[v];
      if (potential <= best) return;

      // Branch on the highest-degree candidate within the candidate set.
      int pick = candidates[0];
      int pick_deg = -1;
      for (int v : candidates) {
        int deg = 0;
        for (int u : candidates)
          if (u != v && graph.adjacency[v][u]) ++deg;
        if (deg > pick_deg) {
          pick_deg = deg;
          pick = v;
        }
      }
      if (pick_deg == 0) {
        // Independent remainder: take everything.
        long long total = current;
        for (int v : candidates) total += graph.weights[v];
        best = std::max(best, total);
        return;
      }

      // Include `pick`.
      std::vector<int> without_neighbors;
      for (int v : candidates)
        if (v != pick && !graph.adjacency[pick][v]) without_neighbors.push_back(v);
      run(std::move(without_neighbors), current + graph.weights[pick]);

      // Exclude `pick` and continue in-place.
      candidates.erase(std::find(candidates.begin(), candidates.end(), pick));
    }
    best = std::max(best, current);
  }
};

}  // namespace

long long solve_mwis(const ConflictGraph& graph) {
  const int n = static_cast<int>(graph.weights.size());
  if (n == 0) return 0;

  // Greedy incumbent: take vertices by descending weight when compatible.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return graph.weights[a] > graph.weights[b]; });
  std::vector<bool> taken(n, false);
  long long greedy = 0;
  for (int v : order) {
    bool ok = true;
    for (int u = 0; u < n; ++u)
      if (taken[u] && graph.adjacency[v][u]) ok = false;
    if (ok) {
      taken[v] = true;
      greedy += graph.weights[v];
    }
  }

  MwisSearch search(graph);
  search.best = greedy;
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  search.run(std::move(all), 0);
  return search.best;
}

}  // namespace delta
