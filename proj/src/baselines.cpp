#include "delta/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace delta {

TrafficMatrix TrafficMatrix::from_dag(const ReducedDag& dag) {
  TrafficMatrix tm;
  tm.volume_gb.assign(dag.num_pods, std::vector<VolumeGb>(dag.num_pods, 0.0));
  for (const auto& task : dag.tasks)
    if (!task.is_virtual()) tm.volume_gb[task.src_pod][task.dst_pod] += task.volume_gb;
  return tm;
}

VolumeGb TrafficMatrix::pair_weight(PodId i, PodId j) const {
  return volume_gb[i][j] + volume_gb[j][i];
}

namespace {

using Pair = std::pair<PodId, PodId>;

std::vector<Pair> active_pairs(const TrafficMatrix& tm) {
  std::vector<Pair> pairs;
  for (PodId i = 0; i < tm.num_pods(); ++i)
    for (PodId j = i + 1; j < tm.num_pods(); ++j)
      if (tm.pair_weight(i, j) > 0) pairs.emplace_back(i, j);
  return pairs;
}

// Largest-remainder split of `amount` proportional to weights; ties break
// toward the earlier entry.
std::vector<int> apportion(int amount, const std::vector<double>& weights) {
  const size_t n = weights.size();
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> grant(n, 0);
  if (total <= 0 || amount <= 0) return grant;
  std::vector<double> remainder(n);
  int used = 0;
  for (size_t i = 0; i < n; ++i) {
    double share = amount * weights[i] / total;
    grant[i] = static_cast<int>(std::floor(share + 1e-12));
    remainder[i] = share - grant[i];
    used += grant[i];
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
  for (size_t idx = 0; used < amount && idx < n; ++idx) {
    ++grant[order[idx]];
    ++used;
  }
  return grant;
}

LogicalTopology weighted_alloc(const TrafficMatrix& tm, const std::vector<int>& port_caps,
                               bool sqrt_weights) {
  LogicalTopology topo = LogicalTopology::zero(port_caps);
  auto pairs = active_pairs(tm);
  if (pairs.empty()) return topo;

  auto weight_of = [&](const Pair& e) {
    double w = tm.pair_weight(e.first, e.second);
    return sqrt_weights ? std::sqrt(w) : w;
  };

  // Every pair that carries traffic needs at least one circuit.
  for (const auto& [i, j] : pairs) topo.set_symmetric(i, j, 1);
  for (PodId p = 0; p < tm.num_pods(); ++p) {
    if (topo.allocated_ports(p) > port_caps[p])
      throw InfeasibleError("active pairs exceed the port budget of pod " +
                            std::to_string(p));
  }

  // Grow allocations proportionally; a pair only receives what both of its
  // endpoints granted, and leftover headroom recirculates until no pod can
  // push more through its remaining pairs.
  while (true) {
    std::vector<int> headroom(tm.num_pods());
    for (PodId p = 0; p < tm.num_pods(); ++p)
      headroom[p] = port_caps[p] - topo.allocated_ports(p);

    std::vector<Pair> assignable;
    for (const auto& e : pairs)
      if (headroom[e.first] > 0 && headroom[e.second] > 0) assignable.push_back(e);
    if (assignable.empty()) break;

    std::map<Pair, int> granted;
    for (PodId p = 0; p < tm.num_pods(); ++p) {
      std::vector<Pair> incident;
      std::vector<double> weights;
      for (const auto& e : assignable) {
        if (e.first == p || e.second == p) {
          incident.push_back(e);
          weights.push_back(weight_of(e));
        }
      }
      if (incident.empty()) continue;
      auto grants = apportion(headroom[p], weights);
      for (size_t i = 0; i < incident.size(); ++i) {
        auto it = granted.find(incident[i]);
        if (it == granted.end())
          granted[incident[i]] = grants[i];
        else
          it->second = std::min(it->second, grants[i]);
      }
    }

    int progress = 0;
    for (const auto& [e, amount] : granted) {
      if (amount <= 0) continue;
      topo.set_symmetric(e.first, e.second, topo.at(e.first, e.second) + amount);
      progress += amount;
    }
    if (progress == 0) {
      // Proportional grants rounded to zero everywhere; hand one circuit to
      // the heaviest assignable pair so headroom cannot strand.
      Pair best = assignable[0];
      for (const auto& e : assignable)
        if (weight_of(e) > weight_of(best)) best = e;
      topo.set_symmetric(best.first, best.second, topo.at(best.first, best.second) + 1);
    }
  }

  topo.validate();
  return topo;
}

}  // namespace

LogicalTopology prop_alloc(const TrafficMatrix& tm, const std::vector<int>& port_caps) {
  return weighted_alloc(tm, port_caps, false);
}

LogicalTopology sqrt_alloc(const TrafficMatrix& tm, const std::vector<int>& port_caps) {
  return weighted_alloc(tm, port_caps, true);
}

LogicalTopology iter_halve(const TrafficMatrix& tm, const std::vector<int>& port_caps) {
  LogicalTopology topo = LogicalTopology::zero(port_caps);
  auto pairs = active_pairs(tm);
  std::map<Pair, double> weight;
  for (const auto& e : pairs) weight[e] = tm.pair_weight(e.first, e.second);

  while (true) {
    std::vector<int> headroom(tm.num_pods());
    for (PodId p = 0; p < tm.num_pods(); ++p)
      headroom[p] = port_caps[p] - topo.allocated_ports(p);

    const Pair* best = nullptr;
    for (const auto& e : pairs) {
      if (headroom[e.first] <= 0 || headroom[e.second] <= 0) continue;
      if (!best || weight[e] > weight[*best]) best = &e;  // lexicographic tie-break
    }
    if (!best) break;
    topo.set_symmetric(best->first, best->second, topo.at(best->first, best->second) + 1);
    weight[*best] /= 2.0;
  }

  topo.validate();
  return topo;
}

}  // namespace delta
