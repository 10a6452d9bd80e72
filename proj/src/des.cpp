#include "delta/des.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

namespace delta {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double time_tolerance(double t) { return 1e-12 * (1.0 + std::abs(t)); }

struct IntervalRecord {
  TimeMs begin = 0;
  TimeMs end = 0;
  std::vector<std::pair<TaskId, VolumeGb>> moved;
};

}  // namespace

int SimTrace::interval_of_event(TimeMs t) const {
  auto it = std::lower_bound(events.begin(), events.end(), t);
  if (it == events.end() || *it != t)
    throw std::invalid_argument("timestamp is not a trace event");
  int idx = static_cast<int>(it - events.begin()) + 1;  // events are 1-based intervals' starts
  return std::min(idx, num_intervals());
}

std::vector<double> max_min_share(const std::vector<TaskId>& active, const ReducedDag& dag,
                                  const LogicalTopology& topo, double bandwidth_gbps,
                                  bool ideal) {
  struct Cap {
    double capacity = 0;           // Gb/ms
    std::vector<std::pair<int, double>> members;  // (position in `active`, coefficient)
  };
  const double per_flow = bandwidth_gbps * kGbpsToGbPerMs;

  std::map<std::pair<PodId, PodId>, Cap> link_caps;
  std::map<std::pair<GpuId, int>, Cap> nic_caps;  // (gpu, 0=tx 1=rx)
  for (size_t pos = 0; pos < active.size(); ++pos) {
    const CommTask& task = dag.tasks[active[pos]];
    if (!ideal) {
      auto& cap = link_caps[{task.src_pod, task.dst_pod}];
      cap.capacity = topo.at(task.src_pod, task.dst_pod) * per_flow;
      cap.members.emplace_back(static_cast<int>(pos), static_cast<double>(task.flows));
    }
    for (GpuId g : task.src_gpus) {
      auto& cap = nic_caps[{g, 0}];
      cap.capacity = per_flow;
      cap.members.emplace_back(static_cast<int>(pos), 1.0);
    }
    for (GpuId g : task.dst_gpus) {
      auto& cap = nic_caps[{g, 1}];
      cap.capacity = per_flow;
      cap.members.emplace_back(static_cast<int>(pos), 1.0);
    }
  }

  std::vector<const Cap*> caps;
  caps.reserve(link_caps.size() + nic_caps.size());
  for (const auto& [key, cap] : link_caps) caps.push_back(&cap);
  for (const auto& [key, cap] : nic_caps) caps.push_back(&cap);

  // Progressive filling: the common per-flow level of unfrozen tasks rises
  // until some constraint saturates, which freezes its members.
  std::vector<double> rate(active.size(), 0.0);  // per-flow
  std::vector<bool> frozen(active.size(), false);
  size_t remaining = active.size();
  while (remaining > 0) {
    double level = kInf;
    for (const Cap* cap : caps) {
      double frozen_load = 0;
      double denom = 0;
      for (auto [pos, coeff] : cap->members) {
        if (frozen[pos])
          frozen_load += coeff * rate[pos];
        else
          denom += coeff;
      }
      if (denom <= 0) continue;
      level = std::min(level, (cap->capacity - frozen_load) / denom);
    }
    if (level == kInf) break;  // unconstrained leftovers; cannot happen with NIC caps
    level = std::max(level, 0.0);
    for (const Cap* cap : caps) {
      double frozen_load = 0;
      double denom = 0;
      for (auto [pos, coeff] : cap->members) {
        if (frozen[pos])
          frozen_load += coeff * rate[pos];
        else
          denom += coeff;
      }
      if (denom <= 0) continue;
      double cap_level = (cap->capacity - frozen_load) / denom;
      if (cap_level <= level * (1 + 1e-12) + 1e-15) {
        for (auto [pos, coeff] : cap->members) {
          if (!frozen[pos]) {
            frozen[pos] = true;
            rate[pos] = level;
            --remaining;
          }
        }
      }
    }
  }

  std::vector<double> aggregate(active.size());
  for (size_t pos = 0; pos < active.size(); ++pos)
    aggregate[pos] = rate[pos] * dag.tasks[active[pos]].flows;
  return aggregate;
}

SimTrace simulate(const LogicalTopology& topo, const ReducedDag& dag,
                  double bandwidth_gbps, const SimOptions& opts) {
  const size_t n = dag.tasks.size();
  dag.topological_order();  // rejects cycles

  if (!opts.ideal) {
    for (const auto& task : dag.tasks) {
      if (task.is_virtual()) continue;
      if (topo.at(task.src_pod, task.dst_pod) < 1) {
        std::ostringstream os;
        os << "task " << task.id << " unroutable: no circuit between pods " << task.src_pod
           << " and " << task.dst_pod;
        throw InfeasibleError(os.str());
      }
    }
  }

  auto succ = dag.successors();
  std::vector<int> waiting(n, 0);
  for (const auto& d : dag.deps) ++waiting[d.succ];

  std::vector<double> ready_time(n, 0.0);
  std::vector<double> remaining(n);
  std::vector<double> start(n, -1.0), completion(n, -1.0);
  for (size_t i = 0; i < n; ++i) remaining[i] = dag.tasks[i].volume_gb;

  using ReadyEntry = std::pair<double, TaskId>;
  std::priority_queue<ReadyEntry, std::vector<ReadyEntry>, std::greater<>> ready_heap;
  for (size_t i = 0; i < n; ++i)
    if (waiting[i] == 0) ready_heap.push({0.0, static_cast<TaskId>(i)});

  std::vector<TaskId> active;
  std::vector<IntervalRecord> records;
  double now = 0.0;
  size_t done = 0;

  auto propagate = [&](TaskId m) {
    for (auto [v, gap] : succ[m]) {
      ready_time[v] = std::max(ready_time[v], completion[m] + gap);
      if (--waiting[v] == 0) ready_heap.push({ready_time[v], v});
    }
  };

  while (done < n) {
    // Start everything eligible now; zero-volume tasks finish instantly
    // and may cascade further eligibility at the same instant.
    bool changed = true;
    while (changed) {
      changed = false;
      while (!ready_heap.empty() && ready_heap.top().first <= now + time_tolerance(now)) {
        TaskId m = ready_heap.top().second;
        ready_heap.pop();
        start[m] = now;
        if (remaining[m] <= 0.0) {
          completion[m] = now;
          ++done;
          propagate(m);
          changed = true;
        } else {
          active.push_back(m);
        }
      }
    }

    if (done == n) break;
    if (active.empty() && ready_heap.empty())
      throw std::logic_error("simulation stalled with unfinished tasks");

    std::sort(active.begin(), active.end());
    std::vector<double> rates =
        active.empty() ? std::vector<double>{}
                       : max_min_share(active, dag, topo, bandwidth_gbps, opts.ideal);

    double next_time = kInf;
    for (size_t i = 0; i < active.size(); ++i) {
      if (rates[i] <= 0) throw InfeasibleError("active task starved of bandwidth");
      next_time = std::min(next_time, now + remaining[active[i]] / rates[i]);
    }
    if (!ready_heap.empty()) next_time = std::min(next_time, ready_heap.top().first);

    if (next_time > now) {
      IntervalRecord rec;
      rec.begin = now;
      rec.end = next_time;
      double dt = next_time - now;
      for (size_t i = 0; i < active.size(); ++i) {
        double moved = rates[i] * dt;
        rec.moved.emplace_back(active[i], moved);
        remaining[active[i]] -= moved;
      }
      records.push_back(std::move(rec));
    }

    // Complete every task predicted to end at this event.
    std::vector<TaskId> still_active;
    for (size_t i = 0; i < active.size(); ++i) {
      TaskId m = active[i];
      if (remaining[m] <= 1e-9 * std::max(1.0, dag.tasks[m].volume_gb)) {
        // Fold the residual into the last interval so volumes conserve exactly.
        if (!records.empty() && records.back().end == next_time) {
          for (auto& [id, moved] : records.back().moved)
            if (id == m) moved += remaining[m];
        }
        remaining[m] = 0.0;
        completion[m] = next_time;
        ++done;
        propagate(m);
      } else {
        still_active.push_back(m);
      }
    }
    active = std::move(still_active);
    now = next_time;
  }

  SimTrace trace;
  trace.start.assign(start.begin(), start.end());
  trace.completion.assign(completion.begin(), completion.end());
  trace.makespan_ms = *std::max_element(completion.begin(), completion.end());

  std::vector<double> events{0.0};
  for (size_t i = 0; i < n; ++i) {
    events.push_back(start[i]);
    events.push_back(completion[i]);
  }
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());
  trace.events = events;

  trace.interval_volumes.assign(n, std::vector<VolumeGb>(trace.num_intervals(), 0.0));
  for (const auto& rec : records) {
    auto it = std::lower_bound(events.begin(), events.end(), rec.begin);
    int k = static_cast<int>(it - events.begin());
    // A record can span several event boundaries only when the interior
    // events belong to zero-volume tasks; rates were constant throughout,
    // so volume splits proportionally.
    while (k + 1 < static_cast<int>(events.size()) && events[k] < rec.end) {
      double seg_begin = events[k];
      double seg_end = std::min(events[k + 1], rec.end);
      double frac = (seg_end - seg_begin) / (rec.end - rec.begin);
      for (auto [id, moved] : rec.moved) trace.interval_volumes[id][k] += moved * frac;
      ++k;
    }
  }
  return trace;
}

std::vector<TaskId> critical_path_tasks(const SimTrace& trace, const ReducedDag& dag) {
  auto preds = dag.predecessors();
  TaskId cur = 0;
  double best = -kInf;
  for (size_t i = 0; i < dag.tasks.size(); ++i) {
    if (trace.completion[i] > best) {
      best = trace.completion[i];
      cur = static_cast<TaskId>(i);
    }
  }
  std::vector<TaskId> chain{cur};
  while (true) {
    double tol = 1e-9 * std::max(1.0, trace.makespan_ms);
    TaskId binding = -1;
    for (auto [p, gap] : preds[cur]) {
      if (std::abs(trace.completion[p] + gap - trace.start[cur]) <= tol) {
        if (binding == -1 || p < binding) binding = p;
      }
    }
    if (binding == -1) break;
    chain.push_back(binding);
    cur = binding;
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

TimeMs critical_path_comm_time(const SimTrace& trace, const ReducedDag& dag) {
  double total = 0.0;
  for (TaskId m : critical_path_tasks(trace, dag))
    total += trace.completion[m] - trace.start[m];
  return total;
}

double nct(const SimTrace& trace_ocs, const SimTrace& trace_ideal, const ReducedDag& dag) {
  double denom = critical_path_comm_time(trace_ideal, dag);
  if (denom <= 0) throw InfeasibleError("ideal critical-path communication time is zero");
  return critical_path_comm_time(trace_ocs, dag) / denom;
}

TaskAnchors derive_anchors(const SimTrace& trace) {
  TaskAnchors anchors;
  anchors.num_intervals = trace.num_intervals();
  const size_t n = trace.start.size();
  anchors.start_interval.resize(n);
  anchors.end_interval.resize(n);
  for (size_t m = 0; m < n; ++m) {
    auto it = std::lower_bound(trace.events.begin(), trace.events.end(), trace.start[m]);
    int start_idx = static_cast<int>(it - trace.events.begin()) + 1;
    if (trace.completion[m] <= trace.start[m]) {
      // Instantaneous task: pin it to the interval opening at its timestamp.
      int k = std::min(start_idx, anchors.num_intervals);
      anchors.start_interval[m] = std::max(1, k);
      anchors.end_interval[m] = anchors.start_interval[m];
      continue;
    }
    auto it_end = std::lower_bound(trace.events.begin(), trace.events.end(),
                                   trace.completion[m]);
    int end_idx = static_cast<int>(it_end - trace.events.begin());  // interval before C_m
    anchors.start_interval[m] = start_idx;
    anchors.end_interval[m] = end_idx;
  }
  return anchors;
}

}  // namespace delta
