#include "delta/milp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace delta {

int MilpModel::add_variable(const std::string& name, VarKind kind, double lower,
                            double upper) {
  if (name_index.count(name)) throw ConfigError("duplicate variable name: " + name);
  int idx = static_cast<int>(variables.size());
  variables.push_back({name, kind, lower, upper});
  name_index[name] = idx;
  return idx;
}

int MilpModel::var(const std::string& name) const {
  auto it = name_index.find(name);
  if (it == name_index.end()) throw ConfigError("unknown variable: " + name);
  return it->second;
}

bool MilpModel::has_var(const std::string& name) const { return name_index.count(name) > 0; }

void MilpModel::add_constraint(std::string tag, std::string name,
                               std::vector<std::pair<int, double>> terms, Sense sense,
                               double rhs) {
  constraints.push_back({std::move(name), std::move(terms), sense, rhs, std::move(tag)});
}

std::map<std::string, int> MilpModel::constraint_counts_by_tag() const {
  std::map<std::string, int> counts;
  for (const auto& c : constraints) ++counts[c.tag];
  return counts;
}

int MilpModel::free_variable_count() const {
  int count = 0;
  for (const auto& v : variables)
    if (v.upper > v.lower) ++count;
  return count;
}

double MilpModel::max_violation(const std::vector<double>& assignment) const {
  double worst = 0.0;
  for (size_t i = 0; i < variables.size(); ++i) {
    double v = assignment[i];
    double scale = std::max({1.0, std::abs(variables[i].lower), std::abs(variables[i].upper)});
    worst = std::max(worst, (variables[i].lower - v) / scale);
    worst = std::max(worst, (v - variables[i].upper) / scale);
    if (variables[i].kind != VarKind::Continuous)
      worst = std::max(worst, std::abs(v - std::round(v)));
  }
  for (const auto& c : constraints) {
    double lhs = 0.0;
    double scale = std::max(1.0, std::abs(c.rhs));
    for (auto [idx, coeff] : c.terms) {
      lhs += coeff * assignment[idx];
      scale = std::max(scale, std::abs(coeff * assignment[idx]));
    }
    double violation = 0.0;
    switch (c.sense) {
      case Sense::LessEq: violation = lhs - c.rhs; break;
      case Sense::GreaterEq: violation = c.rhs - lhs; break;
      case Sense::Equal: violation = std::abs(lhs - c.rhs); break;
    }
    worst = std::max(worst, violation / scale);
  }
  return worst;
}

double MilpModel::objective_value(const std::vector<double>& assignment) const {
  double value = 0.0;
  for (auto [idx, coeff] : objective) value += coeff * assignment[idx];
  return value;
}

namespace {

std::string vn_x(PodId i, PodId j) {
  return "x_" + std::to_string(i) + "_" + std::to_string(j);
}
std::string vn_beta(PodId i, PodId j, int b) {
  return "b_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(b);
}
std::string vn_rho(PodId i, PodId j, int b, int k) {
  return "rho_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(b) +
         "_" + std::to_string(k);
}
std::string vn_t(int k) { return "t_" + std::to_string(k); }
std::string vn_dlt(int k) { return "dlt_" + std::to_string(k); }
std::string vn_w(TaskId m, int k) {
  return "w_" + std::to_string(m) + "_" + std::to_string(k);
}
std::string vn_y(TaskId m, int k) {
  return "y_" + std::to_string(m) + "_" + std::to_string(k);
}
std::string vn_sf(TaskId m, int k) {
  return "sf_" + std::to_string(m) + "_" + std::to_string(k);
}
std::string vn_start(TaskId m) { return "S_" + std::to_string(m); }
std::string vn_end(TaskId m) { return "C_" + std::to_string(m); }
std::string vn_u(PodId i, PodId j, int k) {
  return "u_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k);
}
std::string vn_rate(TaskId m, int t) {
  return "r_" + std::to_string(m) + "_" + std::to_string(t);
}
std::string vn_st(TaskId m, int t) {
  return "st_" + std::to_string(m) + "_" + std::to_string(t);
}
std::string vn_en(TaskId m, int t) {
  return "en_" + std::to_string(m) + "_" + std::to_string(t);
}

std::string idx2(int a, int b) { return std::to_string(a) + "_" + std::to_string(b); }
std::string idx3(int a, int b, int c) {
  return std::to_string(a) + "_" + std::to_string(b) + "_" + std::to_string(c);
}

int bits_for(int max_value) {
  int bits = 1;
  while ((1 << bits) - 1 < max_value) ++bits;
  return bits;
}

struct PairContext {
  std::vector<std::pair<PodId, PodId>> directed;   // pairs carrying tasks
  std::vector<std::pair<PodId, PodId>> canonical;  // unordered pairs, i < j
  std::map<std::pair<PodId, PodId>, std::vector<TaskId>> tasks_by_pair;
  std::map<std::pair<PodId, PodId>, int> bits;     // per canonical pair

  explicit PairContext(const ReducedDag& dag, const CircuitUpperBounds* caps) {
    std::set<std::pair<PodId, PodId>> canon;
    for (const auto& task : dag.tasks) {
      if (task.is_virtual()) continue;
      tasks_by_pair[{task.src_pod, task.dst_pod}].push_back(task.id);
      canon.emplace(std::min(task.src_pod, task.dst_pod),
                    std::max(task.src_pod, task.dst_pod));
    }
    for (const auto& [pair, ids] : tasks_by_pair) directed.push_back(pair);
    canonical.assign(canon.begin(), canon.end());
    for (const auto& [i, j] : canonical) {
      int ub = std::min(dag.port_caps[i], dag.port_caps[j]);
      if (caps) ub = std::min(ub, caps->at(i, j));
      bits[{i, j}] = bits_for(std::max(1, ub));
    }
  }

  int x_upper(const ReducedDag& dag, const CircuitUpperBounds* caps, PodId i,
              PodId j) const {
    int ub = std::min(dag.port_caps[i], dag.port_caps[j]);
    if (caps) ub = std::min(ub, caps->at(i, j));
    return ub;
  }

  std::pair<PodId, PodId> canon_of(PodId i, PodId j) const {
    return {std::min(i, j), std::max(i, j)};
  }
};

void add_topology_variables(MilpModel& model, const ReducedDag& dag,
                            const PairContext& ctx, const CircuitUpperBounds* caps) {
  for (const auto& [i, j] : ctx.canonical) {
    int ub = ctx.x_upper(dag, caps, i, j);
    model.add_variable(vn_x(i, j), VarKind::Integer, 0, ub);
    model.add_variable(vn_x(j, i), VarKind::Integer, 0, ub);
    model.add_constraint("sym", "sym_" + idx2(i, j),
                         {{model.var(vn_x(i, j)), 1.0}, {model.var(vn_x(j, i)), -1.0}},
                         Sense::Equal, 0.0);
  }
  // Port budgets: outgoing and incoming circuits per pod.
  for (PodId p = 0; p < dag.num_pods; ++p) {
    std::vector<std::pair<int, double>> tx, rx;
    for (const auto& [i, j] : ctx.canonical) {
      if (i == p) {
        tx.emplace_back(model.var(vn_x(p, j)), 1.0);
        rx.emplace_back(model.var(vn_x(j, p)), 1.0);
      } else if (j == p) {
        tx.emplace_back(model.var(vn_x(p, i)), 1.0);
        rx.emplace_back(model.var(vn_x(i, p)), 1.0);
      }
    }
    if (tx.empty()) continue;
    model.add_constraint("port_tx", "port_tx_" + std::to_string(p), tx, Sense::LessEq,
                         dag.port_caps[p]);
    model.add_constraint("port_rx", "port_rx_" + std::to_string(p), rx, Sense::LessEq,
                         dag.port_caps[p]);
  }
}

}  // namespace

MilpModel build_var_interval_model(const ReducedDag& dag, double bandwidth_gbps,
                                   const VarIntervalOptions& opts) {
  if (opts.num_intervals < 1) throw ConfigError("variable-interval model needs K >= 1");
  if (opts.t_up <= 0) throw ConfigError("variable-interval model needs a time upper bound");
  dag.validate();

  const int K = opts.num_intervals;
  const double rate_cap = bandwidth_gbps * kGbpsToGbPerMs;  // Gb/ms per flow
  const double m_time = opts.t_up;
  double m_vol = 1.0;
  for (const auto& task : dag.tasks)
    if (!task.is_virtual())
      m_vol = std::max(m_vol, task.volume_gb / static_cast<double>(task.flows));

  MilpModel model;
  model.num_intervals = K;
  model.big_m = m_time;

  PairContext ctx(dag, opts.circuit_caps);
  add_topology_variables(model, dag, ctx, opts.circuit_caps);

  // Binary expansion of each pair's circuit count, plus the Big-M
  // linearization of (circuits x interval length).
  for (const auto& [i, j] : ctx.canonical) {
    int bits = ctx.bits.at({i, j});
    std::vector<std::pair<int, double>> expansion{{model.var(vn_x(i, j)), 1.0}};
    for (int b = 0; b < bits; ++b) {
      int beta = model.add_variable(vn_beta(i, j, b), VarKind::Binary, 0, 1);
      expansion.emplace_back(beta, -static_cast<double>(1 << b));
    }
    model.add_constraint("binexp", "binexp_" + idx2(i, j), expansion, Sense::Equal, 0.0);
  }

  model.add_variable(vn_t(1), VarKind::Continuous, 0, 0);
  for (int k = 2; k <= K + 1; ++k)
    model.add_variable(vn_t(k), VarKind::Continuous, 0, m_time);
  for (int k = 1; k <= K; ++k)
    model.add_variable(vn_dlt(k), VarKind::Continuous, 0, m_time);
  for (int k = 1; k <= K; ++k) {
    model.add_constraint("ivl", "ivl_" + std::to_string(k),
                         {{model.var(vn_dlt(k)), 1.0},
                          {model.var(vn_t(k + 1)), -1.0},
                          {model.var(vn_t(k)), 1.0}},
                         Sense::Equal, 0.0);
  }

  for (const auto& [i, j] : ctx.canonical) {
    int bits = ctx.bits.at({i, j});
    for (int b = 0; b < bits; ++b) {
      for (int k = 1; k <= K; ++k) {
        int rho = model.add_variable(vn_rho(i, j, b, k), VarKind::Continuous, 0, m_time);
        int beta = model.var(vn_beta(i, j, b));
        int dlt = model.var(vn_dlt(k));
        std::string suffix = idx2(i, j) + "_" + idx2(b, k);
        model.add_constraint("bigm_on", "bigm_on_" + suffix,
                             {{rho, 1.0}, {beta, -m_time}}, Sense::LessEq, 0.0);
        model.add_constraint("bigm_ub", "bigm_ub_" + suffix, {{rho, 1.0}, {dlt, -1.0}},
                             Sense::LessEq, 0.0);
        model.add_constraint("bigm_lb", "bigm_lb_" + suffix,
                             {{rho, 1.0}, {dlt, -1.0}, {beta, -m_time}}, Sense::GreaterEq,
                             -m_time);
      }
    }
  }

  // Task variables. The virtual source has fixed zero endpoints and no
  // activation row.
  for (const auto& task : dag.tasks) {
    if (task.is_virtual()) {
      model.add_variable(vn_start(task.id), VarKind::Continuous, 0, 0);
      model.add_variable(vn_end(task.id), VarKind::Continuous, 0, 0);
      continue;
    }
    model.add_variable(vn_start(task.id), VarKind::Continuous, 0, m_time);
    model.add_variable(vn_end(task.id), VarKind::Continuous, 0, m_time);
    for (int k = 1; k <= K; ++k) {
      bool pruned = false;
      if (opts.index_bounds) {
        pruned = k < opts.index_bounds->k_min[task.id] || k > opts.index_bounds->k_max[task.id];
      }
      model.add_variable(vn_w(task.id, k), VarKind::Continuous, 0,
                         pruned ? 0.0 : task.volume_gb);
      model.add_variable(vn_y(task.id, k), VarKind::Binary, 0, pruned ? 0 : 1);
      model.add_variable(vn_sf(task.id, k), VarKind::Binary, 0, pruned ? 0 : 1);
    }
  }
  int c_total = model.add_variable("C", VarKind::Continuous, 0, m_time);

  for (const auto& task : dag.tasks) {
    if (task.is_virtual()) continue;
    TaskId m = task.id;
    std::vector<std::pair<int, double>> vol;
    std::vector<std::pair<int, double>> once;
    for (int k = 1; k <= K; ++k) {
      vol.emplace_back(model.var(vn_w(m, k)), 1.0);
      once.emplace_back(model.var(vn_sf(m, k)), 1.0);
      model.add_constraint("gate", "gate_" + idx2(m, k),
                           {{model.var(vn_w(m, k)), 1.0},
                            {model.var(vn_y(m, k)), -task.volume_gb}},
                           Sense::LessEq, 0.0);
      if (k == 1) {
        model.add_constraint("rise", "rise_" + idx2(m, k),
                             {{model.var(vn_sf(m, k)), 1.0}, {model.var(vn_y(m, k)), -1.0}},
                             Sense::GreaterEq, 0.0);
      } else {
        model.add_constraint("rise", "rise_" + idx2(m, k),
                             {{model.var(vn_sf(m, k)), 1.0},
                              {model.var(vn_y(m, k)), -1.0},
                              {model.var(vn_y(m, k - 1)), 1.0}},
                             Sense::GreaterEq, 0.0);
      }
      // Active intervals lie inside [S_m, C_m].
      model.add_constraint("start_bound", "start_bound_" + idx2(m, k),
                           {{model.var(vn_start(m)), 1.0},
                            {model.var(vn_t(k)), -1.0},
                            {model.var(vn_y(m, k)), m_time}},
                           Sense::LessEq, m_time);
      model.add_constraint("end_bound", "end_bound_" + idx2(m, k),
                           {{model.var(vn_end(m)), 1.0},
                            {model.var(vn_t(k + 1)), -1.0},
                            {model.var(vn_y(m, k)), -m_time}},
                           Sense::GreaterEq, -m_time);
    }
    model.add_constraint("vol", "vol_" + std::to_string(m), vol, Sense::Equal,
                         task.volume_gb);
    model.add_constraint("once", "once_" + std::to_string(m), once, Sense::Equal, 1.0);
    model.add_constraint("makespan", "makespan_" + std::to_string(m),
                         {{c_total, 1.0}, {model.var(vn_end(m)), -1.0}}, Sense::GreaterEq,
                         0.0);
  }

  // Aggregated rate cap per directed pair, via the linearized circuit-time
  // product of the canonical orientation.
  for (const auto& pair : ctx.directed) {
    auto canon = ctx.canon_of(pair.first, pair.second);
    int bits = ctx.bits.at(canon);
    const auto& members = ctx.tasks_by_pair.at(pair);
    for (int k = 1; k <= K; ++k) {
      std::vector<std::pair<int, double>> terms;
      for (TaskId m : members) terms.emplace_back(model.var(vn_w(m, k)), 1.0);
      for (int b = 0; b < bits; ++b)
        terms.emplace_back(model.var(vn_rho(canon.first, canon.second, b, k)),
                           -rate_cap * (1 << b));
      model.add_constraint("link_cap",
                           "link_cap_" + idx2(pair.first, pair.second) + "_" +
                               std::to_string(k),
                           terms, Sense::LessEq, 0.0);
    }
  }

  // NIC injection/reception caps per GPU and interval.
  auto add_nic = [&](const std::map<GpuId, std::vector<TaskId>>& index,
                     const std::string& tag) {
    for (const auto& [gpu, ids] : index) {
      std::vector<TaskId> real;
      for (TaskId m : ids)
        if (!dag.tasks[m].is_virtual()) real.push_back(m);
      if (real.empty()) continue;
      for (int k = 1; k <= K; ++k) {
        std::vector<std::pair<int, double>> terms;
        for (TaskId m : real)
          terms.emplace_back(model.var(vn_w(m, k)), 1.0 / dag.tasks[m].flows);
        terms.emplace_back(model.var(vn_dlt(k)), -rate_cap);
        model.add_constraint(tag, tag + "_" + idx2(gpu, k), terms, Sense::LessEq, 0.0);
      }
    }
  };
  add_nic(dag.src_index(), "nic_src");
  add_nic(dag.dst_index(), "nic_dst");

  for (size_t d = 0; d < dag.deps.size(); ++d) {
    const auto& dep = dag.deps[d];
    model.add_constraint("dep", "dep_" + std::to_string(d),
                         {{model.var(vn_start(dep.succ)), 1.0},
                          {model.var(vn_end(dep.pre)), -1.0}},
                         Sense::GreaterEq, dep.gap_ms);
  }

  // Fair-sharing rows force concurrently active tasks on one pair to move
  // equal per-flow volume; present only in topology-only mode.
  if (opts.mode == MilpMode::Topology) {
    for (const auto& pair : ctx.directed) {
      const auto& members = ctx.tasks_by_pair.at(pair);
      for (int k = 1; k <= K; ++k) {
        int u = model.add_variable(vn_u(pair.first, pair.second, k), VarKind::Continuous,
                                   0, m_vol);
        for (TaskId m : members) {
          std::string suffix = idx2(pair.first, pair.second) + "_" + idx2(m, k);
          model.add_constraint("fair_hi", "fair_hi_" + suffix,
                               {{model.var(vn_w(m, k)), 1.0 / dag.tasks[m].flows},
                                {u, -1.0},
                                {model.var(vn_y(m, k)), m_vol}},
                               Sense::LessEq, m_vol);
          model.add_constraint("fair_lo", "fair_lo_" + suffix,
                               {{u, 1.0},
                                {model.var(vn_w(m, k)), -1.0 / dag.tasks[m].flows},
                                {model.var(vn_y(m, k)), m_vol}},
                               Sense::LessEq, m_vol);
        }
      }
    }
  }

  model.objective = {{c_total, 1.0}};
  return model;
}

MilpModel build_fixed_step_model(const ReducedDag& dag, double bandwidth_gbps,
                                 const FixedStepOptions& opts) {
  if (opts.num_steps < 1 || opts.step_ms <= 0)
    throw ConfigError("fixed-step model needs positive step and horizon");
  dag.validate();
  if (opts.num_steps * opts.step_ms < longest_path_ms(dag))
    throw InfeasibleError("fixed-step horizon is below the critical path length");

  const int T = opts.num_steps;
  const double dt = opts.step_ms;
  const double rate_cap = bandwidth_gbps * kGbpsToGbPerMs;

  MilpModel model;
  model.num_intervals = T;
  model.fixed_step = true;
  model.step_ms = dt;

  PairContext ctx(dag, nullptr);

  // Topology rows (no binary expansion needed: rate caps are linear here).
  for (const auto& [i, j] : ctx.canonical) {
    int ub = ctx.x_upper(dag, nullptr, i, j);
    model.add_variable(vn_x(i, j), VarKind::Integer, 0, ub);
    model.add_variable(vn_x(j, i), VarKind::Integer, 0, ub);
    model.add_constraint("app_sym", "app_sym_" + idx2(i, j),
                         {{model.var(vn_x(i, j)), 1.0}, {model.var(vn_x(j, i)), -1.0}},
                         Sense::Equal, 0.0);
  }
  for (PodId p = 0; p < dag.num_pods; ++p) {
    std::vector<std::pair<int, double>> tx, rx;
    for (const auto& [i, j] : ctx.canonical) {
      if (i == p || j == p) {
        PodId other = (i == p) ? j : i;
        tx.emplace_back(model.var(vn_x(p, other)), 1.0);
        rx.emplace_back(model.var(vn_x(other, p)), 1.0);
      }
    }
    if (tx.empty()) continue;
    model.add_constraint("app_port_tx", "app_port_tx_" + std::to_string(p), tx,
                         Sense::LessEq, dag.port_caps[p]);
    model.add_constraint("app_port_rx", "app_port_rx_" + std::to_string(p), rx,
                         Sense::LessEq, dag.port_caps[p]);
  }

  for (const auto& task : dag.tasks) {
    if (task.is_virtual()) continue;
    TaskId m = task.id;
    double max_rate = task.flows * rate_cap;
    for (int t = 1; t <= T; ++t) {
      model.add_variable(vn_rate(m, t), VarKind::Continuous, 0, max_rate);
      model.add_variable(vn_y(m, t), VarKind::Binary, 0, 1);
      model.add_variable(vn_st(m, t), VarKind::Binary, 0, 1);
      model.add_variable(vn_en(m, t), VarKind::Binary, 0, 1);
    }
  }
  int c_total = model.add_variable("C", VarKind::Continuous, 0, T * dt);

  for (const auto& task : dag.tasks) {
    if (task.is_virtual()) continue;
    TaskId m = task.id;
    double max_rate = task.flows * rate_cap;
    std::vector<std::pair<int, double>> vol, start_once, end_once;
    for (int t = 1; t <= T; ++t) {
      vol.emplace_back(model.var(vn_rate(m, t)), dt);
      start_once.emplace_back(model.var(vn_st(m, t)), 1.0);
      end_once.emplace_back(model.var(vn_en(m, t)), 1.0);

      // Activation state: y_t = sum(st_{<=t}) - sum(en_{<t}); the
      // completion flag marks the last active slice.
      std::vector<std::pair<int, double>> state{{model.var(vn_y(m, t)), 1.0},
                                                {model.var(vn_st(m, t)), -1.0}};
      if (t > 1) {
        state.emplace_back(model.var(vn_y(m, t - 1)), -1.0);
        state.emplace_back(model.var(vn_en(m, t - 1)), 1.0);
      }
      model.add_constraint("app_state", "app_state_" + idx2(m, t), state, Sense::Equal,
                           0.0);
      model.add_constraint("app_end_active", "app_end_active_" + idx2(m, t),
                           {{model.var(vn_en(m, t)), 1.0}, {model.var(vn_y(m, t)), -1.0}},
                           Sense::LessEq, 0.0);
      model.add_constraint("app_rate_gate", "app_rate_gate_" + idx2(m, t),
                           {{model.var(vn_rate(m, t)), 1.0},
                            {model.var(vn_y(m, t)), -max_rate}},
                           Sense::LessEq, 0.0);
      model.add_constraint("app_makespan", "app_makespan_" + idx2(m, t),
                           {{c_total, 1.0}, {model.var(vn_en(m, t)), -t * dt}},
                           Sense::GreaterEq, 0.0);
    }
    model.add_constraint("app_vol", "app_vol_" + std::to_string(m), vol, Sense::GreaterEq,
                         task.volume_gb);
    model.add_constraint("app_start_once", "app_start_once_" + std::to_string(m),
                         start_once, Sense::Equal, 1.0);
    model.add_constraint("app_end_once", "app_end_once_" + std::to_string(m), end_once,
                         Sense::Equal, 1.0);
  }

  for (const auto& pair : ctx.directed) {
    const auto& members = ctx.tasks_by_pair.at(pair);
    for (int t = 1; t <= T; ++t) {
      std::vector<std::pair<int, double>> terms;
      for (TaskId m : members) terms.emplace_back(model.var(vn_rate(m, t)), 1.0);
      terms.emplace_back(model.var(vn_x(pair.first, pair.second)), -rate_cap);
      model.add_constraint("app_link_cap",
                           "app_link_cap_" + idx2(pair.first, pair.second) + "_" +
                               std::to_string(t),
                           terms, Sense::LessEq, 0.0);
    }
  }

  auto add_nic = [&](const std::map<GpuId, std::vector<TaskId>>& index,
                     const std::string& tag) {
    for (const auto& [gpu, ids] : index) {
      std::vector<TaskId> real;
      for (TaskId m : ids)
        if (!dag.tasks[m].is_virtual()) real.push_back(m);
      if (real.empty()) continue;
      for (int t = 1; t <= T; ++t) {
        std::vector<std::pair<int, double>> terms;
        for (TaskId m : real)
          terms.emplace_back(model.var(vn_rate(m, t)), 1.0 / dag.tasks[m].flows);
        model.add_constraint(tag, tag + "_" + idx2(gpu, t), terms, Sense::LessEq,
                             rate_cap);
      }
    }
  };
  add_nic(dag.src_index(), "app_nic_src");
  add_nic(dag.dst_index(), "app_nic_dst");

  for (size_t d = 0; d < dag.deps.size(); ++d) {
    const auto& dep = dag.deps[d];
    int slices = std::max(1, static_cast<int>(std::ceil(dep.gap_ms / dt - 1e-12)));
    if (dag.tasks[dep.pre].is_virtual()) {
      // The virtual source ends at t=0; its successors wait out the gap.
      int first = static_cast<int>(std::ceil(dep.gap_ms / dt - 1e-12)) + 1;
      if (dep.gap_ms <= 0) first = 1;
      std::vector<std::pair<int, double>> terms;
      for (int t = 1; t <= T; ++t)
        terms.emplace_back(model.var(vn_st(dep.succ, t)), static_cast<double>(t));
      model.add_constraint("app_dep", "app_dep_" + std::to_string(d), terms,
                           Sense::GreaterEq, first);
      continue;
    }
    std::vector<std::pair<int, double>> terms;
    for (int t = 1; t <= T; ++t) {
      terms.emplace_back(model.var(vn_st(dep.succ, t)), static_cast<double>(t));
      terms.emplace_back(model.var(vn_en(dep.pre, t)), -static_cast<double>(t));
    }
    model.add_constraint("app_dep", "app_dep_" + std::to_string(d), terms,
                         Sense::GreaterEq, slices);
  }

  if (opts.mode == MilpMode::Topology) {
    for (const auto& pair : ctx.directed) {
      const auto& members = ctx.tasks_by_pair.at(pair);
      for (int t = 1; t <= T; ++t) {
        int u = model.add_variable(vn_u(pair.first, pair.second, t), VarKind::Continuous,
                                   0, rate_cap);
        for (TaskId m : members) {
          std::string suffix = idx2(pair.first, pair.second) + "_" + idx2(m, t);
          model.add_constraint("app_fair_hi", "app_fair_hi_" + suffix,
                               {{model.var(vn_rate(m, t)), 1.0 / dag.tasks[m].flows},
                                {u, -1.0},
                                {model.var(vn_y(m, t)), rate_cap}},
                               Sense::LessEq, rate_cap);
          model.add_constraint("app_fair_lo", "app_fair_lo_" + suffix,
                               {{u, 1.0},
                                {model.var(vn_rate(m, t)), -1.0 / dag.tasks[m].flows},
                                {model.var(vn_y(m, t)), rate_cap}},
                               Sense::LessEq, rate_cap);
        }
      }
    }
  }

  model.objective = {{c_total, 1.0}};
  return model;
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void append_terms(std::ostringstream& os, const MilpModel& model,
                  const std::vector<std::pair<int, double>>& terms) {
  int line_len = 0;
  for (auto [idx, coeff] : terms) {
    std::string piece = (coeff < 0 ? " - " : " + ") + format_number(std::abs(coeff)) +
                        " " + model.variables[idx].name;
    os << piece;
    line_len += static_cast<int>(piece.size());
    if (line_len > 200) {
      os << "\n   ";
      line_len = 0;
    }
  }
}

}  // namespace

std::string emit_lp(const MilpModel& model) {
  std::set<std::string> names;
  for (const auto& c : model.constraints)
    if (!names.insert(c.name).second)
      throw ConfigError("duplicate constraint name: " + c.name);

  std::ostringstream os;
  os << "\\ " << model.variables.size() << " variables, " << model.constraints.size()
     << " constraints\n";
  os << "Minimize\n " << model.objective_name << ":";
  append_terms(os, model, model.objective);
  os << "\nSubject To\n";
  for (const auto& c : model.constraints) {
    os << " " << c.name << ":";
    append_terms(os, model, c.terms);
    switch (c.sense) {
      case Sense::LessEq: os << " <= "; break;
      case Sense::GreaterEq: os << " >= "; break;
      case Sense::Equal: os << " = "; break;
    }
    os << format_number(c.rhs) << "\n";
  }
  os << "Bounds\n";
  for (const auto& v : model.variables) {
    if (v.lower == v.upper)
      os << " " << v.name << " = " << format_number(v.lower) << "\n";
    else
      os << " " << format_number(v.lower) << " <= " << v.name << " <= "
         << format_number(v.upper) << "\n";
  }
  bool any_general = false;
  for (const auto& v : model.variables) any_general |= v.kind == VarKind::Integer;
  if (any_general) {
    os << "Generals\n";
    for (const auto& v : model.variables)
      if (v.kind == VarKind::Integer) os << " " << v.name << "\n";
  }
  bool any_binary = false;
  for (const auto& v : model.variables) any_binary |= v.kind == VarKind::Binary;
  if (any_binary) {
    os << "Binaries\n";
    for (const auto& v : model.variables)
      if (v.kind == VarKind::Binary) os << " " << v.name << "\n";
  }
  os << "End\n";
  return os.str();
}

double Solution::value(const std::string& name, double fallback) const {
  auto it = values.find(name);
  return it == values.end() ? fallback : it->second;
}

std::vector<double> Solution::assignment_vector(const MilpModel& model) const {
  std::vector<double> out(model.variables.size(), 0.0);
  for (size_t i = 0; i < model.variables.size(); ++i)
    out[i] = value(model.variables[i].name, model.variables[i].lower);
  return out;
}

std::map<std::string, double> hot_start_from_trace(const SimTrace& trace,
                                                   const LogicalTopology& topo,
                                                   const MilpModel& model,
                                                   const ReducedDag& dag) {
  const int K = model.num_intervals;
  const int trace_intervals = trace.num_intervals();
  if (trace_intervals > K)
    throw ConfigError("model has fewer intervals than the trace requires");

  std::map<std::string, double> a;
  double horizon_end = trace.events.back();
  for (int k = 1; k <= K + 1; ++k) {
    double t = (k - 1 < static_cast<int>(trace.events.size())) ? trace.events[k - 1]
                                                               : horizon_end;
    a[vn_t(k)] = t;
  }
  for (int k = 1; k <= K; ++k) a[vn_dlt(k)] = a[vn_t(k + 1)] - a[vn_t(k)];

  TaskAnchors anchors = derive_anchors(trace);
  for (const auto& task : dag.tasks) {
    TaskId m = task.id;
    a[vn_start(m)] = trace.start[m];
    a[vn_end(m)] = trace.completion[m];
    if (task.is_virtual()) continue;
    for (int k = 1; k <= K; ++k) {
      bool active = k >= anchors.start_interval[m] && k <= anchors.end_interval[m];
      double w = (k <= trace_intervals) ? trace.interval_volumes[m][k - 1] : 0.0;
      a[vn_w(m, k)] = w;
      a[vn_y(m, k)] = active ? 1.0 : 0.0;
      a[vn_sf(m, k)] = (k == anchors.start_interval[m]) ? 1.0 : 0.0;
      if (model.has_var(vn_y(m, k)) && active &&
          model.variables[model.var(vn_y(m, k))].upper < 0.5)
        throw InfeasibleError("trace activity at task " + std::to_string(m) +
                              " interval " + std::to_string(k) +
                              " is pruned away; widen the anchors");
    }
  }
  a["C"] = trace.makespan_ms;

  for (PodId i = 0; i < topo.num_pods(); ++i) {
    for (PodId j = 0; j < topo.num_pods(); ++j) {
      if (i == j) continue;
      if (!model.has_var(vn_x(i, j))) continue;
      a[vn_x(i, j)] = topo.at(i, j);
      if (i < j) {
        int bits_used = 0;
        while (model.has_var(vn_beta(i, j, bits_used))) ++bits_used;
        int x = topo.at(i, j);
        if (x >= (1 << bits_used))
          throw InfeasibleError("topology exceeds the model's binary expansion range");
        for (int b = 0; b < bits_used; ++b) {
          int bit = (x >> b) & 1;
          a[vn_beta(i, j, b)] = bit;
          for (int k = 1; k <= K; ++k) a[vn_rho(i, j, b, k)] = bit ? a[vn_dlt(k)] : 0.0;
        }
      }
    }
  }

  for (const auto& v : model.variables)
    if (!a.count(v.name)) a[v.name] = v.lower;
  return a;
}

MilpModel with_port_minimization(const MilpModel& model, double c_star) {
  MilpModel out = model;
  out.objective.clear();
  for (size_t i = 0; i < out.variables.size(); ++i) {
    const std::string& name = out.variables[i].name;
    if (name.size() > 2 && name[0] == 'x' && name[1] == '_')
      out.objective.emplace_back(static_cast<int>(i), 1.0);
  }
  if (out.objective.empty()) throw ConfigError("model has no circuit variables");
  out.add_constraint("makespan_cap", "makespan_cap",
                     {{out.var("C"), 1.0}}, Sense::LessEq, c_star);
  return out;
}

LogicalTopology extract_topology(const Solution& sol, const ReducedDag& dag) {
  LogicalTopology topo = LogicalTopology::zero(dag.port_caps);
  for (PodId i = 0; i < dag.num_pods; ++i) {
    for (PodId j = i + 1; j < dag.num_pods; ++j) {
      auto it = sol.values.find(vn_x(i, j));
      if (it == sol.values.end()) continue;
      double v = it->second;
      double rounded = std::round(v);
      if (std::abs(v - rounded) > 1e-6)
        throw InfeasibleError("circuit variable " + vn_x(i, j) +
                              " is not integral within tolerance: " + std::to_string(v));
      if (rounded < 0) rounded = 0;
      topo.set_symmetric(i, j, static_cast<int>(rounded));
    }
  }
  topo.validate();
  return topo;
}

}  // namespace delta
