#include "delta/heuristic.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "delta/baselines.hpp"
#include "delta/des.hpp"

namespace delta {

void GaParams::validate() const {
  if (population < 2) throw ConfigError("GA population must be >= 2");
  if (generations < 0) throw ConfigError("GA generations must be >= 0");
  if (elite < 0 || elite >= population) throw ConfigError("GA elite count out of range");
  if (tournament < 1 || tournament > population)
    throw ConfigError("GA tournament size out of range");
  if (crossover_rate < 0 || crossover_rate > 1 || mutation_rate < 0 || mutation_rate > 1)
    throw ConfigError("GA rates must be within [0, 1]");
  if (workers < 1) throw ConfigError("GA workers must be >= 1");
}

LogicalTopology individual_to_topology(const Individual& ind,
                                       const std::vector<std::pair<PodId, PodId>>& edges,
                                       const std::vector<int>& port_caps) {
  LogicalTopology topo = LogicalTopology::zero(port_caps);
  for (size_t e = 0; e < edges.size(); ++e)
    topo.set_symmetric(edges[e].first, edges[e].second, ind.capacities[e]);
  return topo;
}

namespace {

std::vector<int> port_usage(const Individual& ind,
                            const std::vector<std::pair<PodId, PodId>>& edges, int pods) {
  std::vector<int> used(pods, 0);
  for (size_t e = 0; e < edges.size(); ++e) {
    used[edges[e].first] += ind.capacities[e];
    used[edges[e].second] += ind.capacities[e];
  }
  return used;
}

Individual sample_once(const std::vector<std::pair<PodId, PodId>>& edges,
                       const std::vector<int>& port_caps, const CircuitUpperBounds& caps,
                       Rng& rng) {
  const int pods = static_cast<int>(port_caps.size());
  std::vector<int> used(pods, 0);
  std::vector<int> degree(pods, 0);
  for (const auto& [u, v] : edges) {
    ++degree[u];
    ++degree[v];
  }
  Individual ind;
  ind.capacities.resize(edges.size());
  for (size_t e = 0; e < edges.size(); ++e) {
    auto [u, v] = edges[e];
    --degree[u];
    --degree[v];
    // Reserve one port per endpoint for every pair still to come.
    int room_u = port_caps[u] - used[u] - degree[u];
    int room_v = port_caps[v] - used[v] - degree[v];
    int limit = std::min({room_u, room_v, caps.at(u, v)});
    limit = std::max(1, limit);
    std::uniform_int_distribution<int> dist(1, limit);
    ind.capacities[e] = dist(rng);
    used[u] += ind.capacities[e];
    used[v] += ind.capacities[e];
  }
  return ind;
}

}  // namespace

Individual feasible_random_init(const std::vector<std::pair<PodId, PodId>>& edges,
                                const std::vector<int>& port_caps,
                                const CircuitUpperBounds& caps, Rng& rng) {
  const int pods = static_cast<int>(port_caps.size());
  std::vector<int> degree(pods, 0);
  for (const auto& [u, v] : edges) {
    ++degree[u];
    ++degree[v];
  }
  for (int p = 0; p < pods; ++p)
    if (degree[p] > port_caps[p])
      throw InfeasibleError("pod " + std::to_string(p) +
                            " cannot host one circuit per incident pair");

  // The connectivity escape hatch can overshoot only in pathological
  // degree patterns; validate and resample instead of trusting it.
  for (int attempt = 0; attempt < 128; ++attempt) {
    Individual ind = sample_once(edges, port_caps, caps, rng);
    auto used = port_usage(ind, edges, pods);
    bool ok = true;
    for (int p = 0; p < pods; ++p)
      if (used[p] > port_caps[p]) ok = false;
    if (ok) return ind;
  }
  throw InfeasibleError("feasible initialization kept overshooting port budgets");
}

std::pair<Individual, bool> repair_topo(Individual child,
                                        const std::vector<std::pair<PodId, PodId>>& edges,
                                        const std::vector<int>& port_caps,
                                        const CircuitUpperBounds& caps, Rng& rng) {
  const int pods = static_cast<int>(port_caps.size());
  for (size_t e = 0; e < edges.size(); ++e) {
    auto [u, v] = edges[e];
    child.capacities[e] = std::max(1, std::min(child.capacities[e], caps.at(u, v)));
  }

  auto used = port_usage(child, edges, pods);
  while (true) {
    std::vector<int> overloaded;
    for (int p = 0; p < pods; ++p)
      if (used[p] > port_caps[p]) overloaded.push_back(p);
    if (overloaded.empty()) return {child, true};

    std::uniform_int_distribution<size_t> pod_pick(0, overloaded.size() - 1);
    int p = overloaded[pod_pick(rng)];
    std::vector<size_t> reducible;
    for (size_t e = 0; e < edges.size(); ++e)
      if ((edges[e].first == p || edges[e].second == p) && child.capacities[e] > 1)
        reducible.push_back(e);
    if (reducible.empty()) return {child, false};

    std::uniform_int_distribution<size_t> edge_pick(0, reducible.size() - 1);
    size_t e = reducible[edge_pick(rng)];
    --child.capacities[e];
    --used[edges[e].first];
    --used[edges[e].second];
  }
}

Individual crossover_mutate(const Individual& p1, const Individual& p2,
                            const GaParams& params, Rng& rng) {
  Individual child;
  child.capacities.resize(p1.capacities.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool cross = unit(rng) < params.crossover_rate;
  for (size_t e = 0; e < p1.capacities.size(); ++e) {
    if (cross) {
      std::uniform_int_distribution<int> coin(0, 1);
      child.capacities[e] = coin(rng) ? p1.capacities[e] : p2.capacities[e];
    } else {
      child.capacities[e] = p1.capacities[e];
    }
  }
  for (size_t e = 0; e < child.capacities.size(); ++e) {
    if (unit(rng) < params.mutation_rate) {
      std::uniform_int_distribution<int> coin(0, 1);
      child.capacities[e] = std::max(1, child.capacities[e] + (coin(rng) ? 1 : -1));
    }
  }
  return child;
}

namespace {

void evaluate_population(std::vector<Individual>& pop, const ReducedDag& dag,
                         const std::vector<std::pair<PodId, PodId>>& edges,
                         const std::vector<int>& port_caps, int workers) {
  auto evaluate_one = [&](Individual& ind) {
    LogicalTopology topo = individual_to_topology(ind, edges, port_caps);
    SimTrace trace = simulate(topo, dag, dag.bandwidth_gbps);
    ind.makespan_ms = trace.makespan_ms;
    ind.total_ports = topo.total_ports();
  };
  int threads = std::min<int>(workers, static_cast<int>(pop.size()));
  if (threads <= 1) {
    for (auto& ind : pop) evaluate_one(ind);
    return;
  }
  // Fixed partition by index: identical results for any worker count.
  std::vector<std::thread> crew;
  crew.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    crew.emplace_back([&, w]() {
      for (size_t i = w; i < pop.size(); i += threads) evaluate_one(pop[i]);
    });
  }
  for (auto& t : crew) t.join();
}

}  // namespace

GaResult run_ga(const ReducedDag& dag, const std::vector<std::pair<PodId, PodId>>& edges,
                const std::vector<int>& port_caps, const CircuitUpperBounds& caps,
                const GaParams& params) {
  params.validate();
  if (edges.empty()) throw ConfigError("GA needs at least one active pod pair");
  Rng rng(params.seed);

  std::vector<Individual> pop;
  pop.reserve(params.population);
  if (params.seed_baselines) {
    TrafficMatrix tm = TrafficMatrix::from_dag(dag);
    for (auto* alloc : {&prop_alloc, &sqrt_alloc, &iter_halve}) {
      if (static_cast<int>(pop.size()) >= params.population) break;
      try {
        LogicalTopology topo = (*alloc)(tm, port_caps);
        Individual ind;
        ind.capacities.resize(edges.size());
        for (size_t e = 0; e < edges.size(); ++e)
          ind.capacities[e] = topo.at(edges[e].first, edges[e].second);
        auto [repaired, ok] = repair_topo(std::move(ind), edges, port_caps, caps, rng);
        if (ok) pop.push_back(std::move(repaired));
      } catch (const InfeasibleError&) {
        // Baseline cannot fit this port budget; skip the seed.
      }
    }
  }
  while (static_cast<int>(pop.size()) < params.population)
    pop.push_back(feasible_random_init(edges, port_caps, caps, rng));

  evaluate_population(pop, dag, edges, port_caps, params.workers);

  auto best_of = [](const std::vector<Individual>& xs) {
    size_t best = 0;
    for (size_t i = 1; i < xs.size(); ++i)
      if (xs[i].better_than(xs[best])) best = i;
    return xs[best];
  };

  GaResult result;
  result.best = best_of(pop);
  result.convergence.emplace_back(0, result.best.makespan_ms, result.best.total_ports);

  int since_improvement = 0;
  for (int gen = 1; gen <= params.generations; ++gen) {
    // Elites survive unchanged.
    std::vector<size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return pop[a].better_than(pop[b]); });
    std::vector<Individual> next;
    next.reserve(params.population);
    for (int e = 0; e < params.elite; ++e) next.push_back(pop[order[e]]);

    auto tournament = [&]() -> const Individual& {
      std::uniform_int_distribution<size_t> pick(0, pop.size() - 1);
      size_t best = pick(rng);
      for (int round = 1; round < params.tournament; ++round) {
        size_t c = pick(rng);
        if (pop[c].better_than(pop[best])) best = c;
      }
      return pop[best];
    };

    while (static_cast<int>(next.size()) < params.population) {
      Individual child = crossover_mutate(tournament(), tournament(), params, rng);
      auto [repaired, ok] = repair_topo(std::move(child), edges, port_caps, caps, rng);
      if (!ok) repaired = feasible_random_init(edges, port_caps, caps, rng);
      next.push_back(std::move(repaired));
    }
    pop = std::move(next);
    evaluate_population(pop, dag, edges, port_caps, params.workers);

    Individual gen_best = best_of(pop);
    if (gen_best.better_than(result.best)) {
      result.best = gen_best;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    result.convergence.emplace_back(gen, result.best.makespan_ms, result.best.total_ports);
    result.generations_run = gen;
    if (params.stagnation_window > 0 && since_improvement >= params.stagnation_window) break;
  }

  result.topology = individual_to_topology(result.best, edges, port_caps);
  result.topology.validate();
  return result;
}

LogicalTopology shed_idle_ports(const ReducedDag& dag, LogicalTopology topo) {
  double reference = simulate(topo, dag, dag.bandwidth_gbps).makespan_ms;
  double tol = 1e-9 * std::max(1.0, reference);
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (auto [i, j] : dag.active_pairs()) {
      while (topo.at(i, j) > 1) {
        topo.set_symmetric(i, j, topo.at(i, j) - 1);
        double makespan = simulate(topo, dag, dag.bandwidth_gbps).makespan_ms;
        if (makespan > reference + tol) {
          topo.set_symmetric(i, j, topo.at(i, j) + 1);
          break;
        }
        progressed = true;
      }
    }
  }
  return topo;
}

GaResult run_ga(const ReducedDag& dag, const GaParams& params) {
  auto edges = dag.active_pairs();
  LogicalTopology full = LogicalTopology::full_port(dag.port_caps, edges);
  SimTrace baseline = simulate(full, dag, dag.bandwidth_gbps);
  CircuitUpperBounds caps = x_upper_bound(dag, dag.bandwidth_gbps, 2 * baseline.makespan_ms);

  if (params.seed_baselines) {
    // Widen caps over the seeds so repairing them is a no-op and the GA
    // result can never trail a seeded baseline.
    TrafficMatrix tm = TrafficMatrix::from_dag(dag);
    for (auto* alloc : {&prop_alloc, &sqrt_alloc, &iter_halve}) {
      try {
        LogicalTopology topo = (*alloc)(tm, dag.port_caps);
        for (auto [u, v] : edges) {
          int x = topo.at(u, v);
          if (x > caps.cap[u][v]) {
            caps.cap[u][v] = x;
            caps.cap[v][u] = x;
          }
        }
      } catch (const InfeasibleError&) {
      }
    }
  }
  return run_ga(dag, edges, dag.port_caps, caps, params);
}

}  // namespace delta
