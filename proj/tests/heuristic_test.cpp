#include "doctest.h"

#include <functional>
#include <random>
#include <set>

#include "delta/des.hpp"
#include "delta/baselines.hpp"
#include "delta/heuristic.hpp"
#include "oracles.hpp"

using namespace delta;
using namespace delta::testing;

namespace {

CircuitUpperBounds uniform_caps(int pods, int cap) {
  CircuitUpperBounds caps;
  caps.cap.assign(pods, std::vector<int>(pods, cap));
  return caps;
}

std::vector<int> usage(const Individual& ind,
                       const std::vector<std::pair<PodId, PodId>>& edges, int pods) {
  std::vector<int> used(pods, 0);
  for (size_t e = 0; e < edges.size(); ++e) {
    used[edges[e].first] += ind.capacities[e];
    used[edges[e].second] += ind.capacities[e];
  }
  return used;
}

}  // namespace

TEST_CASE("feasible random initialization") {
  std::mt19937_64 rng(43);

  SUBCASE("single pair samples within its cap chain") {
    std::vector<std::pair<PodId, PodId>> edges{{0, 1}};
    std::set<int> seen;
    for (int i = 0; i < 200; ++i) {
      Individual ind = feasible_random_init(edges, {4, 4}, uniform_caps(2, 3), rng);
      REQUIRE(ind.capacities.size() == 1);
      CHECK(ind.capacities[0] >= 1);
      CHECK(ind.capacities[0] <= 3);
      seen.insert(ind.capacities[0]);
    }
    CHECK(seen == std::set<int>{1, 2, 3});
  }

  SUBCASE("star pod reservation forces one circuit each") {
    std::vector<std::pair<PodId, PodId>> edges{{0, 1}, {0, 2}, {0, 3}};
    for (int i = 0; i < 50; ++i) {
      Individual ind = feasible_random_init(edges, {3, 4, 4, 4}, uniform_caps(4, 5), rng);
      CHECK(ind.capacities == std::vector<int>{1, 1, 1});
    }
  }

  SUBCASE("mass sampling never violates the invariants") {
    std::vector<std::pair<PodId, PodId>> edges{{0, 1}, {0, 2}, {1, 2}, {2, 3}, {1, 3}};
    std::vector<int> port_caps{5, 6, 7, 4};
    CircuitUpperBounds caps = uniform_caps(4, 4);
    for (int i = 0; i < 10000; ++i) {
      Individual ind = feasible_random_init(edges, port_caps, caps, rng);
      auto used = usage(ind, edges, 4);
      for (int p = 0; p < 4; ++p) CHECK(used[p] <= port_caps[p]);
      for (size_t e = 0; e < edges.size(); ++e) {
        CHECK(ind.capacities[e] >= 1);
        CHECK(ind.capacities[e] <= caps.at(edges[e].first, edges[e].second));
      }
    }
  }

  SUBCASE("degree beyond the port budget is infeasible") {
    std::vector<std::pair<PodId, PodId>> edges{{0, 1}, {0, 2}, {0, 3}};
    CHECK_THROWS_AS(feasible_random_init(edges, {2, 4, 4, 4}, uniform_caps(4, 3), rng),
                    InfeasibleError);
  }
}

TEST_CASE("topology repair") {
  std::mt19937_64 rng(47);

  SUBCASE("clamps into the cap range") {
    std::vector<std::pair<PodId, PodId>> edges{{0, 1}};
    Individual child;
    child.capacities = {9};
    auto [fixed, ok] = repair_topo(child, edges, {16, 16}, uniform_caps(2, 3), rng);
    CHECK(ok);
    CHECK(fixed.capacities[0] == 3);
  }

  SUBCASE("sheds circuits at an overloaded pod") {
    std::vector<std::pair<PodId, PodId>> edges{{0, 1}, {0, 2}};
    Individual child;
    child.capacities = {2, 2};
    auto [fixed, ok] = repair_topo(child, edges, {2, 4, 4}, uniform_caps(3, 4), rng);
    CHECK(ok);
    CHECK(fixed.capacities[0] + fixed.capacities[1] <= 2);
    CHECK(fixed.capacities[0] >= 1);
    CHECK(fixed.capacities[1] >= 1);
  }

  SUBCASE("reports failure when nothing is reducible") {
    std::vector<std::pair<PodId, PodId>> edges{{0, 1}, {0, 2}};
    Individual child;
    child.capacities = {1, 1};
    auto [fixed, ok] = repair_topo(child, edges, {1, 4, 4}, uniform_caps(3, 4), rng);
    CHECK_FALSE(ok);
  }
}

TEST_CASE("crossover and mutation") {
  std::mt19937_64 rng(53);
  GaParams params;

  SUBCASE("identical parents with zero mutation reproduce exactly") {
    params.mutation_rate = 0.0;
    Individual p;
    p.capacities = {2, 3, 1};
    for (int i = 0; i < 20; ++i)
      CHECK(crossover_mutate(p, p, params, rng).capacities == p.capacities);
  }

  SUBCASE("guaranteed mutation moves a unit step, clamped at one") {
    params.mutation_rate = 1.0;
    params.crossover_rate = 0.0;
    Individual p;
    p.capacities = {1};
    for (int i = 0; i < 50; ++i) {
      int v = crossover_mutate(p, p, params, rng).capacities[0];
      CHECK(v >= 1);
      CHECK(v <= 2);
    }
  }

  SUBCASE("genes come from one of the parents") {
    params.mutation_rate = 0.0;
    Individual p1, p2;
    p1.capacities = {1, 5, 7};
    p2.capacities = {2, 6, 9};
    for (int i = 0; i < 1000; ++i) {
      Individual child = crossover_mutate(p1, p2, params, rng);
      for (size_t e = 0; e < child.capacities.size(); ++e) {
        bool from_parent = child.capacities[e] == p1.capacities[e] ||
                           child.capacities[e] == p2.capacities[e];
        CHECK(from_parent);
      }
    }
  }
}

TEST_CASE("genetic search") {
  SUBCASE("a one-point search space returns immediately") {
    DagBuilder b(2);
    b.task(0, 1, 1, 100.0);
    ReducedDag dag = b.build(1);  // port cap 1: only x=1 is feasible
    GaParams params;
    params.population = 4;
    params.generations = 2;
    params.tournament = 2;
    GaResult result = run_ga(dag, params);
    CHECK(result.best.capacities == std::vector<int>{1});
    CHECK(result.best.makespan_ms ==
          doctest::Approx(simulate(result.topology, dag, dag.bandwidth_gbps).makespan_ms));
  }

  SUBCASE("matches exhaustive enumeration on small spaces") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 3; ++trial) {
      ReducedDag dag = random_lane_dag(rng, 3, 3, 4);
      auto edges = dag.active_pairs();
      std::vector<int> port_caps(dag.num_pods, 6);
      CircuitUpperBounds caps = uniform_caps(dag.num_pods, 3);
      long long count = 0;
      Individual oracle = enumerate_best_topology(dag, edges, port_caps, caps, &count);
      REQUIRE(count >= 1);
      REQUIRE(count <= 200);

      GaParams params;
      params.population = 24;
      params.generations = 60;
      params.stagnation_window = 0;
      params.seed = 1000 + trial;
      params.seed_baselines = false;
      GaResult result = run_ga(dag, edges, port_caps, caps, params);
      CHECK(result.best.makespan_ms == doctest::Approx(oracle.makespan_ms));
    }
  }

  SUBCASE("identical seeds are deterministic across worker counts") {
    std::mt19937_64 rng(61);
    ReducedDag dag = random_lane_dag(rng, 3, 4, 5);
    GaParams params;
    params.population = 16;
    params.generations = 15;
    params.seed = 77;
    params.workers = 1;
    GaResult a = run_ga(dag, params);
    params.workers = 8;
    GaResult b = run_ga(dag, params);
    CHECK(a.best.capacities == b.best.capacities);
    CHECK(a.best.makespan_ms == b.best.makespan_ms);
    CHECK(a.convergence == b.convergence);
  }

  SUBCASE("best fitness never regresses across generations") {
    std::mt19937_64 rng(67);
    ReducedDag dag = random_lane_dag(rng, 4, 4, 6);
    GaParams params;
    params.population = 12;
    params.generations = 25;
    params.seed = 5;
    GaResult result = run_ga(dag, params);
    for (size_t i = 1; i < result.convergence.size(); ++i)
      CHECK(std::get<1>(result.convergence[i]) <=
            std::get<1>(result.convergence[i - 1]) * (1 + 1e-12));
  }

  SUBCASE("baseline seeding guarantees dominance over the baselines") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 3; ++trial) {
      ReducedDag dag = random_lane_dag(rng, 4, 4, 6);
      SimTrace ideal = simulate(LogicalTopology::zero(dag.port_caps), dag,
                                dag.bandwidth_gbps, {.ideal = true});
      GaParams params;
      params.population = 16;
      params.generations = 20;
      params.seed = trial;
      GaResult result = run_ga(dag, params);
      double ga_nct = nct(simulate(result.topology, dag, dag.bandwidth_gbps), ideal, dag);

      TrafficMatrix tm = TrafficMatrix::from_dag(dag);
      for (auto* alloc : {&prop_alloc, &sqrt_alloc, &iter_halve}) {
        LogicalTopology topo = (*alloc)(tm, dag.port_caps);
        double base_nct = nct(simulate(topo, dag, dag.bandwidth_gbps), ideal, dag);
        CHECK(ga_nct <= base_nct + 1e-9);
      }
    }
  }
}
