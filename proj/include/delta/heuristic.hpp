#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "delta/dag.hpp"
#include "delta/pruning.hpp"
#include "delta/types.hpp"

namespace delta {

struct GaParams {
  int population = 64;
  int generations = 500;
  int elite = 2;
  int tournament = 4;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;   // per edge
  int stagnation_window = 200;  // generations without improvement before stopping
  std::uint64_t seed = 1;
  int workers = 4;              // parallel fitness evaluations
  bool seed_baselines = true;   // start from the three traffic-matrix baselines

  void validate() const;
};

/// Candidate topology over the active pod pairs, with lexicographic
/// (makespan, total ports) fitness.
struct Individual {
  std::vector<int> capacities;  // per edge in E order
  TimeMs makespan_ms = 0.0;
  int total_ports = 0;

  bool better_than(const Individual& other) const {
    if (makespan_ms != other.makespan_ms) return makespan_ms < other.makespan_ms;
    return total_ports < other.total_ports;
  }
};

using Rng = std::mt19937_64;

/// Edge-sequential sampling with port reservation for the pairs still to
/// come; resamples when the connectivity escape hatch overshoots a port
/// budget. Throws InfeasibleError when even one circuit per pair cannot fit.
Individual feasible_random_init(const std::vector<std::pair<PodId, PodId>>& edges,
                                const std::vector<int>& port_caps,
                                const CircuitUpperBounds& caps, Rng& rng);

/// Clamps capacities into [1, cap] then randomly sheds circuits at
/// overloaded pods. success=false when a pod stays overloaded with every
/// incident edge already at one circuit.
std::pair<Individual, bool> repair_topo(Individual child,
                                        const std::vector<std::pair<PodId, PodId>>& edges,
                                        const std::vector<int>& port_caps,
                                        const CircuitUpperBounds& caps, Rng& rng);

/// Uniform per-edge crossover followed by +/-1 mutation (clamped at 1).
Individual crossover_mutate(const Individual& p1, const Individual& p2,
                            const GaParams& params, Rng& rng);

struct GaResult {
  LogicalTopology topology;
  Individual best;
  // One row per generation: best-so-far makespan and ports.
  std::vector<std::tuple<int, TimeMs, int>> convergence;
  int generations_run = 0;
};

/// The DES-accelerated domain-adapted genetic algorithm: tournament
/// selection, uniform crossover, repair against port budgets and circuit
/// caps, DES-evaluated lexicographic fitness. Deterministic per seed
/// regardless of worker count.
GaResult run_ga(const ReducedDag& dag, const std::vector<std::pair<PodId, PodId>>& edges,
                const std::vector<int>& port_caps, const CircuitUpperBounds& caps,
                const GaParams& params);

/// Convenience entry: edges and port budgets come from the DAG; circuit
/// caps come from the MWIS bound at twice the full-port baseline makespan,
/// widened to cover the seeded baseline topologies.
GaResult run_ga(const ReducedDag& dag, const GaParams& params);

LogicalTopology individual_to_topology(const Individual& ind,
                                       const std::vector<std::pair<PodId, PodId>>& edges,
                                       const std::vector<int>& port_caps);

/// Greedy simulation-verified port shedding: walks the pairs in a fixed
/// order and removes one circuit at a time whenever the re-simulated
/// makespan stays put (within 1e-9 relative). The returned topology keeps
/// the input's makespan exactly while exploiting slack on non-critical
/// pairs.
LogicalTopology shed_idle_ports(const ReducedDag& dag, LogicalTopology topo);

}  // namespace delta
