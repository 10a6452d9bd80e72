#include "doctest.h"

#include <random>

#include "delta/baselines.hpp"
#include "oracles.hpp"

using namespace delta;
using namespace delta::testing;

namespace {

TrafficMatrix matrix3(double ab, double ac, double bc = 0.0) {
  TrafficMatrix tm;
  tm.volume_gb = {{0, ab, ac}, {0, 0, bc}, {0, 0, 0}};
  return tm;
}

}  // namespace

TEST_CASE("proportional allocation") {
  SUBCASE("largest remainder split") {
    LogicalTopology topo = prop_alloc(matrix3(300, 100), {4, 4, 4});
    CHECK(topo.at(0, 1) == 3);
    CHECK(topo.at(0, 2) == 1);
  }

  SUBCASE("single pair receives everything usable") {
    LogicalTopology topo = prop_alloc(matrix3(100, 0), {4, 4, 4});
    CHECK(topo.at(0, 1) == 4);
    CHECK(topo.at(0, 2) == 0);
  }

  SUBCASE("equal volumes split evenly") {
    LogicalTopology topo = prop_alloc(matrix3(100, 100), {4, 8, 8});
    CHECK(topo.at(0, 1) == 2);
    CHECK(topo.at(0, 2) == 2);
  }

  SUBCASE("too many active pairs for the budget") {
    TrafficMatrix tm;
    tm.volume_gb = {{0, 1, 1, 1}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
    CHECK_THROWS_AS(prop_alloc(tm, {2, 4, 4, 4}), InfeasibleError);
  }
}

TEST_CASE("square-root allocation") {
  SUBCASE("square-root ratio") {
    LogicalTopology topo = sqrt_alloc(matrix3(9, 1), {4, 4, 4});
    CHECK(topo.at(0, 1) == 3);
    CHECK(topo.at(0, 2) == 1);
  }

  SUBCASE("equal volumes split evenly") {
    LogicalTopology topo = sqrt_alloc(matrix3(64, 64), {4, 4, 4});
    CHECK(topo.at(0, 1) == 2);
    CHECK(topo.at(0, 2) == 2);
  }

  SUBCASE("inactive pair receives nothing") {
    LogicalTopology topo = sqrt_alloc(matrix3(100, 0), {4, 4, 4});
    CHECK(topo.at(0, 2) == 0);
    CHECK(topo.at(0, 1) == 4);
  }
}

TEST_CASE("iterative halving") {
  SUBCASE("hand-traced grants with lexicographic ties") {
    // AB:8 -> grant AB (weight 4); tie 4 vs 4 -> AB again (weight 2);
    // then AC; pod 0 is now out of ports.
    LogicalTopology topo = iter_halve(matrix3(8, 4), {3, 8, 8});
    CHECK(topo.at(0, 1) == 2);
    CHECK(topo.at(0, 2) == 1);
  }

  SUBCASE("single pair exhausts its ports") {
    LogicalTopology topo = iter_halve(matrix3(7, 0), {5, 5, 5});
    CHECK(topo.at(0, 1) == 5);
  }

  SUBCASE("zero matrix allocates nothing") {
    LogicalTopology topo = iter_halve(matrix3(0, 0), {4, 4, 4});
    CHECK(topo.total_ports() == 0);
  }
}

TEST_CASE("baseline outputs satisfy topology invariants") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 10; ++i) {
    ReducedDag dag = random_lane_dag(rng);
    TrafficMatrix tm = TrafficMatrix::from_dag(dag);
    for (auto* alloc : {&prop_alloc, &sqrt_alloc, &iter_halve}) {
      LogicalTopology topo = (*alloc)(tm, dag.port_caps);
      topo.validate();  // symmetry, caps, diagonal
      // No stranded headroom: every pod with leftover ports faces only
      // pairs whose other endpoint is exhausted.
      for (PodId p = 0; p < dag.num_pods; ++p) {
        int headroom = dag.port_caps[p] - topo.allocated_ports(p);
        if (headroom <= 0) continue;
        for (auto [a, b2] : dag.active_pairs()) {
          if (a != p && b2 != p) continue;
          PodId other = (a == p) ? b2 : a;
          CHECK(topo.allocated_ports(other) >= dag.port_caps[other]);
        }
      }
    }
  }
}

TEST_CASE("volume scaling leaves apportionment unchanged") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 5; ++i) {
    ReducedDag dag = random_lane_dag(rng);
    TrafficMatrix tm = TrafficMatrix::from_dag(dag);
    TrafficMatrix scaled = tm;
    for (auto& row : scaled.volume_gb)
      for (auto& v : row) v *= 7.25;
    CHECK(prop_alloc(tm, dag.port_caps).circuits ==
          prop_alloc(scaled, dag.port_caps).circuits);
    CHECK(sqrt_alloc(tm, dag.port_caps).circuits ==
          sqrt_alloc(scaled, dag.port_caps).circuits);
  }
}

TEST_CASE("traffic matrix aggregates per ordered pod pair") {
  DagBuilder b(3);
  b.task(0, 1, 1, 10.0);
  b.task(0, 1, 1, 15.0);
  b.task(1, 0, 1, 5.0);
  b.task(2, 1, 1, 8.0);
  ReducedDag dag = b.build();
  TrafficMatrix tm = TrafficMatrix::from_dag(dag);
  CHECK(tm.volume_gb[0][1] == doctest::Approx(25.0));
  CHECK(tm.volume_gb[1][0] == doctest::Approx(5.0));
  CHECK(tm.volume_gb[2][1] == doctest::Approx(8.0));
  CHECK(tm.pair_weight(0, 1) == doctest::Approx(30.0));
}
