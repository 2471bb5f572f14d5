#include <doctest.h>

#include "../common/helpers.hpp"
#include "npmo/errors.hpp"
#include "npmo/pathfind.hpp"
#include "npmo/rng.hpp"

using namespace npmo;
using namespace npmo::testing;

TEST_CASE("directional sweep") {
  SUBCASE("to the boundary") {
    const Scenario s = grid_scenario(10, {{{4, 4}, {0, 0}}});
    const Path p = directional_sweep(start_state(s), 0, PrimitiveKind::up);
    REQUIRE(p.waypoints.size() == 5);
    CHECK(p.end() == Pose{4, 0});
    CHECK(p.length() == 4);
  }
  SUBCASE("stops next to an obstacle") {
    const Scenario s = grid_scenario(10, {{{4, 4}, {0, 0}}}, {Rect{4, 1, 1, 1}});
    CHECK(directional_sweep(start_state(s), 0, PrimitiveKind::up).end() == Pose{4, 2});
  }
  SUBCASE("against the right wall") {
    const Scenario s = grid_scenario(10, {{{9, 4}, {0, 0}}});
    const WorldState st = start_state(s);
    CHECK(directional_sweep(st, 0, PrimitiveKind::right).length() == 0);
    CHECK_FALSE(expand_primitive(st, {0, PrimitiveKind::right}).has_value());
  }
  SUBCASE("stops at another object") {
    const Scenario s = grid_scenario(10, {{{1, 5}, {0, 0}}, {{7, 5}, {9, 9}}});
    CHECK(directional_sweep(start_state(s), 0, PrimitiveKind::right).end() == Pose{6, 5});
  }
}

TEST_CASE("multi-cell footprints sweep and route with every cell checked") {
  Scenario s;
  s.grid = 6;
  s.objects = {ObjectSpec{0, 2, 1, true}};
  s.initial = {Pose{0, 0}};
  s.target = {Pose{4, 5}};
  s.immovable = {Rect{3, 1, 1, 1}};
  validate(s);
  const WorldState st = start_state(s);
  // the 2x1 object covering (0..1, y) sweeps down until row 5
  CHECK(directional_sweep(st, 0, PrimitiveKind::down).end() == Pose{0, 5});
  CHECK(directional_sweep(st, 0, PrimitiveKind::right).end() == Pose{4, 0});
  const auto path = astar_path(st, 0);
  REQUIRE(path.has_value());
  CHECK(path->length() == 9);
  CHECK(path_valid(*path, st.pose(0), blocked_cells(st, 0), 6, 2, 1));
}

TEST_CASE("astar path") {
  SUBCASE("empty grid gives the Manhattan distance") {
    const Scenario s = grid_scenario(10, {{{0, 0}, {0, 5}}});
    const auto p = astar_path(start_state(s), 0);
    REQUIRE(p.has_value());
    CHECK(p->length() == 5);
  }
  SUBCASE("walled-off target") {
    const Scenario s = grid_scenario(
        6, {{{0, 0}, {4, 4}}},
        {Rect{3, 3, 3, 1}, Rect{3, 4, 1, 2}, Rect{5, 4, 1, 2}, Rect{4, 5, 1, 1}});
    const WorldState st = start_state(s);
    CHECK_FALSE(astar_path(st, 0).has_value());
    const Occupancy occ(st);
    CHECK_FALSE(target_reachable(occ, st, 0));
  }
  SUBCASE("already at target") {
    const Scenario s = grid_scenario(4, {{{1, 1}, {1, 1}}});
    CHECK_FALSE(astar_path(start_state(s), 0).has_value());
  }
  SUBCASE("replans around an object on the straight route") {
    const Scenario s = grid_scenario(5, {{{0, 2}, {4, 2}}, {{2, 2}, {0, 0}}});
    const auto p = astar_path(start_state(s), 0);
    REQUIRE(p.has_value());
    CHECK(p->length() == 6);
  }
  SUBCASE("tie-breaking prefers up, then down, left, right") {
    // Two shortest routes around the blocker: over the top or underneath.
    const Scenario s = grid_scenario(5, {{{0, 2}, {4, 2}}, {{2, 2}, {0, 0}}});
    const auto p = astar_path(start_state(s), 0);
    REQUIRE(p.has_value());
    bool went_up = false;
    for (const Pose& w : p->waypoints) went_up = went_up || w.y < 2;
    CHECK(went_up);
    CHECK(*astar_path(start_state(s), 0) == *p);
  }
}

TEST_CASE("astar matches a breadth-first oracle on random grids") {
  Rng rng(2024);
  int reachable = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int m = rng.uniform_int(3, 12);
    ScenarioOptions options;
    options.n_immovable = rng.uniform_int(0, m * m / 4);
    const int n = rng.uniform_int(1, std::min(6, (m * m - options.n_immovable) / 2 - 1));
    Scenario s;
    try {
      s = random_scenario(n, m, rng.next(), options);
    } catch (const PlacementFailure&) {
      continue;
    }
    const WorldState st = start_state(s);
    for (int i = 0; i < n; ++i) {
      const auto oracle = bfs_distance(st, i);
      const auto p = astar_path(st, i);
      REQUIRE(p.has_value() == oracle.has_value());
      if (!p) continue;
      ++reachable;
      CHECK(p->length() == *oracle);
      CHECK(path_valid(*p, st.pose(i), blocked_cells(st, i), m));
      CHECK(p->end() == s.target[i]);
      CHECK(target_reachable(Occupancy(st), st, i));
    }
  }
  CHECK(reachable > 100);
}

TEST_CASE("expanded primitives are valid, maximal and repeatable") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    ScenarioOptions options;
    options.n_immovable = rng.uniform_int(0, 10);
    const Scenario s = random_scenario(rng.uniform_int(1, 8), 8, rng.next(), options);
    const WorldState st = start_state(s);
    for (int i = 0; i < s.object_count(); ++i) {
      const std::vector<int> blocked = blocked_cells(st, i);
      for (PrimitiveKind kind : kAllPrimitives) {
        const auto p = expand_primitive(st, {i, kind});
        CHECK(p == expand_primitive(st, {i, kind}));
        if (!p) continue;
        CHECK(p->length() >= 1);
        CHECK(path_valid(*p, st.pose(i), blocked, 8));
        if (kind == PrimitiveKind::astar) {
          CHECK(*p == *astar_path(st, i));
          continue;
        }
        // one more cell in the sweep direction must collide or leave the grid
        const int dx = kind == PrimitiveKind::left ? -1 : kind == PrimitiveKind::right ? 1 : 0;
        const int dy = kind == PrimitiveKind::up ? -1 : kind == PrimitiveKind::down ? 1 : 0;
        const int nx = p->end().x + dx, ny = p->end().y + dy;
        const bool stops = nx < 0 || ny < 0 || nx >= 8 || ny >= 8 ||
                           blocked[static_cast<std::size_t>(ny) * 8 + nx];
        CHECK(stops);
      }
    }
  }
}

TEST_CASE("expand_primitive rejects unknown objects and immovable ones") {
  Scenario s = grid_scenario(5, {{{0, 0}, {4, 4}}});
  s.objects.push_back(ObjectSpec{1, 1, 1, false});
  s.initial.push_back(Pose{0, 3});
  s.target.push_back(Pose{0, 3});
  validate(s);
  const WorldState st = start_state(s);
  CHECK_THROWS_AS(expand_primitive(st, {5, PrimitiveKind::up}), UnknownObject);
  for (PrimitiveKind kind : kAllPrimitives) CHECK_FALSE(expand_primitive(st, {1, kind}).has_value());
  // the immovable object blocks like a wall
  CHECK(directional_sweep(st, 0, PrimitiveKind::down).end() == Pose{0, 2});
}
