#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "npmo/gridworld.hpp"
#include "npmo/scenario.hpp"

namespace npmo::testing {

struct Placement {
  Pose initial;
  Pose target;
};

// 1x1 movable objects plus rectangular immovable obstacles.
inline Scenario grid_scenario(int grid, const std::vector<Placement>& objects,
                              const std::vector<Rect>& walls = {}) {
  Scenario s;
  s.grid = grid;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    s.objects.push_back(ObjectSpec{static_cast<int>(i), 1, 1, true});
    s.initial.push_back(objects[i].initial);
    s.target.push_back(objects[i].target);
  }
  s.immovable = walls;
  validate(s);
  return s;
}

inline WorldState start_state(const Scenario& s) {
  return WorldState(std::make_shared<const Scenario>(s));
}

// Cell grid with 1 for blocked cells: bounds are implicit, immovables and
// every movable object except `skip` are blocked.
inline std::vector<int> blocked_cells(const WorldState& state, int skip) {
  const Scenario& s = state.scenario();
  std::vector<int> cells(static_cast<std::size_t>(s.grid) * s.grid, 0);
  auto paint = [&](const Rect& r) {
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) cells[static_cast<std::size_t>(y) * s.grid + x] = 1;
  };
  for (const Rect& r : s.immovable) paint(r);
  for (int i = 0; i < s.object_count(); ++i)
    if (i != skip) paint(footprint(s.objects[i], state.pose(i)));
  return cells;
}

// Independent breadth-first shortest route length for a 1x1 object, or
// nullopt when unreachable.
inline std::optional<int> bfs_distance(const WorldState& state, int object) {
  const Scenario& s = state.scenario();
  const std::vector<int> blocked = blocked_cells(state, object);
  const int m = s.grid;
  std::vector<int> dist(static_cast<std::size_t>(m) * m, -1);
  const Pose from = state.pose(object);
  const Pose to = s.target[object];
  std::deque<std::pair<int, int>> queue{{from.x, from.y}};
  dist[static_cast<std::size_t>(from.y) * m + from.x] = 0;
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    if (x == to.x && y == to.y) return dist[static_cast<std::size_t>(y) * m + x];
    const int dx[] = {0, 0, -1, 1};
    const int dy[] = {-1, 1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= m || ny >= m) continue;
      const std::size_t c = static_cast<std::size_t>(ny) * m + nx;
      if (blocked[c] || dist[c] >= 0) continue;
      dist[c] = dist[static_cast<std::size_t>(y) * m + x] + 1;
      queue.emplace_back(nx, ny);
    }
  }
  return std::nullopt;
}

// Brute-force check that footprints are in bounds and pairwise disjoint, and
// do not touch immovables.
inline bool layout_valid(const WorldState& state) {
  const Scenario& s = state.scenario();
  std::vector<int> count(static_cast<std::size_t>(s.grid) * s.grid, 0);
  auto paint = [&](const Rect& r) {
    if (!inside(r, s.grid)) return false;
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x)
        if (++count[static_cast<std::size_t>(y) * s.grid + x] > 1) return false;
    return true;
  };
  for (const Rect& r : s.immovable)
    if (!paint(r)) return false;
  for (int i = 0; i < s.object_count(); ++i)
    if (!paint(footprint(s.objects[i], state.pose(i)))) return false;
  return true;
}

// Checks the structural path invariants: starts at `from`, 4-connected unit
// steps, every placement free in `blocked` (the moving object excluded).
inline bool path_valid(const Path& path, const Pose& from, const std::vector<int>& blocked,
                       int grid, int w = 1, int h = 1) {
  if (path.waypoints.empty() || !(path.waypoints.front() == from)) return false;
  for (std::size_t k = 0; k < path.waypoints.size(); ++k) {
    const Pose& p = path.waypoints[k];
    if (p.phi != from.phi) return false;
    if (!inside(Rect{p.x, p.y, w, h}, grid)) return false;
    for (int y = p.y; y < p.y + h; ++y)
      for (int x = p.x; x < p.x + w; ++x)
        if (blocked[static_cast<std::size_t>(y) * grid + x]) return false;
    if (k > 0) {
      const Pose& q = path.waypoints[k - 1];
      if (std::abs(p.x - q.x) + std::abs(p.y - q.y) != 1) return false;
    }
  }
  return true;
}

}  // namespace npmo::testing
