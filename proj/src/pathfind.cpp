#include "npmo/pathfind.hpp"

#include <cstdint>
#include <cstdlib>
#include <limits>
#include <queue>
#include <string>
#include <tuple>

#include "npmo/errors.hpp"

namespace npmo {

namespace {

// up, down, left, right; up decreases y.
constexpr int kDx[4] = {0, 0, -1, 1};
constexpr int kDy[4] = {-1, 1, 0, 0};

}  // namespace

Path directional_sweep(const WorldState& state, int object, PrimitiveKind kind) {
  return directional_sweep(Occupancy(state), state, object, kind);
}

Path directional_sweep(const Occupancy& occ, const WorldState& state, int object,
                       PrimitiveKind kind) {
  const int dir = static_cast<int>(kind);
  Path path;
  Pose p = state.pose(object);
  path.waypoints.push_back(p);
  if (kind == PrimitiveKind::astar || !state.scenario().objects[object].movable) return path;
  for (;;) {
    const int nx = p.x + kDx[dir];
    const int ny = p.y + kDy[dir];
    if (!occ.fits(object, nx, ny)) break;
    p.x = nx;
    p.y = ny;
    path.waypoints.push_back(p);
  }
  return path;
}

std::optional<Path> astar_path(const WorldState& state, int object) {
  return astar_path(Occupancy(state), state, object);
}

std::optional<Path> astar_path(const Occupancy& occ, const WorldState& state, int object) {
  const Scenario& s = state.scenario();
  const Pose start = state.pose(object);
  const Pose goal = s.target[object];
  if (!s.objects[object].movable || start == goal) return std::nullopt;
  if (!occ.fits(object, goal.x, goal.y)) return std::nullopt;

  const int m = s.grid;
  const int cells = m * m;
  constexpr int kUnseen = std::numeric_limits<int>::max();
  std::vector<int> g(cells, kUnseen);
  std::vector<int> parent(cells, -1);
  std::vector<std::uint8_t> closed(cells, 0);

  // (f, insertion order, cell); min-heap.
  using Entry = std::tuple<int, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  int order = 0;
  auto h = [&](int x, int y) { return std::abs(x - goal.x) + std::abs(y - goal.y); };

  const int start_cell = start.y * m + start.x;
  const int goal_cell = goal.y * m + goal.x;
  g[start_cell] = 0;
  open.emplace(h(start.x, start.y), order++, start_cell);
  while (!open.empty()) {
    const auto [f, ord, cell] = open.top();
    open.pop();
    if (closed[cell]) continue;
    closed[cell] = 1;
    if (cell == goal_cell) break;
    const int x = cell % m;
    const int y = cell / m;
    for (int d = 0; d < 4; ++d) {
      const int nx = x + kDx[d];
      const int ny = y + kDy[d];
      if (!occ.fits(object, nx, ny)) continue;
      const int next = ny * m + nx;
      if (closed[next] || g[cell] + 1 >= g[next]) continue;
      g[next] = g[cell] + 1;
      parent[next] = cell;
      open.emplace(g[next] + h(nx, ny), order++, next);
    }
  }
  if (!closed[goal_cell]) return std::nullopt;

  Path path;
  path.waypoints.resize(static_cast<std::size_t>(g[goal_cell]) + 1);
  int cell = goal_cell;
  for (int k = g[goal_cell]; k >= 0; --k) {
    path.waypoints[k] = Pose{cell % m, cell / m, start.phi};
    cell = parent[cell];
  }
  return path;
}

bool target_reachable(const Occupancy& occ, const WorldState& state, int object) {
  const Scenario& s = state.scenario();
  const Pose start = state.pose(object);
  const Pose goal = s.target[object];
  if (!s.objects[object].movable || start == goal) return false;
  if (!occ.fits(object, goal.x, goal.y)) return false;
  const int m = s.grid;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(m) * m, 0);
  std::vector<int> stack;
  stack.reserve(seen.size());
  const int goal_cell = goal.y * m + goal.x;
  stack.push_back(start.y * m + start.x);
  seen[stack.back()] = 1;
  while (!stack.empty()) {
    const int cell = stack.back();
    stack.pop_back();
    const int x = cell % m;
    const int y = cell / m;
    for (int d = 0; d < 4; ++d) {
      const int nx = x + kDx[d];
      const int ny = y + kDy[d];
      if (nx < 0 || ny < 0 || nx >= m || ny >= m) continue;
      const int next = ny * m + nx;
      if (seen[next] || !occ.fits(object, nx, ny)) continue;
      if (next == goal_cell) return true;
      seen[next] = 1;
      stack.push_back(next);
    }
  }
  return false;
}

std::optional<Path> expand_primitive(const WorldState& state, const PrimitiveAction& action) {
  if (action.object < 0 || action.object >= state.scenario().object_count())
    throw UnknownObject("object " + std::to_string(action.object) + " does not exist");
  return expand_primitive(Occupancy(state), state, action);
}

std::optional<Path> expand_primitive(const Occupancy& occ, const WorldState& state,
                                     const PrimitiveAction& action) {
  if (action.object < 0 || action.object >= state.scenario().object_count())
    throw UnknownObject("object " + std::to_string(action.object) + " does not exist");
  if (!state.scenario().objects[action.object].movable) return std::nullopt;
  if (action.kind == PrimitiveKind::astar) return astar_path(occ, state, action.object);
  Path p = directional_sweep(occ, state, action.object, action.kind);
  if (p.length() == 0) return std::nullopt;
  return p;
}

}  // namespace npmo
