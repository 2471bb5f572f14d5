#pragma once

#include <optional>
#include <vector>

#include "npmo/world.hpp"

namespace npmo {

// Ordered 4-connected waypoints; waypoints.front() is the object's pose when
// the path was planned.
struct Path {
  std::vector<Pose> waypoints;

  // Number of unit moves.
  int length() const { return waypoints.empty() ? 0 : static_cast<int>(waypoints.size()) - 1; }
  const Pose& end() const { return waypoints.back(); }

  friend bool operator==(const Path&, const Path&) = default;
};

// Sweeps the object one cell at a time in `kind`'s direction until the next
// placement would collide or leave the grid. The result may have length 0.
Path directional_sweep(const WorldState& state, int object, PrimitiveKind kind);
Path directional_sweep(const Occupancy& occupancy, const WorldState& state, int object,
                       PrimitiveKind kind);

// Minimal-length collision-free route from the object's pose to its target,
// other objects and immovables acting as obstacles. Manhattan heuristic,
// neighbours expanded up, down, left, right, FIFO among equal f. Empty when
// the target is unreachable or the object already sits on it.
std::optional<Path> astar_path(const WorldState& state, int object);
std::optional<Path> astar_path(const Occupancy& occupancy, const WorldState& state, int object);

// Reachability of the target without materialising a path; agrees with
// astar_path(...).has_value().
bool target_reachable(const Occupancy& occupancy, const WorldState& state, int object);

// Path that the simulator executes for `action`, or empty when the action is
// not executable (zero displacement, unreachable target, immovable object).
// Throws UnknownObject for an out-of-range object index.
std::optional<Path> expand_primitive(const WorldState& state, const PrimitiveAction& action);
std::optional<Path> expand_primitive(const Occupancy& occupancy, const WorldState& state,
                                     const PrimitiveAction& action);

}  // namespace npmo
