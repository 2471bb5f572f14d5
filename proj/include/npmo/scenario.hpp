#pragma once

#include <cstdint>
#include <vector>

namespace npmo {

// Default capacity of the observation/action encoding (object slots).
inline constexpr int kMaxObjects = 20;
// Episode step budget; reaching it without success is a failure.
inline constexpr int kMaxSteps = 50;
inline constexpr int kDefaultGrid = 10;
// Placement attempts per object during scenario generation.
inline constexpr int kPlacementRetries = 1000;

struct Pose {
  int x = 0;
  int y = 0;
  int phi = 0;  // degrees, one of {0, 90, 180, 270}; never changes in an episode

  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Footprint is w x h cells in grid axes anchored at the pose's (x, y), which
// is the top-left cell. Orientation does not rotate the footprint.
struct ObjectSpec {
  int id = 0;
  int w = 1;
  int h = 1;
  bool movable = true;

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

inline Rect footprint(const ObjectSpec& spec, const Pose& pose) {
  return Rect{pose.x, pose.y, spec.w, spec.h};
}

inline bool overlaps(const Rect& a, const Rect& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

inline bool inside(const Rect& r, int grid) {
  return r.x >= 0 && r.y >= 0 && r.x + r.w <= grid && r.y + r.h <= grid;
}

// Immutable task description. Object i's initial and target poses are
// initial[i] and target[i]; an immovable object's target equals its initial
// pose and it behaves like an obstacle.
struct Scenario {
  int grid = kDefaultGrid;
  std::vector<ObjectSpec> objects;
  std::vector<Pose> initial;
  std::vector<Pose> target;
  std::vector<Rect> immovable;
  std::uint64_t seed = 0;

  int object_count() const { return static_cast<int>(objects.size()); }
  int movable_count() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Throws InvalidScenario describing the first violated constraint.
void validate(const Scenario& scenario, int max_objects = kMaxObjects);

struct ScenarioOptions {
  int n_immovable = 0;  // 1x1 immovable obstacles placed before the objects
  int max_objects = kMaxObjects;
};

// Rejection-samples a scenario with n_objects 1x1 movable objects whose
// initial and target cells differ. Deterministic in (n_objects, grid, seed,
// options). Throws PlacementFailure when a placement cannot be found within
// kPlacementRetries attempts.
Scenario random_scenario(int n_objects, int grid, std::uint64_t seed,
                         const ScenarioOptions& options = {});

}  // namespace npmo
