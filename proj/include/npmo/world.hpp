#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "npmo/scenario.hpp"

namespace npmo {

enum class PrimitiveKind : std::uint8_t { up = 0, down = 1, left = 2, right = 3, astar = 4 };

inline constexpr int kPrimitiveCount = 5;
inline constexpr std::array<PrimitiveKind, kPrimitiveCount> kAllPrimitives = {
    PrimitiveKind::up, PrimitiveKind::down, PrimitiveKind::left, PrimitiveKind::right,
    PrimitiveKind::astar};

std::string_view to_string(PrimitiveKind kind);
std::optional<PrimitiveKind> primitive_from_string(std::string_view name);

struct PrimitiveAction {
  int object = 0;
  PrimitiveKind kind = PrimitiveKind::up;

  // Flat index into the object-major (object, primitive) action space.
  int index() const { return object * kPrimitiveCount + static_cast<int>(kind); }
  static PrimitiveAction from_index(int index) {
    return {index / kPrimitiveCount, static_cast<PrimitiveKind>(index % kPrimitiveCount)};
  }

  friend bool operator==(const PrimitiveAction&, const PrimitiveAction&) = default;
};

// Mutable episode state. The only mutation path is the simulator step, which
// keeps at_target, the step counter and prev_action consistent with poses.
class WorldState {
 public:
  explicit WorldState(std::shared_ptr<const Scenario> scenario);

  const Scenario& scenario() const { return *scenario_; }
  const std::shared_ptr<const Scenario>& scenario_ptr() const { return scenario_; }

  std::span<const Pose> poses() const { return poses_; }
  const Pose& pose(int i) const { return poses_[i]; }
  bool at_target(int i) const { return at_target_[i] != 0; }
  int t() const { return t_; }
  const std::optional<PrimitiveAction>& prev_action() const { return prev_action_; }

  bool success() const { return unfinished_ == 0; }
  bool done() const { return success() || t_ >= kMaxSteps; }
  int unfinished() const { return unfinished_; }

  friend bool operator==(const WorldState& a, const WorldState& b) {
    return *a.scenario_ == *b.scenario_ && a.poses_ == b.poses_ && a.t_ == b.t_ &&
           a.prev_action_ == b.prev_action_;
  }

 private:
  friend class Simulator;

  void place(int i, const Pose& pose);

  std::shared_ptr<const Scenario> scenario_;
  std::vector<Pose> poses_;
  std::vector<std::uint8_t> at_target_;
  int unfinished_ = 0;
  int t_ = 0;
  std::optional<PrimitiveAction> prev_action_;
};

inline constexpr std::int16_t kFreeCell = -1;
inline constexpr std::int16_t kWallCell = -2;

// Cell ownership snapshot: kFreeCell, kWallCell, or the index of the movable
// object covering the cell. Immovable objects are recorded as walls.
class Occupancy {
 public:
  explicit Occupancy(const WorldState& state);

  int grid() const { return grid_; }
  std::int16_t at(int x, int y) const { return cells_[static_cast<std::size_t>(y) * grid_ + x]; }

  // True when the footprint of `object` fits at (x, y): inside the grid and
  // every covered cell is free or already owned by `object`.
  bool fits(int object, int x, int y) const;

 private:
  int grid_;
  std::vector<std::int16_t> cells_;
  std::vector<std::array<int, 2>> size_;
};

}  // namespace npmo
