#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "npmo/pathfind.hpp"
#include "npmo/world.hpp"

namespace npmo {

inline constexpr double kMoveReward = -1.0;
inline constexpr double kArrivalReward = 4.0;
inline constexpr double kLeaveReward = -4.0;
inline constexpr double kSuccessReward = 50.0;

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  bool success = false;
  bool arrived = false;
  bool left = false;
  Path moved_path;
};

// Binary M x M x (2 * capacity + 1) volume stored channel-major
// ([channel][y][x]). Channel 2i holds object i's current footprint, 2i + 1
// its target footprint, the last channel immovable cells.
class Observation {
 public:
  Observation(int grid, int capacity);

  int grid() const { return grid_; }
  int capacity() const { return capacity_; }
  int channels() const { return 2 * capacity_ + 1; }
  std::size_t size() const { return cells_.size(); }

  std::uint8_t at(int channel, int x, int y) const { return cells_[offset(channel, x, y)]; }
  void set(int channel, int x, int y) { cells_[offset(channel, x, y)] = 1; }
  std::span<const std::uint8_t> data() const { return cells_; }

  // Flat indices of the set cells, ascending.
  std::vector<std::int32_t> active() const;

  friend bool operator==(const Observation&, const Observation&) = default;

 private:
  std::size_t offset(int channel, int x, int y) const {
    return (static_cast<std::size_t>(channel) * grid_ + y) * grid_ + x;
  }

  int grid_;
  int capacity_;
  std::vector<std::uint8_t> cells_;
};

// Throws ShapeMismatch if the scenario holds more objects than `capacity`.
Observation encode_observation(const WorldState& state, int capacity = kMaxObjects);

// Executable actions in (object, kind) order.
std::vector<PrimitiveAction> legal_actions(const WorldState& state);

// Legality over the flat action space of size capacity * 5.
std::vector<std::uint8_t> legal_mask(const WorldState& state, int capacity = kMaxObjects);

bool is_success(const WorldState& state);

// Executes the primitive: the object is teleported to the path's final pose.
// Throws EpisodeFinished when the state is done and IllegalAction when the
// primitive is not executable.
StepOutcome apply_action(WorldState& state, const PrimitiveAction& action);
std::pair<WorldState, StepOutcome> step(const WorldState& state, const PrimitiveAction& action);

// One line of an episode trace.
struct TraceRecord {
  int t = 0;  // step counter before the action
  PrimitiveAction action;
  Path path;
  double reward = 0.0;
  bool done = false;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

void write_trace(std::ostream& out, std::span<const TraceRecord> trace);
std::vector<TraceRecord> read_trace(std::istream& in);

}  // namespace npmo
