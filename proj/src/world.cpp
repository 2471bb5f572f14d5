#include "npmo/world.hpp"

#include "npmo/errors.hpp"

namespace npmo {

namespace {
constexpr std::array<std::string_view, kPrimitiveCount> kNames = {"up", "down", "left", "right",
                                                                  "astar"};
}

std::string_view to_string(PrimitiveKind kind) { return kNames[static_cast<int>(kind)]; }

std::optional<PrimitiveKind> primitive_from_string(std::string_view name) {
  for (int k = 0; k < kPrimitiveCount; ++k)
    if (kNames[k] == name) return static_cast<PrimitiveKind>(k);
  return std::nullopt;
}

WorldState::WorldState(std::shared_ptr<const Scenario> scenario)
    : scenario_(std::move(scenario)) {
  if (!scenario_) throw InvalidScenario("null scenario");
  const int n = scenario_->object_count();
  poses_ = scenario_->initial;
  at_target_.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const bool done = !scenario_->objects[i].movable || poses_[i] == scenario_->target[i];
    at_target_[i] = done ? 1 : 0;
    unfinished_ += done ? 0 : 1;
  }
}

void WorldState::place(int i, const Pose& pose) {
  const bool was = at_target_[i] != 0;
  poses_[i] = pose;
  const bool now = pose == scenario_->target[i];
  at_target_[i] = now ? 1 : 0;
  unfinished_ += static_cast<int>(was) - static_cast<int>(now);
}

Occupancy::Occupancy(const WorldState& state) : grid_(state.scenario().grid) {
  const Scenario& s = state.scenario();
  cells_.assign(static_cast<std::size_t>(grid_) * grid_, kFreeCell);
  auto paint = [&](const Rect& r, std::int16_t owner) {
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) cells_[static_cast<std::size_t>(y) * grid_ + x] = owner;
  };
  for (const Rect& r : s.immovable) paint(r, kWallCell);
  size_.resize(s.objects.size());
  for (int i = 0; i < s.object_count(); ++i) {
    const ObjectSpec& o = s.objects[i];
    size_[i] = {o.w, o.h};
    paint(footprint(o, state.pose(i)), o.movable ? static_cast<std::int16_t>(i) : kWallCell);
  }
}

bool Occupancy::fits(int object, int x, int y) const {
  const auto [w, h] = size_[object];
  if (x < 0 || y < 0 || x + w > grid_ || y + h > grid_) return false;
  for (int yy = y; yy < y + h; ++yy) {
    const std::int16_t* row = &cells_[static_cast<std::size_t>(yy) * grid_];
    for (int xx = x; xx < x + w; ++xx) {
      const std::int16_t c = row[xx];
      if (c != kFreeCell && c != object) return false;
    }
  }
  return true;
}

}  // namespace npmo
