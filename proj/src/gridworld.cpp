#include "npmo/gridworld.hpp"

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "npmo/errors.hpp"

namespace npmo {

Observation::Observation(int grid, int capacity)
    : grid_(grid),
      capacity_(capacity),
      cells_(static_cast<std::size_t>(2 * capacity + 1) * grid * grid, 0) {}

std::vector<std::int32_t> Observation::active() const {
  std::vector<std::int32_t> idx;
  for (std::size_t k = 0; k < cells_.size(); ++k)
    if (cells_[k]) idx.push_back(static_cast<std::int32_t>(k));
  return idx;
}

Observation encode_observation(const WorldState& state, int capacity) {
  const Scenario& s = state.scenario();
  if (s.object_count() > capacity)
    throw ShapeMismatch("scenario has " + std::to_string(s.object_count()) +
                        " objects but the encoding holds " + std::to_string(capacity));
  Observation obs(s.grid, capacity);
  const int wall = 2 * capacity;
  auto paint = [&](int channel, const Rect& r) {
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) obs.set(channel, x, y);
  };
  for (const Rect& r : s.immovable) paint(wall, r);
  for (int i = 0; i < s.object_count(); ++i) {
    const ObjectSpec& o = s.objects[i];
    if (!o.movable) {
      paint(wall, footprint(o, state.pose(i)));
      continue;
    }
    paint(2 * i, footprint(o, state.pose(i)));
    paint(2 * i + 1, footprint(o, s.target[i]));
  }
  return obs;
}

namespace {

template <typename Visit>
void for_each_legal(const WorldState& state, Visit&& visit) {
  const Occupancy occ(state);
  const Scenario& s = state.scenario();
  constexpr int dx[4] = {0, 0, -1, 1};
  constexpr int dy[4] = {-1, 1, 0, 0};
  for (int i = 0; i < s.object_count(); ++i) {
    if (!s.objects[i].movable) continue;
    const Pose& p = state.pose(i);
    for (int d = 0; d < 4; ++d)
      if (occ.fits(i, p.x + dx[d], p.y + dy[d])) visit(PrimitiveAction{i, kAllPrimitives[d]});
    if (!state.at_target(i) && target_reachable(occ, state, i))
      visit(PrimitiveAction{i, PrimitiveKind::astar});
  }
}

}  // namespace

std::vector<PrimitiveAction> legal_actions(const WorldState& state) {
  std::vector<PrimitiveAction> out;
  if (state.done()) return out;
  for_each_legal(state, [&](const PrimitiveAction& a) { out.push_back(a); });
  return out;
}

std::vector<std::uint8_t> legal_mask(const WorldState& state, int capacity) {
  if (state.scenario().object_count() > capacity)
    throw ShapeMismatch("scenario exceeds action capacity");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(capacity) * kPrimitiveCount, 0);
  if (state.done()) return mask;
  for_each_legal(state, [&](const PrimitiveAction& a) { mask[a.index()] = 1; });
  return mask;
}

bool is_success(const WorldState& state) { return state.success(); }

class Simulator {
 public:
  static StepOutcome apply(WorldState& state, const PrimitiveAction& action) {
    if (state.done()) throw EpisodeFinished("episode already finished");
    std::optional<Path> path = expand_primitive(state, action);
    if (!path)
      throw IllegalAction("primitive " + std::string(to_string(action.kind)) + " of object " +
                          std::to_string(action.object) + " is not executable");
    StepOutcome out;
    const bool was = state.at_target(action.object);
    state.place(action.object, path->end());
    const bool now = state.at_target(action.object);
    out.arrived = !was && now;
    out.left = was && !now;
    state.t_ += 1;
    state.prev_action_ = action;
    out.success = state.success();
    out.done = state.done();
    out.reward = kMoveReward + (out.arrived ? kArrivalReward : 0.0) +
                 (out.left ? kLeaveReward : 0.0) + (out.success ? kSuccessReward : 0.0);
    out.moved_path = std::move(*path);
    return out;
  }
};

StepOutcome apply_action(WorldState& state, const PrimitiveAction& action) {
  return Simulator::apply(state, action);
}

std::pair<WorldState, StepOutcome> step(const WorldState& state, const PrimitiveAction& action) {
  WorldState next = state;
  StepOutcome out = Simulator::apply(next, action);
  return {std::move(next), std::move(out)};
}

void write_trace(std::ostream& out, std::span<const TraceRecord> trace) {
  for (const TraceRecord& r : trace) {
    nlohmann::ordered_json j;
    j["t"] = r.t;
    j["object"] = r.action.object;
    j["primitive"] = std::string(to_string(r.action.kind));
    nlohmann::json path = nlohmann::json::array();
    for (const Pose& p : r.path.waypoints) path.push_back({p.x, p.y, p.phi});
    j["path"] = std::move(path);
    j["reward"] = r.reward;
    j["done"] = r.done;
    out << j.dump() << '\n';
  }
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> trace;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("", e.what(), lineno);
    }
    TraceRecord r;
    auto field = [&](const char* name) -> const nlohmann::json& {
      if (!j.contains(name)) throw ParseError(name, "missing", lineno);
      return j.at(name);
    };
    try {
      r.t = field("t").get<int>();
      r.action.object = field("object").get<int>();
      const auto kind = primitive_from_string(field("primitive").get<std::string>());
      if (!kind) throw ParseError("primitive", "unknown primitive", lineno);
      r.action.kind = *kind;
      for (const auto& w : field("path")) {
        if (!w.is_array() || w.size() != 3) throw ParseError("path", "waypoint must be [x,y,phi]", lineno);
        r.path.waypoints.push_back(Pose{w[0].get<int>(), w[1].get<int>(), w[2].get<int>()});
      }
      r.reward = field("reward").get<double>();
      r.done = field("done").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("", e.what(), lineno);
    }
    trace.push_back(std::move(r));
  }
  return trace;
}

}  // namespace npmo
