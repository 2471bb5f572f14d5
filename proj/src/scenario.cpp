#include "npmo/scenario.hpp"

#include <string>

#include "npmo/errors.hpp"
#include "npmo/rng.hpp"

namespace npmo {

int Scenario::movable_count() const {
  int n = 0;
  for (const auto& o : objects) n += o.movable ? 1 : 0;
  return n;
}

namespace {

bool valid_phi(int phi) { return phi == 0 || phi == 90 || phi == 180 || phi == 270; }

void check_layout(const Scenario& s, const std::vector<Pose>& poses, const char* name) {
  const int n = s.object_count();
  for (int i = 0; i < n; ++i) {
    const Rect fi = footprint(s.objects[i], poses[i]);
    if (!inside(fi, s.grid))
      throw InvalidScenario(std::string(name) + " pose of object " + std::to_string(i) +
                            " is outside the grid");
    if (!valid_phi(poses[i].phi))
      throw InvalidScenario(std::string(name) + " orientation of object " + std::to_string(i) +
                            " is not a multiple of 90 degrees");
    for (const Rect& r : s.immovable)
      if (overlaps(fi, r))
        throw InvalidScenario(std::string(name) + " pose of object " + std::to_string(i) +
                              " overlaps an immovable obstacle");
    for (int j = 0; j < i; ++j)
      if (overlaps(fi, footprint(s.objects[j], poses[j])))
        throw InvalidScenario(std::string(name) + " poses of objects " + std::to_string(j) +
                              " and " + std::to_string(i) + " overlap");
  }
}

}  // namespace

void validate(const Scenario& s, int max_objects) {
  if (s.grid < 1) throw InvalidScenario("grid size must be positive");
  const int n = s.object_count();
  if (n > max_objects)
    throw InvalidScenario("scenario has " + std::to_string(n) + " objects, capacity is " +
                          std::to_string(max_objects));
  if (static_cast<int>(s.initial.size()) != n || static_cast<int>(s.target.size()) != n)
    throw InvalidScenario("initial and target pose lists must have one entry per object");
  for (int i = 0; i < n; ++i) {
    const auto& o = s.objects[i];
    if (o.id != i) throw InvalidScenario("object ids must be 0..n-1 in order");
    if (o.w < 1 || o.h < 1) throw InvalidScenario("object footprint must be at least 1x1");
    if (s.initial[i].phi != s.target[i].phi)
      throw InvalidScenario("object " + std::to_string(i) + " changes orientation");
    if (!o.movable && !(s.initial[i] == s.target[i]))
      throw InvalidScenario("immovable object " + std::to_string(i) + " has a target pose");
  }
  for (const Rect& r : s.immovable) {
    if (r.w < 1 || r.h < 1 || !inside(r, s.grid))
      throw InvalidScenario("immovable obstacle outside the grid or empty");
  }
  check_layout(s, s.initial, "initial");
  check_layout(s, s.target, "target");
}

Scenario random_scenario(int n_objects, int grid, std::uint64_t seed,
                         const ScenarioOptions& options) {
  if (n_objects < 1 || n_objects > options.max_objects)
    throw InvalidScenario("object count " + std::to_string(n_objects) + " outside [1, " +
                          std::to_string(options.max_objects) + "]");
  if (grid < 2) throw InvalidScenario("grid must be at least 2x2");

  Scenario s;
  s.grid = grid;
  s.seed = seed;
  Rng rng(mix_seed(seed, 0x5ce7a210));

  std::vector<char> wall(static_cast<std::size_t>(grid) * grid, 0);
  std::vector<char> start(wall.size(), 0);
  std::vector<char> goal(wall.size(), 0);
  auto draw_cell = [&](auto&& acceptable, const char* what, int index) {
    for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
      const int x = rng.uniform_int(0, grid - 1);
      const int y = rng.uniform_int(0, grid - 1);
      if (acceptable(x, y)) return y * grid + x;
    }
    throw PlacementFailure(std::string("could not place ") + what + " " + std::to_string(index) +
                           " on a " + std::to_string(grid) + "x" + std::to_string(grid) +
                           " grid");
  };

  for (int k = 0; k < options.n_immovable; ++k) {
    const int c = draw_cell([&](int x, int y) { return !wall[y * grid + x]; }, "obstacle", k);
    wall[c] = 1;
    s.immovable.push_back(Rect{c % grid, c / grid, 1, 1});
  }
  for (int i = 0; i < n_objects; ++i) {
    const int c = draw_cell(
        [&](int x, int y) { return !wall[y * grid + x] && !start[y * grid + x]; }, "object", i);
    start[c] = 1;
    s.objects.push_back(ObjectSpec{i, 1, 1, true});
    s.initial.push_back(Pose{c % grid, c / grid, 0});
  }
  for (int i = 0; i < n_objects; ++i) {
    const int own = s.initial[i].y * grid + s.initial[i].x;
    const int c = draw_cell(
        [&](int x, int y) {
          const int cell = y * grid + x;
          return !wall[cell] && !goal[cell] && cell != own;
        },
        "target", i);
    goal[c] = 1;
    s.target.push_back(Pose{c % grid, c / grid, 0});
  }
  return s;
}

}  // namespace npmo
