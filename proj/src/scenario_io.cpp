#include "npmo/scenario_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "npmo/errors.hpp"

namespace npmo {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ordered_json scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["schema"] = kScenarioSchema;
  j["M"] = s.grid;
  j["n_objects"] = s.movable_count();
  ordered_json objects = ordered_json::array();
  for (const auto& o : s.objects)
    objects.push_back({{"id", o.id}, {"w", o.w}, {"h", o.h}, {"movable", o.movable}});
  j["objects"] = std::move(objects);
  auto poses = [](const std::vector<Pose>& ps) {
    ordered_json a = ordered_json::array();
    for (const auto& p : ps) a.push_back({{"x", p.x}, {"y", p.y}, {"phi", p.phi}});
    return a;
  };
  j["initial"] = poses(s.initial);
  j["target"] = poses(s.target);
  ordered_json walls = ordered_json::array();
  for (const auto& r : s.immovable) walls.push_back({{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}});
  j["immovable"] = std::move(walls);
  j["seed"] = s.seed;
  return j;
}

namespace {

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

int get_int(const json& j, const std::string& path, const char* key) {
  const json& v = require(j, path, key);
  if (!v.is_number_integer())
    throw ParseError(path.empty() ? key : path + "." + key, "expected an integer");
  return v.get<int>();
}

const json& get_array(const json& j, const std::string& path, const char* key) {
  const json& v = require(j, path, key);
  if (!v.is_array()) throw ParseError(path.empty() ? key : path + "." + key, "expected an array");
  return v;
}

std::vector<Pose> get_poses(const json& j, const char* key) {
  std::vector<Pose> out;
  const json& a = get_array(j, "", key);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string p = std::string(key) + "[" + std::to_string(i) + "]";
    out.push_back(Pose{get_int(a[i], p, "x"), get_int(a[i], p, "y"), get_int(a[i], p, "phi")});
  }
  return out;
}

}  // namespace

Scenario scenario_from_json(const json& j, int max_objects) {
  if (j.contains("schema")) {
    if (!j["schema"].is_number_integer() || j["schema"].get<int>() != kScenarioSchema)
      throw ParseError("schema", "unsupported schema version");
  }
  Scenario s;
  s.grid = get_int(j, "", "M");
  const json& objects = get_array(j, "", "objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string p = "objects[" + std::to_string(i) + "]";
    ObjectSpec o;
    o.id = get_int(objects[i], p, "id");
    o.w = get_int(objects[i], p, "w");
    o.h = get_int(objects[i], p, "h");
    if (o.w < 1) throw ParseError(p + ".w", "must be at least 1");
    if (o.h < 1) throw ParseError(p + ".h", "must be at least 1");
    const json& mv = require(objects[i], p, "movable");
    if (!mv.is_boolean()) throw ParseError(p + ".movable", "expected a boolean");
    o.movable = mv.get<bool>();
    s.objects.push_back(o);
  }
  s.initial = get_poses(j, "initial");
  s.target = get_poses(j, "target");
  const json& walls = get_array(j, "", "immovable");
  for (std::size_t i = 0; i < walls.size(); ++i) {
    const std::string p = "immovable[" + std::to_string(i) + "]";
    s.immovable.push_back(Rect{get_int(walls[i], p, "x"), get_int(walls[i], p, "y"),
                               get_int(walls[i], p, "w"), get_int(walls[i], p, "h")});
  }
  const json& seed = require(j, "", "seed");
  if (!seed.is_number_unsigned()) throw ParseError("seed", "expected a non-negative integer");
  s.seed = seed.get<std::uint64_t>();
  const int n = get_int(j, "", "n_objects");
  if (n != s.movable_count()) throw ParseError("n_objects", "does not match movable object count");
  try {
    validate(s, max_objects);
  } catch (const InvalidScenario& e) {
    throw ParseError("", e.what());
  }
  return s;
}

std::string canonical_scenario(const Scenario& s) { return scenario_to_json(s).dump(); }

std::uint64_t scenario_checksum(const Scenario& s) { return fnv1a(canonical_scenario(s)); }

void write_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& scenarios) {
  ordered_json j;
  j["schema"] = kScenarioSchema;
  ordered_json list = ordered_json::array();
  for (const auto& s : scenarios) list.push_back(scenario_to_json(s));
  j["scenarios"] = std::move(list);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

std::vector<Scenario> parse_scenarios(const std::string& text, int max_objects) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + end, '\n'));
    throw ParseError("", e.what(), line);
  }
  std::vector<Scenario> out;
  if (j.is_object() && j.contains("scenarios")) {
    if (j.contains("schema") &&
        (!j["schema"].is_number_integer() || j["schema"].get<int>() != kScenarioSchema))
      throw ParseError("schema", "unsupported schema version");
    const json& list = j["scenarios"];
    if (!list.is_array()) throw ParseError("scenarios", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      try {
        out.push_back(scenario_from_json(list[i], max_objects));
      } catch (const ParseError& e) {
        throw ParseError("scenarios[" + std::to_string(i) + "]" +
                             (e.field().empty() ? "" : "." + e.field()),
                         e.detail());
      }
    }
  } else {
    out.push_back(scenario_from_json(j, max_objects));
  }
  return out;
}

std::vector<Scenario> read_scenarios(const std::filesystem::path& path, int max_objects) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenarios(buf.str(), max_objects);
}

}  // namespace npmo
