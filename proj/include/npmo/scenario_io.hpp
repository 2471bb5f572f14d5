#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "npmo/scenario.hpp"

namespace npmo {

inline constexpr int kScenarioSchema = 1;

nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
// Throws ParseError naming the offending field; the result is validated.
Scenario scenario_from_json(const nlohmann::json& j, int max_objects = kMaxObjects);

// Canonical compact serialisation used for checksums and files.
std::string canonical_scenario(const Scenario& scenario);
std::uint64_t scenario_checksum(const Scenario& scenario);

// A suite file is {"schema": 1, "scenarios": [...]}; a bare scenario object is
// also accepted on read.
void write_scenarios(const std::filesystem::path& path, const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios(const std::filesystem::path& path,
                                     int max_objects = kMaxObjects);
std::vector<Scenario> parse_scenarios(const std::string& text, int max_objects = kMaxObjects);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace npmo
