#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "covplan/coverage.hpp"
#include "covplan/environment.hpp"
#include "covplan/grid_map.hpp"

namespace covplan {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << data;
}

inline GridMap load_map(const std::filesystem::path& path) {
  try {
    return parse_map(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.column(), path.string() + ": " + e.what());
  }
}

inline nlohmann::json cell_json(Cell c) { return nlohmann::json::array({c.x, c.y}); }

inline Cell cell_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("cell must be [x, y]");
  return {j[0].get<int>(), j[1].get<int>()};
}

// Scenario file:
//   {"map": "<path>", "targets": [[x,y],...], "p0": [x,y], "b0": int,
//    "l0": bool, "timeout": int, "seed": int|null}
// Relative map paths resolve against the scenario file's directory.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json targets = nlohmann::json::array();
  for (int idx : sc.targets0.indices()) targets.push_back(cell_json(sc.map->cell(idx)));
  nlohmann::json j{{"map", sc.map_path},   {"targets", targets}, {"p0", cell_json(sc.p0)},
                   {"b0", sc.b0},          {"l0", sc.l0},        {"timeout", sc.timeout}};
  j["seed"] = sc.seed ? nlohmann::json(*sc.seed) : nlohmann::json(nullptr);
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j, std::shared_ptr<const GridMap> map) {
  Scenario sc;
  sc.map = std::move(map);
  sc.map_path = j.at("map").get<std::string>();
  std::vector<Cell> cells;
  for (const auto& c : j.at("targets")) cells.push_back(cell_from_json(c));
  sc.targets0 = TargetMap::from_cells(*sc.map, cells);
  sc.p0 = cell_from_json(j.at("p0"));
  sc.b0 = j.at("b0").get<int>();
  sc.l0 = j.at("l0").get<bool>();
  sc.timeout = j.at("timeout").get<int>();
  if (j.contains("seed") && !j["seed"].is_null()) sc.seed = j["seed"].get<std::uint64_t>();
  return sc;
}

// Problems that make a scenario illegal for the given battery settings.
inline std::vector<std::string> scenario_problems(const Scenario& sc, int b_max, double beta) {
  std::vector<std::string> out;
  const auto& map = *sc.map;
  if (!map.contains(sc.p0))
    out.push_back("p0 outside map");
  else if (!map.landing(sc.p0))
    out.push_back("p0 is not a landing cell");
  if (sc.b0 < min_initial_battery(beta, b_max) || sc.b0 > b_max)
    out.push_back("b0 outside [ceil(beta*b_max), b_max]");
  if (sc.timeout <= 0) out.push_back("timeout must be positive");
  for (int idx : sc.targets0.indices())
    if (map.obstacle(idx)) out.push_back("target on obstacle cell");
  if (map.landing_cells().empty()) out.push_back("map has no landing cell");
  return out;
}

inline Scenario load_scenario(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  const auto j = nlohmann::json::parse(read_file(path));
  std::filesystem::path map_path = j.at("map").get<std::string>();
  if (map_path.is_relative()) map_path = path.parent_path() / map_path;
  auto map = std::make_shared<const GridMap>(load_map(map_path));
  if (warnings && map->landing_cells().empty())
    warnings->push_back(map_path.string() + ": no landing cells, every distance is unreachable");
  return scenario_from_json(j, std::move(map));
}

// One JSON object per line: {"t","p","b","l","action","C"}; the spawn record has action null.
inline nlohmann::json trace_step_json(const TraceStep& s) {
  nlohmann::json j{{"t", s.t}, {"p", cell_json(s.p)}, {"b", s.b}, {"l", s.l}, {"C", s.remaining}};
  j["action"] = s.action ? nlohmann::json(std::string(action_name(*s.action))) : nlohmann::json(nullptr);
  return j;
}

inline void write_trace(std::ostream& os, const std::vector<TraceStep>& trace) {
  for (const auto& s : trace) os << trace_step_json(s).dump() << '\n';
}

inline std::vector<TraceStep> read_trace(std::istream& is) {
  std::vector<TraceStep> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TraceStep s;
    s.t = j.at("t").get<int>();
    s.p = cell_from_json(j.at("p"));
    s.b = j.at("b").get<int>();
    s.l = j.at("l").get<bool>();
    s.remaining = j.at("C").get<int>();
    if (!j.at("action").is_null()) {
      auto a = action_from_name(j["action"].get<std::string>());
      if (!a) throw std::invalid_argument("unknown action in trace: " + j["action"].get<std::string>());
      s.action = *a;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace covplan
