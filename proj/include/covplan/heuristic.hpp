#pragma once

#include <deque>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "covplan/coverage.hpp"
#include "covplan/dynamics.hpp"
#include "covplan/environment.hpp"
#include "covplan/grid_map.hpp"
#include "covplan/safety.hpp"

namespace covplan {

enum class PlanIntent { recharge_takeoff, goto_and_land, goto_cover, finish_land };

inline std::string_view plan_intent_name(PlanIntent i) {
  switch (i) {
    case PlanIntent::recharge_takeoff: return "recharge_takeoff";
    case PlanIntent::goto_and_land: return "goto_and_land";
    case PlanIntent::goto_cover: return "goto_cover";
    case PlanIntent::finish_land: return "finish_land";
  }
  return "?";
}

struct Plan {
  std::vector<Action> actions;
  PlanIntent intent = PlanIntent::goto_cover;
  Cell destination;
};

class PlannerFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Action move_between(Cell from, Cell to) {
  for (Action a : {Action::east, Action::north, Action::west, Action::south})
    if (from + motion(a) == to) return a;
  throw std::logic_error("cells are not 4-adjacent");
}

inline std::vector<Action> moves_along(const Path& path) {
  std::vector<Action> out;
  for (std::size_t i = 1; i < path.cells.size(); ++i) out.push_back(move_between(path.cells[i - 1], path.cells[i]));
  return out;
}

// Cells of interest: flyable cells from which at least one remaining target is visible.
inline std::vector<std::uint8_t> interest_cells(const GridMap& map, const FovConfig& fov, const TargetMap& targets) {
  std::vector<std::uint8_t> interest(map.cell_count(), 0);
  const int r = fov.half_width;
  for (int t : targets.indices()) {
    const Cell tc = map.cell(t);
    for (int y = std::max(0, tc.y - r); y <= std::min(map.height() - 1, tc.y + r); ++y) {
      for (int x = std::max(0, tc.x - r); x <= std::min(map.width() - 1, tc.x + r); ++x) {
        const int idx = map.index({x, y});
        if (interest[idx] || map.nfz(idx)) continue;
        if (visible(map, fov, {x, y}, tc)) interest[idx] = 1;
      }
    }
  }
  return interest;
}

// Greedy coverage heuristic. Ties in every argmin go to the lowest cell index,
// i.e. lexicographic (y, x).
//
//   landed                       charge to full, take off
//   no targets left              fly to the nearest landing cell, land
//   some interest cell y with
//     d_L(y) + d(p, y) < b       fly to the nearest such y
//   otherwise                    among landing cells l with d(p, l) < b, fly to
//                                the one closest to any interest cell and land
inline Plan plan(const GridMap& map, const DistanceField& dfield, const UavState& s, const TargetMap& targets,
                 const FovConfig& fov, const BatteryModel& battery) {
  Plan out;
  if (s.landed) {
    out.intent = PlanIntent::recharge_takeoff;
    out.destination = s.position;
    for (int b = s.battery; b < battery.capacity; b = std::min(b + battery.charge_amount, battery.capacity))
      out.actions.push_back(Action::charge);
    out.actions.push_back(Action::take_off);
    return out;
  }

  const auto from_p = distances_from(map, s.position);
  const auto landing = map.landing_cells();

  auto fly_and_land = [&](int dest, PlanIntent intent) {
    const auto path = shortest_path(map, s.position, map.cell(dest));
    if (!path) throw PlannerFailure("landing cell unreachable");
    out.intent = intent;
    out.destination = map.cell(dest);
    out.actions = moves_along(*path);
    out.actions.push_back(Action::land);
    return out;
  };

  if (targets.empty()) {
    int best = -1;
    for (int l : landing)
      if (from_p[l] != kUnreachable && (best < 0 || from_p[l] < from_p[best])) best = l;
    if (best < 0) throw PlannerFailure("no reachable landing cell");
    return fly_and_land(best, PlanIntent::finish_land);
  }

  const auto interest = interest_cells(map, fov, targets);
  int best = -1;
  for (int y = 0; y < map.cell_count(); ++y) {
    if (!interest[y] || from_p[y] == kUnreachable || dfield.at(y) == kUnreachable) continue;
    if (static_cast<long long>(dfield.at(y)) + from_p[y] >= s.battery) continue;
    if (best < 0 || from_p[y] < from_p[best]) best = y;
  }

  if (best >= 0) {
    const auto path = shortest_path(map, s.position, map.cell(best));
    out.intent = PlanIntent::goto_cover;
    out.destination = map.cell(best);
    out.actions = moves_along(*path);
    if (out.actions.empty()) throw PlannerFailure("already at the chosen cell of interest");
    return out;
  }

  int best_landing = -1;
  int best_score = kUnreachable;
  for (int l : landing) {
    if (from_p[l] == kUnreachable || from_p[l] >= s.battery) continue;
    const auto from_l = distances_from(map, map.cell(l));
    int score = kUnreachable;
    for (int y = 0; y < map.cell_count(); ++y)
      if (interest[y]) score = std::min(score, from_l[y]);
    if (score < best_score) {
      best_score = score;
      best_landing = l;
    }
  }
  if (best_landing < 0) throw PlannerFailure("no reachable landing cell from which a target can be approached");
  return fly_and_land(best_landing, PlanIntent::goto_and_land);
}

// Closed-loop executor state: holds the current plan and replans when it runs out.
class HeuristicController {
 public:
  Action next(const Environment& env) {
    if (queue_.empty()) {
      const auto& cfg = env.config();
      Plan p = plan(env.map(), env.dfield(), env.state(), env.targets(), cfg.fov, cfg.battery);
      last_intent_ = p.intent;
      ++plans_;
      queue_.assign(p.actions.begin(), p.actions.end());
    }
    const Action a = queue_.front();
    queue_.pop_front();
    return a;
  }

  void reset() {
    queue_.clear();
    plans_ = 0;
  }
  int plans_made() const { return plans_; }
  PlanIntent last_intent() const { return last_intent_; }

 private:
  std::deque<Action> queue_;
  int plans_ = 0;
  PlanIntent last_intent_ = PlanIntent::goto_cover;
};

struct HeuristicRun {
  EpisodeStats stats;
  std::vector<TraceStep> trace;
  int mask_violations = 0;  // heuristic actions the invariant mask would have refused
  bool planner_failed = false;
};

// Executes the heuristic under the invariant mask until solved or timeout.
inline HeuristicRun run_heuristic(const Scenario& sc, EnvConfig cfg) {
  cfg.mask_level = MaskLevel::invariant;
  Environment env(cfg);
  env.reset(sc);
  HeuristicController ctl;
  HeuristicRun run;
  while (!env.done()) {
    Action a;
    try {
      a = ctl.next(env);
    } catch (const PlannerFailure&) {
      run.planner_failed = true;
      break;
    }
    if (!env.current_mask()[a]) {
      ++run.mask_violations;
      break;
    }
    env.step(a);
  }
  run.stats = env.stats();
  run.trace = env.trace();
  return run;
}

}  // namespace covplan
