#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "covplan/grid_map.hpp"

namespace covplan {

enum class Action : int { east = 0, north, west, south, take_off, land, charge };

inline constexpr int kActionCount = 7;
inline constexpr std::array<Action, kActionCount> kAllActions{
    Action::east, Action::north, Action::west, Action::south, Action::take_off, Action::land, Action::charge};

inline constexpr std::string_view action_name(Action a) {
  constexpr std::array<std::string_view, kActionCount> names{"east", "north", "west", "south",
                                                             "take_off", "land", "charge"};
  return names[static_cast<int>(a)];
}

inline std::optional<Action> action_from_name(std::string_view s) {
  for (Action a : kAllActions)
    if (action_name(a) == s) return a;
  return std::nullopt;
}

inline constexpr bool is_move(Action a) { return static_cast<int>(a) < 4; }

// Motion lookup table f_m.
inline constexpr Cell motion(Action a) {
  switch (a) {
    case Action::east: return {1, 0};
    case Action::north: return {0, 1};
    case Action::west: return {-1, 0};
    case Action::south: return {0, -1};
    default: return {0, 0};
  }
}

struct UavState {
  Cell position;
  int battery = 0;  // remaining flight steps
  bool landed = false;

  friend bool operator==(const UavState&, const UavState&) = default;
};

enum class CrashReason { nfz_entry, battery_empty, invalid_action };

inline constexpr std::string_view crash_reason_name(CrashReason r) {
  switch (r) {
    case CrashReason::nfz_entry: return "nfz_entry";
    case CrashReason::battery_empty: return "battery_empty";
    case CrashReason::invalid_action: return "invalid_action";
  }
  return "?";
}

struct StepOutcome {
  UavState next;
  std::optional<CrashReason> crash_reason;

  bool crashed() const { return crash_reason.has_value(); }
};

struct BatteryModel {
  int capacity = 100;     // b_max
  int charge_amount = 2;  // b_c
};

// Action constraints: take off only when landed, charge only when landed and
// not full, move only when flying, land only when flying over a landing zone.
inline bool is_action_valid(const UavState& s, Action a, const GridMap& map, int b_max) {
  switch (a) {
    case Action::take_off: return s.landed;
    case Action::charge: return s.landed && s.battery < b_max;
    case Action::land: return !s.landed && map.contains(s.position) && map.landing(s.position);
    default: return !s.landed;
  }
}

// Deterministic transition. Masking is the caller's concern: any action may be
// passed in, constraint violations come back as crash outcomes.
//
// Invalid actions leave the state untouched. Moves off the map count as NFZ
// entries and keep the previous position.
inline StepOutcome step(const GridMap& map, const UavState& s, Action a, const BatteryModel& battery) {
  StepOutcome out{s, std::nullopt};
  if (!is_action_valid(s, a, map, battery.capacity)) {
    out.crash_reason = CrashReason::invalid_action;
    return out;
  }

  UavState& n = out.next;
  const Cell target = s.position + motion(a);
  if (a == Action::charge) {
    n.battery = std::min(s.battery + battery.charge_amount, battery.capacity);
  } else {
    n.battery = std::max(s.battery - 1, 0);
  }
  if (a == Action::land) n.landed = true;
  if (a == Action::take_off) n.landed = false;

  if (map.blocked_for_flight(target)) {
    out.crash_reason = CrashReason::nfz_entry;
    if (map.contains(target)) n.position = target;
    return out;
  }
  n.position = target;

  if (n.battery == 0 && !n.landed) out.crash_reason = CrashReason::battery_empty;
  return out;
}

}  // namespace covplan
