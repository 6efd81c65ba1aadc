#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "covplan/dynamics.hpp"
#include "covplan/grid_map.hpp"

namespace covplan {

// Ordered: each level removes a superset of the previous level's actions.
enum class MaskLevel : int { none = 0, valid = 1, immediate = 2, invariant = 3 };

inline constexpr std::string_view mask_level_name(MaskLevel l) {
  switch (l) {
    case MaskLevel::none: return "none";
    case MaskLevel::valid: return "valid";
    case MaskLevel::immediate: return "immediate";
    case MaskLevel::invariant: return "invariant";
  }
  return "?";
}

inline std::optional<MaskLevel> mask_level_from_name(std::string_view s) {
  for (MaskLevel l : {MaskLevel::none, MaskLevel::valid, MaskLevel::immediate, MaskLevel::invariant})
    if (mask_level_name(l) == s) return l;
  return std::nullopt;
}

struct ActionMask {
  std::array<bool, kActionCount> allowed{};
  MaskLevel level = MaskLevel::none;

  bool operator[](Action a) const { return allowed[static_cast<int>(a)]; }
  bool any() const {
    for (bool b : allowed)
      if (b) return true;
    return false;
  }
  int count() const {
    int n = 0;
    for (bool b : allowed) n += b;
    return n;
  }
  // Every action allowed here is also allowed in `other`.
  bool subset_of(const ActionMask& other) const {
    for (int i = 0; i < kActionCount; ++i)
      if (allowed[i] && !other.allowed[i]) return false;
    return true;
  }
};

// Action mask at the requested level.
//
//   valid      action constraints hold
//   immediate  valid, and the successor position is not an NFZ (or off-map)
//   invariant  immediate, and the successor is within b-1 steps of a landing zone
//
// The invariant test is skipped for charge and land. Charging strictly raises
// the battery and landing yields a landed state, so neither can strand the
// agent; applying the test to charge would leave a landed agent with b <= 1
// no action at all. take_off keeps the test, i.e. it needs d_L(p) = 1 <= b-1.
inline ActionMask mask(const GridMap& map, const DistanceField& dfield, const UavState& s, MaskLevel level,
                       int b_max) {
  ActionMask m;
  m.level = level;
  for (Action a : kAllActions) {
    bool ok = true;
    if (level >= MaskLevel::valid) ok = is_action_valid(s, a, map, b_max);
    const Cell next = s.position + motion(a);
    if (ok && level >= MaskLevel::immediate) ok = !map.blocked_for_flight(next);
    if (ok && level >= MaskLevel::invariant && a != Action::charge && a != Action::land) {
      const int d = dfield(next);
      ok = d != kUnreachable && d <= s.battery - 1;
    }
    m.allowed[static_cast<int>(a)] = ok;
  }
  return m;
}

}  // namespace covplan
