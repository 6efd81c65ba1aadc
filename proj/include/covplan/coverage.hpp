#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "covplan/dynamics.hpp"
#include "covplan/grid_map.hpp"
#include "covplan/rng.hpp"

namespace covplan {

enum class LosBlocking { all_obstacles, high_only };

inline std::string_view los_blocking_name(LosBlocking b) {
  return b == LosBlocking::all_obstacles ? "all_obstacles" : "high_only";
}

inline std::optional<LosBlocking> los_blocking_from_name(std::string_view s) {
  if (s == "all_obstacles") return LosBlocking::all_obstacles;
  if (s == "high_only") return LosBlocking::high_only;
  return std::nullopt;
}

// Square field of view of side 2r+1 with ray occlusion.
struct FovConfig {
  int half_width = 2;
  LosBlocking blocking = LosBlocking::all_obstacles;
};

// Visits every cell whose closed square the segment between the centres of
// `from` and `to` touches, in traversal order, endpoints included. When the
// segment passes exactly through a lattice corner both side cells are visited.
// Returning false from `visit` stops the walk early.
template <typename Visit>
void supercover_line(Cell from, Cell to, Visit&& visit) {
  int x = from.x, y = from.y;
  int dx = to.x - from.x, dy = to.y - from.y;
  const int xstep = dx < 0 ? -1 : 1;
  const int ystep = dy < 0 ? -1 : 1;
  dx = std::abs(dx);
  dy = std::abs(dy);
  const int ddx = 2 * dx, ddy = 2 * dy;

  if (!visit(Cell{x, y})) return;
  if (ddx >= ddy) {
    int error = dx, prev = dx;
    for (int i = 0; i < dx; ++i) {
      x += xstep;
      error += ddy;
      if (error > ddx) {
        y += ystep;
        error -= ddx;
        if (error + prev < ddx) {
          if (!visit(Cell{x, y - ystep})) return;
        } else if (error + prev > ddx) {
          if (!visit(Cell{x - xstep, y})) return;
        } else {
          if (!visit(Cell{x, y - ystep})) return;
          if (!visit(Cell{x - xstep, y})) return;
        }
      }
      if (!visit(Cell{x, y})) return;
      prev = error;
    }
  } else {
    int error = dy, prev = dy;
    for (int i = 0; i < dy; ++i) {
      y += ystep;
      error += ddx;
      if (error > ddy) {
        x += xstep;
        error -= ddy;
        if (error + prev < ddy) {
          if (!visit(Cell{x - xstep, y})) return;
        } else if (error + prev > ddy) {
          if (!visit(Cell{x, y - ystep})) return;
        } else {
          if (!visit(Cell{x - xstep, y})) return;
          if (!visit(Cell{x, y - ystep})) return;
        }
      }
      if (!visit(Cell{x, y})) return;
      prev = error;
    }
  }
}

inline bool blocks_sight(const GridMap& map, Cell c, LosBlocking mode) {
  if (!map.obstacle(c)) return false;
  return mode == LosBlocking::all_obstacles || map.nfz(c);
}

inline int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

// v(p, x, B): inside the FoV square and no blocking cell strictly between.
inline bool visible(const GridMap& map, const FovConfig& fov, Cell p, Cell x) {
  if (p == x) return true;
  if (!map.contains(x) || chebyshev(p, x) > fov.half_width) return false;
  bool clear = true;
  supercover_line(p, x, [&](Cell c) {
    if (c == p || c == x) return true;
    if (blocks_sight(map, c, fov.blocking)) {
      clear = false;
      return false;
    }
    return true;
  });
  return clear;
}

// Remaining coverage targets. Monotone: cells only ever leave the set.
class TargetMap {
 public:
  TargetMap() = default;
  explicit TargetMap(int cell_count) : flags_(cell_count, 0) {}

  static TargetMap from_cells(const GridMap& map, const std::vector<Cell>& cells) {
    TargetMap t(map.cell_count());
    for (Cell c : cells) {
      if (!map.contains(c)) throw std::out_of_range("target outside map");
      if (map.obstacle(c)) throw std::invalid_argument("target on obstacle cell");
      t.insert(map.index(c));
    }
    t.total0_ = t.count_;
    return t;
  }

  void insert(int idx) {
    if (!flags_[idx]) {
      flags_[idx] = 1;
      ++count_;
    }
  }
  void erase(int idx) {
    if (flags_[idx]) {
      flags_[idx] = 0;
      --count_;
    }
  }

  bool contains(int idx) const { return flags_[idx] != 0; }
  int count() const { return count_; }
  bool empty() const { return count_ == 0; }
  int total0() const { return total0_; }
  void set_total0(int n) { total0_ = n; }
  int cell_count() const { return static_cast<int>(flags_.size()); }

  // Sorted cell indices; doubles as the canonical form of the set.
  std::vector<int> indices() const {
    std::vector<int> out;
    out.reserve(count_);
    for (int i = 0; i < cell_count(); ++i)
      if (flags_[i]) out.push_back(i);
    return out;
  }

  const std::vector<std::uint8_t>& flags() const { return flags_; }

  friend bool operator==(const TargetMap& a, const TargetMap& b) {
    return a.flags_ == b.flags_ && a.total0_ == b.total0_;
  }

 private:
  std::vector<std::uint8_t> flags_;
  int count_ = 0;
  int total0_ = 0;
};

// Removes every target visible from `p_next`. Returns the number removed.
inline int update_targets_in_place(const GridMap& map, const FovConfig& fov, TargetMap& targets, Cell p_next) {
  if (targets.empty()) return 0;
  int removed = 0;
  const int r = fov.half_width;
  for (int y = std::max(0, p_next.y - r); y <= std::min(map.height() - 1, p_next.y + r); ++y) {
    for (int x = std::max(0, p_next.x - r); x <= std::min(map.width() - 1, p_next.x + r); ++x) {
      const int idx = map.index({x, y});
      if (targets.contains(idx) && visible(map, fov, p_next, {x, y})) {
        targets.erase(idx);
        ++removed;
      }
    }
  }
  return removed;
}

inline TargetMap update_targets(const GridMap& map, const FovConfig& fov, TargetMap targets, Cell p_next) {
  update_targets_in_place(map, fov, targets, p_next);
  return targets;
}

enum class Objective { recharge, no_recharge };

// One episode instance.
struct Scenario {
  std::shared_ptr<const GridMap> map;
  std::string map_path;  // provenance for scenario files; may be empty
  TargetMap targets0;
  Cell p0;
  int b0 = 0;
  bool l0 = true;
  int timeout = 0;
  std::optional<std::uint64_t> seed;

  UavState initial_state() const { return {p0, b0, l0}; }
};

// Timeout scaled linearly from 1000 steps at m = 32, rounded up to a multiple of 50.
inline int default_timeout(int m) {
  const int raw = (1000 * m + 31) / 32;
  return (raw + 49) / 50 * 50;
}

struct GeneratorConfig {
  std::pair<int, int> n_patches_range{1, 5};
  std::pair<int, int> patch_side_range{3, 8};
  // Scale patch sides by m/32 (rounded, at least 1) so the ranges describe a 32x32 map.
  bool scale_to_map = true;
  double beta = 0.5;  // minimum initial charge fraction
  int b_max = 100;
  Objective objective = Objective::recharge;
  int timeout = 0;  // 0: default_timeout(m)
  int max_retries = 64;
  // When set, targets are exactly these cells (minus obstacles) instead of random patches.
  std::optional<std::vector<Cell>> fixed_targets;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::pair<int, int> scaled_side_range(const GeneratorConfig& cfg, int m) {
  if (!cfg.scale_to_map) return cfg.patch_side_range;
  auto scale = [m](int s) { return std::max(1, static_cast<int>(std::lround(s * m / 32.0))); };
  return {scale(cfg.patch_side_range.first), scale(cfg.patch_side_range.second)};
}

inline int min_initial_battery(double beta, int b_max) {
  return static_cast<int>(std::ceil(beta * b_max - 1e-9));
}

// Deterministic given (map, seed, cfg).
inline Scenario generate_scenario(std::shared_ptr<const GridMap> map, std::uint64_t seed,
                                  const GeneratorConfig& cfg) {
  const auto landing = map->landing_cells();
  if (landing.empty()) throw GenerationError("map has no landing cell");
  Rng rng(seed);

  Scenario sc;
  sc.map = map;
  sc.seed = seed;
  sc.p0 = map->cell(landing[uniform_below(rng, landing.size())]);
  sc.b0 = uniform_int(rng, min_initial_battery(cfg.beta, cfg.b_max), cfg.b_max);
  sc.l0 = cfg.objective == Objective::recharge;
  sc.timeout = cfg.timeout > 0 ? cfg.timeout : default_timeout(map->size());

  if (cfg.fixed_targets) {
    std::vector<Cell> cells;
    for (Cell c : *cfg.fixed_targets)
      if (!map->obstacle(c)) cells.push_back(c);
    sc.targets0 = TargetMap::from_cells(*map, cells);
    if (sc.targets0.empty()) throw GenerationError("fixed target set is empty after removing obstacles");
    return sc;
  }

  const auto [side_lo, side_hi] = scaled_side_range(cfg, map->size());
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    TargetMap t(map->cell_count());
    const int n = uniform_int(rng, cfg.n_patches_range.first, cfg.n_patches_range.second);
    for (int k = 0; k < n; ++k) {
      const int w = std::min(uniform_int(rng, side_lo, side_hi), map->width());
      const int h = std::min(uniform_int(rng, side_lo, side_hi), map->height());
      const int x0 = uniform_int(rng, 0, map->width() - w);
      const int y0 = uniform_int(rng, 0, map->height() - h);
      for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x)
          if (!map->obstacle(Cell{x, y})) t.insert(map->index({x, y}));
    }
    if (!t.empty()) {
      t.set_total0(t.count());
      sc.targets0 = std::move(t);
      return sc;
    }
  }
  throw GenerationError("target generation produced an empty set after " +
                        std::to_string(cfg.max_retries + 1) + " attempts");
}

}  // namespace covplan
