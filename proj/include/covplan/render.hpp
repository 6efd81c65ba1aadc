#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "covplan/coverage.hpp"
#include "covplan/environment.hpp"
#include "covplan/grid_map.hpp"

namespace covplan {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  Image(int w, int h, Rgb fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline Rgb blend(Rgb a, Rgb b, double t) {
  Rgb out;
  for (int i = 0; i < 3; ++i) out[i] = static_cast<std::uint8_t>(a[i] * (1.0 - t) + b[i] * t + 0.5);
  return out;
}

inline constexpr std::array<Rgb, 6> kPassColours{{{230, 80, 60}, {60, 120, 230}, {60, 170, 80},
                                                  {200, 150, 30}, {150, 70, 200}, {40, 170, 170}}};

inline Rgb base_colour(CellKind k) {
  switch (k) {
    case CellKind::empty: return {245, 245, 245};
    case CellKind::landing: return {90, 200, 90};
    case CellKind::nfz: return {240, 170, 170};
    case CellKind::low_obstacle: return {150, 150, 150};
    case CellKind::high_obstacle: return {90, 60, 60};
  }
  return {0, 0, 0};
}

}  // namespace detail

// Map, initial targets and per-pass coverage shading, then the trajectory and
// the final field of view on top. Map north is image up. `scale` pixels per cell.
inline Image render_trace(const GridMap& map, const TargetMap& targets0, const std::vector<TraceStep>& trace,
                          const FovConfig& fov, int scale = 8) {
  Image img(map.width() * scale, map.height() * scale, {0, 0, 0});
  // pass index that first covered each target cell, -1 = spawn, -2 = never
  std::vector<int> covered_by(map.cell_count(), -2);
  TargetMap remaining = targets0;
  int pass = -1;
  for (const auto& s : trace) {
    if (s.action && *s.action == Action::take_off) ++pass;
    for (int idx : remaining.indices())
      if (visible(map, fov, s.p, map.cell(idx))) {
        covered_by[idx] = pass;
        remaining.erase(idx);
      }
  }

  auto fill_cell = [&](Cell c, Rgb colour, double alpha) {
    const int py0 = (map.height() - 1 - c.y) * scale;
    for (int dy = 0; dy < scale; ++dy)
      for (int dx = 0; dx < scale; ++dx) {
        auto& px = img.at(c.x * scale + dx, py0 + dy);
        px = detail::blend(px, colour, alpha);
      }
  };

  for (int idx = 0; idx < map.cell_count(); ++idx) {
    const Cell c = map.cell(idx);
    fill_cell(c, detail::base_colour(map.kind(c)), 1.0);
    if (!targets0.contains(idx)) continue;
    if (covered_by[idx] == -2)
      fill_cell(c, {250, 220, 40}, 0.8);
    else if (covered_by[idx] == -1)
      fill_cell(c, {120, 120, 120}, 0.35);
    else
      fill_cell(c, detail::kPassColours[covered_by[idx] % detail::kPassColours.size()], 0.45);
  }
  if (!trace.empty()) {
    const Cell last = trace.back().p;
    const int r = fov.half_width;
    for (int y = last.y - r; y <= last.y + r; ++y)
      for (int x = last.x - r; x <= last.x + r; ++x)
        if (map.contains({x, y}) && visible(map, fov, last, {x, y})) fill_cell({x, y}, {255, 255, 255}, 0.3);
  }
  // Trajectory as a dot per visited cell, darker where it was landed.
  for (const auto& s : trace) {
    const int cx = s.p.x * scale + scale / 2;
    const int cy = (map.height() - 1 - s.p.y) * scale + scale / 2;
    const int rad = std::max(1, scale / 4);
    for (int dy = -rad; dy <= rad; ++dy)
      for (int dx = -rad; dx <= rad; ++dx)
        if (cx + dx >= 0 && cy + dy >= 0 && cx + dx < img.width && cy + dy < img.height)
          img.at(cx + dx, cy + dy) = s.l ? Rgb{20, 90, 20} : Rgb{20, 20, 20};
  }
  return img;
}

// Binary PPM (P6).
inline std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size() * 3);
  for (const auto& p : img.pixels) out.append(reinterpret_cast<const char*>(p.data()), 3);
  return out;
}

// Text rendering, north row first. Visited cells are '*', the final position '@',
// targets still uncovered at the end 'o'.
inline std::string render_ascii(const GridMap& map, const TargetMap& targets0, const std::vector<TraceStep>& trace,
                                const FovConfig& fov) {
  std::vector<char> grid(map.cell_count());
  for (int idx = 0; idx < map.cell_count(); ++idx) grid[idx] = char_from_kind(map.kind(map.cell(idx)));
  TargetMap remaining = targets0;
  for (const auto& s : trace) {
    for (int idx : remaining.indices())
      if (visible(map, fov, s.p, map.cell(idx))) remaining.erase(idx);
  }
  for (int idx : remaining.indices()) grid[idx] = 'o';
  for (const auto& s : trace) grid[map.index(s.p)] = '*';
  if (!trace.empty()) grid[map.index(trace.back().p)] = '@';
  std::string out;
  for (int y = map.height() - 1; y >= 0; --y) {
    for (int x = 0; x < map.width(); ++x) out += grid[map.index({x, y})];
    out += '\n';
  }
  return out;
}

}  // namespace covplan
