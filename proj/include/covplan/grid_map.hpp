#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace covplan {

// Grid coordinate. x grows east, y grows north; row y = 0 is the southern edge.
struct Cell {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr Cell operator+(Cell a, Cell b) { return {a.x + b.x, a.y + b.y}; }
};

// Neighbour offsets in action order: east, north, west, south.
inline constexpr std::array<Cell, 4> kNeighbourOffsets{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

enum class CellKind : std::uint8_t { empty, landing, nfz, low_obstacle, high_obstacle };

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& what)
      : std::runtime_error(format(line, column, what)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(int line, int column, const std::string& what) {
    std::ostringstream os;
    os << "line " << line;
    if (column > 0) os << ", column " << column;
    os << ": " << what;
    return os.str();
  }

  int line_;
  int column_;
};

// Static world: obstacle (B), landing (L) and no-fly (Z) layers.
//
// Cells are only ever set through CellKind, so the layer invariants hold by
// construction: a landing cell is never an obstacle or NFZ, and a high
// obstacle is B and Z together.
class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("map dimensions must be positive");
    flags_.assign(static_cast<std::size_t>(width) * height, 0);
  }

  static GridMap square(int m) { return GridMap(m, m); }

  // rows[0] is row y = 0. Uses the map-file cell alphabet.
  static GridMap from_rows(const std::vector<std::string>& rows);

  int width() const { return width_; }
  int height() const { return height_; }
  bool is_square() const { return width_ == height_; }
  // Side length m; only meaningful for square maps.
  int size() const { return width_; }
  int cell_count() const { return width_ * height_; }

  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  int index(Cell c) const { return c.y * width_ + c.x; }
  Cell cell(int idx) const { return {idx % width_, idx / width_}; }

  bool obstacle(Cell c) const { return flags_[index(c)] & kObstacle; }
  bool landing(Cell c) const { return flags_[index(c)] & kLanding; }
  bool nfz(Cell c) const { return flags_[index(c)] & kNfz; }
  bool obstacle(int idx) const { return flags_[idx] & kObstacle; }
  bool landing(int idx) const { return flags_[idx] & kLanding; }
  bool nfz(int idx) const { return flags_[idx] & kNfz; }

  // Out-of-bounds cells behave as NFZ for motion purposes.
  bool blocked_for_flight(Cell c) const { return !contains(c) || nfz(c); }

  CellKind kind(Cell c) const {
    const auto f = flags_[index(c)];
    if (f & kLanding) return CellKind::landing;
    if ((f & kObstacle) && (f & kNfz)) return CellKind::high_obstacle;
    if (f & kObstacle) return CellKind::low_obstacle;
    if (f & kNfz) return CellKind::nfz;
    return CellKind::empty;
  }

  void set(Cell c, CellKind k) {
    if (!contains(c)) throw std::out_of_range("cell outside map");
    std::uint8_t f = 0;
    switch (k) {
      case CellKind::empty: break;
      case CellKind::landing: f = kLanding; break;
      case CellKind::nfz: f = kNfz; break;
      case CellKind::low_obstacle: f = kObstacle; break;
      case CellKind::high_obstacle: f = kObstacle | kNfz; break;
    }
    flags_[index(c)] = f;
  }

  std::vector<int> landing_cells() const {
    std::vector<int> out;
    for (int i = 0; i < cell_count(); ++i)
      if (landing(i)) out.push_back(i);
    return out;
  }

  // Metadata only; dynamics never read these.
  double cell_width = 1.0;
  double altitude = 1.0;

  friend bool operator==(const GridMap& a, const GridMap& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.flags_ == b.flags_;
  }

 private:
  static constexpr std::uint8_t kObstacle = 1;
  static constexpr std::uint8_t kLanding = 2;
  static constexpr std::uint8_t kNfz = 4;

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> flags_;
};

inline std::optional<CellKind> kind_from_char(char ch) {
  switch (ch) {
    case '.': return CellKind::empty;
    case 'L': return CellKind::landing;
    case 'Z': return CellKind::nfz;
    case 'l': return CellKind::low_obstacle;
    case 'h': return CellKind::high_obstacle;
    default: return std::nullopt;
  }
}

inline char char_from_kind(CellKind k) {
  switch (k) {
    case CellKind::empty: return '.';
    case CellKind::landing: return 'L';
    case CellKind::nfz: return 'Z';
    case CellKind::low_obstacle: return 'l';
    case CellKind::high_obstacle: return 'h';
  }
  return '?';
}

inline GridMap GridMap::from_rows(const std::vector<std::string>& rows) {
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("empty map rows");
  const int w = static_cast<int>(rows.front().size());
  GridMap map(w, static_cast<int>(rows.size()));
  for (int y = 0; y < map.height(); ++y) {
    if (static_cast<int>(rows[y].size()) != w) throw std::invalid_argument("ragged map rows");
    for (int x = 0; x < w; ++x) {
      auto k = kind_from_char(rows[y][x]);
      if (!k) throw std::invalid_argument(std::string("unknown cell character '") + rows[y][x] + "'");
      map.set({x, y}, *k);
    }
  }
  return map;
}

namespace detail {

inline std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Map file:
//   cpp-map v1
//   size <m>
//   <m lines of m characters>      first body line is row y = 0
// Cell alphabet: '.' empty, 'L' landing, 'Z' NFZ, 'l' low obstacle, 'h' high obstacle.
// One character per cell, so a cell can never be landing and obstacle/NFZ at
// once; an attempt such as "Lh" for one cell is a too-long row.
// Trailing blank lines and '#' comment lines in the body are ignored.
inline GridMap parse_map(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(detail::trim_cr(text.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  if (lines.empty() || lines[0] != "cpp-map v1") throw ParseError(1, 0, "expected header 'cpp-map v1'");
  if (lines.size() < 2 || lines[1].substr(0, 5) != "size ")
    throw ParseError(2, 0, "expected 'size <m>'");

  int m = 0;
  {
    std::string num(lines[1].substr(5));
    std::size_t used = 0;
    try {
      m = std::stoi(num, &used);
    } catch (const std::exception&) {
      throw ParseError(2, 6, "size is not an integer");
    }
    if (used != num.size() || m <= 0) throw ParseError(2, 6, "size must be a positive integer");
  }

  std::vector<std::string_view> body;
  std::vector<int> body_line_no;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (!lines[i].empty() && lines[i][0] == '#') continue;
    body.push_back(lines[i]);
    body_line_no.push_back(static_cast<int>(i) + 1);
  }
  if (static_cast<int>(body.size()) != m)
    throw ParseError(static_cast<int>(lines.size()), 0,
                     "expected " + std::to_string(m) + " body rows, found " + std::to_string(body.size()));

  GridMap map(m, m);
  for (int y = 0; y < m; ++y) {
    const auto row = body[y];
    const int line = body_line_no[y];
    if (static_cast<int>(row.size()) != m)
      throw ParseError(line, static_cast<int>(std::min<std::size_t>(row.size(), m)) + 1,
                       "row has " + std::to_string(row.size()) + " cells, expected " + std::to_string(m));
    for (int x = 0; x < m; ++x) {
      auto k = kind_from_char(row[x]);
      if (!k) throw ParseError(line, x + 1, std::string("unknown cell character '") + row[x] + "'");
      map.set({x, y}, *k);
    }
  }
  return map;
}

inline std::string format_map(const GridMap& map) {
  std::string out = "cpp-map v1\nsize " + std::to_string(map.width()) + "\n";
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) out += char_from_kind(map.kind({x, y}));
    out += '\n';
  }
  return out;
}

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

// Per-cell step distance to the nearest landing zone, landing cells = 1.
class DistanceField {
 public:
  DistanceField() = default;
  DistanceField(int width, std::vector<int> values) : width_(width), d_(std::move(values)) {}

  int operator()(Cell c) const { return d_[c.y * width_ + c.x]; }
  int at(int idx) const { return d_[idx]; }
  // Unreachable for cells outside the map.
  int at_or_unreachable(Cell c, int height) const {
    if (c.x < 0 || c.y < 0 || c.x >= width_ || c.y >= height) return kUnreachable;
    return (*this)(c);
  }
  const std::vector<int>& values() const { return d_; }
  int width() const { return width_; }

  friend bool operator==(const DistanceField&, const DistanceField&) = default;

 private:
  int width_ = 0;
  std::vector<int> d_;
};

// Multi-source BFS seeded at landing cells with value 1. NFZ cells are never
// entered, which is the fixed point of
//   D = 1 on L,  inf on Z,  1 + min(4-neighbours) elsewhere.
inline DistanceField landing_distance_field(const GridMap& map) {
  std::vector<int> d(map.cell_count(), kUnreachable);
  std::deque<int> frontier;
  for (int i : map.landing_cells()) {
    d[i] = 1;
    frontier.push_back(i);
  }
  while (!frontier.empty()) {
    const int cur = frontier.front();
    frontier.pop_front();
    const Cell c = map.cell(cur);
    for (const Cell off : kNeighbourOffsets) {
      const Cell n = c + off;
      if (!map.contains(n) || map.nfz(n)) continue;
      const int ni = map.index(n);
      if (d[ni] != kUnreachable) continue;
      d[ni] = d[cur] + 1;
      frontier.push_back(ni);
    }
  }
  return DistanceField(map.width(), std::move(d));
}

// Single-source BFS step distances over non-NFZ cells. The source itself is
// 0 even if it lies in an NFZ; callers are expected not to ask for that.
inline std::vector<int> distances_from(const GridMap& map, Cell from) {
  std::vector<int> d(map.cell_count(), kUnreachable);
  if (!map.contains(from)) return d;
  std::deque<int> frontier{map.index(from)};
  d[map.index(from)] = 0;
  while (!frontier.empty()) {
    const int cur = frontier.front();
    frontier.pop_front();
    const Cell c = map.cell(cur);
    for (const Cell off : kNeighbourOffsets) {
      const Cell n = c + off;
      if (!map.contains(n) || map.nfz(n)) continue;
      const int ni = map.index(n);
      if (d[ni] != kUnreachable) continue;
      d[ni] = d[cur] + 1;
      frontier.push_back(ni);
    }
  }
  return d;
}

struct Path {
  int steps = 0;
  std::vector<Cell> cells;  // both endpoints included
};

// Minimal 4-neighbour route avoiding NFZ cells. nullopt when `to` is an NFZ
// cell or disconnected from `from`.
inline std::optional<Path> shortest_path(const GridMap& map, Cell from, Cell to) {
  if (!map.contains(from) || !map.contains(to) || map.nfz(to)) return std::nullopt;
  // BFS from the destination so the walk from `from` can greedily descend and
  // pick neighbours in fixed action order.
  const auto d = distances_from(map, to);
  const int start = map.index(from);
  if (d[start] == kUnreachable) return std::nullopt;
  Path path;
  path.steps = d[start];
  path.cells.push_back(from);
  Cell cur = from;
  while (!(cur == to)) {
    for (const Cell off : kNeighbourOffsets) {
      const Cell n = cur + off;
      if (!map.contains(n) || map.nfz(n)) continue;
      if (d[map.index(n)] == d[map.index(cur)] - 1) {
        cur = n;
        break;
      }
    }
    path.cells.push_back(cur);
  }
  return path;
}

}  // namespace covplan
