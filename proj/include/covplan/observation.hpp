#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "covplan/coverage.hpp"
#include "covplan/dynamics.hpp"
#include "covplan/grid_map.hpp"
#include "covplan/rng.hpp"

namespace covplan {

// Exponentially decaying visitation layer. The current cell is always 1,
// everything else is alpha^(steps since last visit).
class PositionHistory {
 public:
  PositionHistory() = default;
  PositionHistory(const GridMap& map, Cell p0, double alpha)
      : width_(map.width()), alpha_(alpha), h_(map.cell_count(), 0.0) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("history decay must lie in (0, 1)");
    h_[index(p0)] = 1.0;
  }

  void update(Cell p_next) {
    for (double& v : h_) v *= alpha_;
    h_[index(p_next)] = 1.0;
  }

  double operator()(Cell c) const { return h_[index(c)]; }
  double alpha() const { return alpha_; }
  const std::vector<double>& values() const { return h_; }

 private:
  int index(Cell c) const { return c.y * width_ + c.x; }

  int width_ = 0;
  double alpha_ = 0.99;
  std::vector<double> h_;
};

inline PositionHistory update_history(PositionHistory h, Cell p_next) {
  h.update(p_next);
  return h;
}

enum class HistoryMode { history, none, random_layer };
enum class Pooling { mean, max };

inline std::string_view history_mode_name(HistoryMode m) {
  switch (m) {
    case HistoryMode::history: return "history";
    case HistoryMode::none: return "none";
    case HistoryMode::random_layer: return "random_layer";
  }
  return "?";
}

inline std::optional<HistoryMode> history_mode_from_name(std::string_view s) {
  if (s == "history") return HistoryMode::history;
  if (s == "none") return HistoryMode::none;
  if (s == "random_layer") return HistoryMode::random_layer;
  return std::nullopt;
}

struct ObservationConfig {
  int global_scale = 3;  // g
  int local_size = 17;   // l, odd
  HistoryMode history_mode = HistoryMode::history;
  double alpha = 0.99;
  Pooling pooling = Pooling::mean;

  void validate(int m) const {
    if (global_scale < 1) throw std::invalid_argument("global map scale must be >= 1");
    if (local_size < 1 || local_size % 2 == 0) throw std::invalid_argument("local map size must be odd");
    if (local_size > 2 * m - 1) throw std::invalid_argument("local map size exceeds centred map size");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("history decay must lie in (0, 1)");
  }
};

// Map layer order inside every observation tensor.
enum Layer : int { kLandingLayer = 0, kNfzLayer, kObstacleLayer, kTargetLayer, kHistoryLayer };
inline constexpr int kLayerCount = 5;

// Row-major [row][col][layer] float tensor; row index follows map y.
struct MapTensor {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  MapTensor() = default;
  MapTensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c * kLayerCount, 0.0f) {}

  float& at(int row, int col, int layer) { return data[(static_cast<std::size_t>(row) * cols + col) * kLayerCount + layer]; }
  float at(int row, int col, int layer) const {
    return data[(static_cast<std::size_t>(row) * cols + col) * kLayerCount + layer];
  }

  friend bool operator==(const MapTensor&, const MapTensor&) = default;
};

struct Observation {
  MapTensor global;
  MapTensor local;
  std::array<float, 2> scalars{};  // battery / b_max, landed

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Agent-centred canvas of side 2m-1. Cells outside the map are obstacle + NFZ.
inline MapTensor centered_canvas(const GridMap& map, const TargetMap& targets, const std::vector<double>& history_layer,
                                 Cell p) {
  const int m = map.size();
  const int mc = 2 * m - 1;
  MapTensor canvas(mc, mc);
  for (int cy = 0; cy < mc; ++cy) {
    for (int cx = 0; cx < mc; ++cx) {
      const Cell c{p.x + cx - (m - 1), p.y + cy - (m - 1)};
      if (!map.contains(c)) {
        canvas.at(cy, cx, kObstacleLayer) = 1.0f;
        canvas.at(cy, cx, kNfzLayer) = 1.0f;
        continue;
      }
      const int idx = map.index(c);
      canvas.at(cy, cx, kLandingLayer) = map.landing(idx) ? 1.0f : 0.0f;
      canvas.at(cy, cx, kNfzLayer) = map.nfz(idx) ? 1.0f : 0.0f;
      canvas.at(cy, cx, kObstacleLayer) = map.obstacle(idx) ? 1.0f : 0.0f;
      canvas.at(cy, cx, kTargetLayer) = targets.contains(idx) ? 1.0f : 0.0f;
      canvas.at(cy, cx, kHistoryLayer) = static_cast<float>(history_layer[idx]);
    }
  }
  return canvas;
}

// g x g block pooling. The canvas is edge-replicated up to a multiple of g.
inline MapTensor downsample(const MapTensor& canvas, int g, Pooling pooling) {
  const int out_rows = (canvas.rows + g - 1) / g;
  const int out_cols = (canvas.cols + g - 1) / g;
  MapTensor out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      for (int layer = 0; layer < kLayerCount; ++layer) {
        double acc = pooling == Pooling::mean ? 0.0 : -1.0;
        for (int dr = 0; dr < g; ++dr) {
          for (int dc = 0; dc < g; ++dc) {
            const int sr = std::min(r * g + dr, canvas.rows - 1);
            const int sc = std::min(c * g + dc, canvas.cols - 1);
            const double v = canvas.at(sr, sc, layer);
            acc = pooling == Pooling::mean ? acc + v : std::max(acc, v);
          }
        }
        out.at(r, c, layer) = static_cast<float>(pooling == Pooling::mean ? acc / (g * g) : acc);
      }
    }
  }
  return out;
}

inline MapTensor central_crop(const MapTensor& canvas, int l) {
  MapTensor out(l, l);
  const int off = (canvas.rows - l) / 2;
  for (int r = 0; r < l; ++r)
    for (int c = 0; c < l; ++c)
      for (int layer = 0; layer < kLayerCount; ++layer) out.at(r, c, layer) = canvas.at(off + r, off + c, layer);
  return out;
}

// Global-local observation. `rng` is only consulted in random_layer mode.
inline Observation build_observation(const GridMap& map, const TargetMap& targets, const PositionHistory& history,
                                     const UavState& state, int b_max, const ObservationConfig& cfg,
                                     Rng* rng = nullptr) {
  std::vector<double> layer;
  switch (cfg.history_mode) {
    case HistoryMode::history: layer = history.values(); break;
    case HistoryMode::none: layer.assign(map.cell_count(), 0.0); break;
    case HistoryMode::random_layer:
      if (!rng) throw std::invalid_argument("random history layer needs an RNG");
      layer.resize(map.cell_count());
      for (double& v : layer) v = uniform_unit(*rng);
      break;
  }
  const MapTensor canvas = centered_canvas(map, targets, layer, state.position);
  Observation obs;
  obs.global = downsample(canvas, cfg.global_scale, cfg.pooling);
  obs.local = central_crop(canvas, cfg.local_size);
  obs.scalars = {static_cast<float>(state.battery) / static_cast<float>(b_max), state.landed ? 1.0f : 0.0f};
  return obs;
}

// Serialization: one JSON header line, then little-endian float32 data for
// global, local and scalars in that order.
//   {"dtype":"<f4","global":[R,C,5],"local":[l,l,5],"scalars":2}\n
inline std::string observation_header(const Observation& obs) {
  return "{\"dtype\":\"<f4\",\"global\":[" + std::to_string(obs.global.rows) + "," + std::to_string(obs.global.cols) +
         ",5],\"local\":[" + std::to_string(obs.local.rows) + "," + std::to_string(obs.local.cols) +
         ",5],\"scalars\":2}";
}

namespace detail {

inline void append_le_floats(std::string& out, const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

}  // namespace detail

inline std::string serialize_observation(const Observation& obs) {
  std::string out = observation_header(obs);
  out.push_back('\n');
  detail::append_le_floats(out, obs.global.data.data(), obs.global.data.size());
  detail::append_le_floats(out, obs.local.data.data(), obs.local.data.size());
  detail::append_le_floats(out, obs.scalars.data(), obs.scalars.size());
  return out;
}

// Inverse of serialize_observation. Throws std::invalid_argument on malformed input.
inline Observation deserialize_observation(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw std::invalid_argument("observation header missing");
  const std::string_view header = bytes.substr(0, nl);
  auto read_dims = [&](std::string_view key) {
    const auto k = header.find("\"" + std::string(key) + "\":[");
    if (k == std::string_view::npos) throw std::invalid_argument("observation header lacks " + std::string(key));
    int r = 0, c = 0;
    if (std::sscanf(std::string(header.substr(k + key.size() + 4)).c_str(), "%d,%d", &r, &c) != 2)
      throw std::invalid_argument("bad observation dims");
    return std::pair{r, c};
  };
  const auto [gr, gc] = read_dims("global");
  const auto [lr, lc] = read_dims("local");
  Observation obs;
  obs.global = MapTensor(gr, gc);
  obs.local = MapTensor(lr, lc);
  const std::size_t n = obs.global.data.size() + obs.local.data.size() + 2;
  std::string_view payload = bytes.substr(nl + 1);
  if (payload.size() != n * 4) throw std::invalid_argument("observation payload has wrong size");
  auto read = [&](std::size_t i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[i * 4 + b])) << (8 * b);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  };
  std::size_t i = 0;
  for (float& f : obs.global.data) f = read(i++);
  for (float& f : obs.local.data) f = read(i++);
  obs.scalars[0] = read(i++);
  obs.scalars[1] = read(i++);
  return obs;
}

}  // namespace covplan
