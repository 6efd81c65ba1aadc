#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "covplan/config.hpp"
#include "covplan/environment.hpp"
#include "covplan/heuristic.hpp"
#include "covplan/io.hpp"
#include "covplan/trainer.hpp"

namespace covplan {

// Line-oriented JSON protocol driving one Environment, for out-of-process
// bindings. One request object per line, one response object per line.
//
//   {"cmd":"reset","seed":<uint|null>}
//       -> {"ok":true,"obs":<hex>,"info":{"seed","p0","b0","timeout","mask"}}
//   {"cmd":"step","action":<0..6>}
//       -> {"ok":true,"obs":<hex>,"reward","terminated","truncated",
//           "info":{"t","p","b","l","remaining","crash_reason","mask"}}
//   {"cmd":"close"} -> {"ok":true}
//   anything invalid -> {"ok":false,"error":<message>}
//
// "obs" is the hex encoding of serialize_observation(), byte for byte.
// terminated means solved or crashed, truncated means timeout.

inline std::string hex_encode(const std::string& bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xF]);
  }
  return out;
}

inline std::string hex_decode(const std::string& hex) {
  if (hex.size() % 2) throw std::invalid_argument("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  std::string out(hex.size() / 2, '\0');
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<char>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

inline nlohmann::json mask_json(const ActionMask& m) {
  nlohmann::json a = nlohmann::json::array();
  for (bool b : m.allowed) a.push_back(b ? 1 : 0);
  return a;
}

class EnvSession {
 public:
  EnvSession(GlobalConfig cfg, std::shared_ptr<const GridMap> map, std::string map_path = {})
      : cfg_(std::move(cfg)), map_(std::move(map)), map_path_(std::move(map_path)), env_(cfg_.env_config()) {
    cfg_.env.observation.validate(map_->size());
  }

  nlohmann::json handle(const nlohmann::json& req) {
    try {
      if (!req.is_object() || !req.contains("cmd") || !req["cmd"].is_string())
        throw std::invalid_argument("request needs a string 'cmd'");
      const auto cmd = req["cmd"].get<std::string>();
      if (closed_) throw std::logic_error("session is closed");
      if (cmd == "reset") return reset(req);
      if (cmd == "step") return step(req);
      if (cmd == "close") {
        closed_ = true;
        return {{"ok", true}};
      }
      throw std::invalid_argument("unknown cmd '" + cmd + "'");
    } catch (const std::exception& e) {
      return {{"ok", false}, {"error", e.what()}};
    }
  }

  // Reads requests until EOF or close; returns the number handled.
  int serve(std::istream& in, std::ostream& out) {
    int n = 0;
    std::string line;
    while (!closed_ && std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json resp;
      try {
        resp = handle(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        resp = {{"ok", false}, {"error", std::string("malformed request: ") + e.what()}};
      }
      out << resp.dump() << '\n' << std::flush;
      ++n;
    }
    return n;
  }

  bool closed() const { return closed_; }
  bool active() const { return active_; }
  const Environment& env() const { return env_; }

 private:
  nlohmann::json reset(const nlohmann::json& req) {
    std::uint64_t seed;
    if (req.contains("seed") && !req["seed"].is_null()) {
      seed = req["seed"].get<std::uint64_t>();
    } else {
      std::random_device rd;
      seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    Scenario sc = generate_scenario(map_, seed, cfg_.generator_config());
    sc.map_path = map_path_;
    env_.reset(sc, seed);
    active_ = !env_.done();
    nlohmann::json info{{"seed", seed},
                        {"p0", cell_json(sc.p0)},
                        {"b0", sc.b0},
                        {"timeout", sc.timeout},
                        {"mask", mask_json(env_.current_mask())}};
    return {{"ok", true}, {"obs", hex_encode(serialize_observation(env_.observe()))}, {"info", info}};
  }

  nlohmann::json step(const nlohmann::json& req) {
    if (!active_) throw std::logic_error("no episode in flight; send reset first");
    if (!req.contains("action") || !req["action"].is_number_integer())
      throw std::invalid_argument("step needs an integer 'action'");
    const int a = req["action"].get<int>();
    if (a < 0 || a >= kActionCount) throw std::out_of_range("action must lie in 0..6");
    const StepResult r = env_.step(static_cast<Action>(a));
    active_ = !env_.done();
    const auto& s = env_.state();
    nlohmann::json info{{"t", env_.steps()},
                        {"p", cell_json(s.position)},
                        {"b", s.battery},
                        {"l", s.landed},
                        {"remaining", env_.targets().count()},
                        {"solved", r.solved},
                        {"mask", mask_json(env_.current_mask())}};
    info["crash_reason"] =
        r.crash_reason ? nlohmann::json(std::string(crash_reason_name(*r.crash_reason))) : nlohmann::json(nullptr);
    return {{"ok", true},
            {"obs", hex_encode(serialize_observation(env_.observe()))},
            {"reward", r.reward},
            {"terminated", r.terminated},
            {"truncated", r.truncated},
            {"info", info}};
  }

  GlobalConfig cfg_;
  std::shared_ptr<const GridMap> map_;
  std::string map_path_;
  Environment env_;
  bool active_ = false;
  bool closed_ = false;
};

// Scripted rollout through the protocol: resets with `seed`, `seed+1`, ...
// and steps with the heuristic until `steps` step requests were issued.
// Each output line is {"request":..., "response":...}.
inline void write_golden_trace(EnvSession& session, std::uint64_t seed, int steps, std::ostream& out) {
  auto exchange = [&](const nlohmann::json& req) {
    const auto resp = session.handle(req);
    out << nlohmann::json{{"request", req}, {"response", resp}}.dump() << '\n';
    if (!resp.at("ok").get<bool>()) throw std::runtime_error("golden trace: " + resp.at("error").get<std::string>());
    return resp;
  };
  HeuristicController ctl;
  std::uint64_t next_seed = seed;
  int issued = 0;
  while (issued < steps) {
    if (!session.active()) {
      exchange({{"cmd", "reset"}, {"seed", next_seed++}});
      ctl.reset();
      continue;
    }
    const Action a = ctl.next(session.env());
    exchange({{"cmd", "step"}, {"action", static_cast<int>(a)}});
    ++issued;
  }
  exchange({{"cmd", "close"}});
}

}  // namespace covplan
