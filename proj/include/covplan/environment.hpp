#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covplan/coverage.hpp"
#include "covplan/dynamics.hpp"
#include "covplan/grid_map.hpp"
#include "covplan/observation.hpp"
#include "covplan/reward.hpp"
#include "covplan/rng.hpp"
#include "covplan/safety.hpp"

namespace covplan {

struct EnvConfig {
  BatteryModel battery;
  FovConfig fov;
  MaskLevel mask_level = MaskLevel::invariant;
  RewardConfig reward;
  ObservationConfig observation;
  Objective objective = Objective::recharge;
};

// One take-off to landing segment. landing_step is -1 while still airborne.
struct Pass {
  int takeoff_step = 0;
  int landing_step = -1;
  int cells_covered = 0;

  friend bool operator==(const Pass&, const Pass&) = default;
};

struct EpisodeStats {
  int steps = 0;
  bool solved = false;
  bool crashed = false;
  bool truncated = false;
  std::optional<CrashReason> crash_reason;
  int targets0 = 0;
  int remaining = 0;
  int covered_on_ground = 0;  // covered by steps taken outside any pass
  double coverage_ratio = 0.0;
  double undiscounted_return = 0.0;
  std::vector<Pass> passes;
};

// Per-step trajectory record, as written to trace files.
struct TraceStep {
  int t = 0;
  Cell p;
  int b = 0;
  bool l = false;
  std::optional<Action> action;  // empty for the spawn record
  int remaining = 0;
  double reward = 0.0;
};

struct StepResult {
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool solved = false;
  std::optional<CrashReason> crash_reason;
  int covered = 0;
};

class MaskViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Closed-loop episode over one scenario: dynamics, coverage, masking, reward,
// position history and pass bookkeeping.
class Environment {
 public:
  explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {}

  const EnvConfig& config() const { return cfg_; }

  void reset(const Scenario& sc, std::uint64_t noise_seed = 0) {
    if (!sc.map) throw std::invalid_argument("scenario has no map");
    if (sc.map != map_) {
      map_ = sc.map;
      dfield_ = landing_distance_field(*map_);
    }
    scenario_ = sc;
    state_ = sc.initial_state();
    targets_ = sc.targets0;
    history_ = PositionHistory(*map_, state_.position, cfg_.observation.alpha);
    noise_ = Rng(noise_seed);
    steps_ = 0;
    stats_ = EpisodeStats{};
    stats_.targets0 = targets_.count();
    if (!state_.landed) stats_.passes.push_back(Pass{0, -1, 0});
    trace_.clear();
    trace_.push_back(TraceStep{0, state_.position, state_.battery, state_.landed, std::nullopt, targets_.count(), 0.0});
    done_ = false;
    evaluate_termination(false);
  }

  ActionMask current_mask() const { return mask(*map_, dfield_, state_, cfg_.mask_level, cfg_.battery.capacity); }

  StepResult step(Action a) {
    if (done_) throw std::logic_error("step() called on a finished episode");
    if (cfg_.mask_level != MaskLevel::none && !current_mask()[a])
      throw MaskViolation(std::string("action '") + std::string(action_name(a)) + "' is masked at level " +
                          std::string(mask_level_name(cfg_.mask_level)));

    const StepOutcome out = covplan::step(*map_, state_, a, cfg_.battery);
    const int before = targets_.count();
    state_ = out.next;
    ++steps_;

    int covered = 0;
    if (!out.crashed()) {
      covered = update_targets_in_place(*map_, cfg_.fov, targets_, state_.position);
      history_.update(state_.position);
    }

    if (a == Action::take_off && !out.crashed()) stats_.passes.push_back(Pass{steps_, -1, 0});
    if (!stats_.passes.empty() && stats_.passes.back().landing_step < 0) {
      stats_.passes.back().cells_covered += covered;
      if (a == Action::land && !out.crashed()) stats_.passes.back().landing_step = steps_;
    } else {
      stats_.covered_on_ground += covered;
    }

    RewardConfig rc = cfg_.reward;
    if (cfg_.mask_level == MaskLevel::invariant) rc.crash = 0.0;
    StepResult res;
    res.reward = reward(before, targets_.count(), out.crashed(), rc);
    res.covered = covered;
    res.crash_reason = out.crash_reason;
    stats_.undiscounted_return += res.reward;
    trace_.push_back(TraceStep{steps_, state_.position, state_.battery, state_.landed, a, targets_.count(), res.reward});

    if (out.crashed()) {
      stats_.crashed = true;
      stats_.crash_reason = out.crash_reason;
    }
    evaluate_termination(out.crashed());
    res.terminated = done_ && !stats_.truncated;
    res.truncated = stats_.truncated;
    res.solved = stats_.solved;
    return res;
  }

  Observation observe() {
    return build_observation(*map_, targets_, history_, state_, cfg_.battery.capacity, cfg_.observation, &noise_);
  }

  bool done() const { return done_; }
  int steps() const { return steps_; }
  const UavState& state() const { return state_; }
  const TargetMap& targets() const { return targets_; }
  const PositionHistory& history() const { return history_; }
  const GridMap& map() const { return *map_; }
  std::shared_ptr<const GridMap> map_ptr() const { return map_; }
  const DistanceField& dfield() const { return dfield_; }
  const Scenario& scenario() const { return scenario_; }
  const std::vector<TraceStep>& trace() const { return trace_; }

  EpisodeStats stats() const {
    EpisodeStats s = stats_;
    s.steps = steps_;
    s.remaining = targets_.count();
    s.coverage_ratio = s.targets0 == 0 ? 1.0 : 1.0 - static_cast<double>(s.remaining) / s.targets0;
    return s;
  }

 private:
  void evaluate_termination(bool crashed) {
    if (crashed) {
      done_ = true;
      return;
    }
    const bool finished = cfg_.objective == Objective::recharge ? (state_.landed && targets_.empty())
                                                                : (state_.landed && steps_ > 0);
    if (finished) {
      stats_.solved = targets_.empty();
      done_ = true;
      return;
    }
    if (steps_ >= scenario_.timeout) {
      stats_.truncated = true;
      done_ = true;
    }
  }

  EnvConfig cfg_;
  std::shared_ptr<const GridMap> map_;
  DistanceField dfield_;
  Scenario scenario_;
  UavState state_;
  TargetMap targets_;
  PositionHistory history_;
  Rng noise_;
  int steps_ = 0;
  bool done_ = true;
  EpisodeStats stats_;
  std::vector<TraceStep> trace_;
};

}  // namespace covplan
