#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "covplan/coverage.hpp"
#include "covplan/environment.hpp"
#include "covplan/heuristic.hpp"
#include "covplan/rng.hpp"
#include "covplan/trainer.hpp"

namespace covplan {

enum class InferenceMode { deterministic, stochastic };

class Actor {
 public:
  virtual ~Actor() = default;
  virtual void begin_episode(const Environment&) {}
  virtual Action act(const Environment& env, Rng& rng) = 0;
};

class HeuristicActor : public Actor {
 public:
  void begin_episode(const Environment&) override { ctl_.reset(); }
  Action act(const Environment& env, Rng&) override { return ctl_.next(env); }

 private:
  HeuristicController ctl_;
};

class PolicyActor : public Actor {
 public:
  PolicyActor(std::shared_ptr<const Policy> policy, InferenceMode mode) : policy_(std::move(policy)), mode_(mode) {}

  Action act(const Environment& env, Rng& rng) override {
    const ActionMask m = env.current_mask();
    const Logits z = policy_->logits(env);
    if (mode_ == InferenceMode::deterministic) return masked_argmax(z, m);
    return sample_action(masked_distribution(z, m), rng);
  }

 private:
  std::shared_ptr<const Policy> policy_;
  InferenceMode mode_;
};

// Uniform over the currently allowed actions.
class RandomActor : public Actor {
 public:
  Action act(const Environment& env, Rng& rng) override {
    return sample_action(masked_distribution(Logits{}, env.current_mask()), rng);
  }
};

// Wraps a plain callable; handy for scripted and degenerate actors.
class FunctionActor : public Actor {
 public:
  explicit FunctionActor(std::function<Action(const Environment&)> f) : f_(std::move(f)) {}
  Action act(const Environment& env, Rng&) override { return f_(env); }

 private:
  std::function<Action(const Environment&)> f_;
};

struct RolloutResult {
  EpisodeStats stats;
  std::vector<TraceStep> trace;
  bool actor_failed = false;  // planner failure or a masked action was chosen
};

// Closed-loop episode, truncated at scenario.timeout.
inline RolloutResult rollout(const Scenario& sc, Actor& actor, const EnvConfig& cfg, std::uint64_t seed) {
  Environment env(cfg);
  env.reset(sc, seed);
  Rng rng(seed ^ 0x5DEECE66Dull);
  actor.begin_episode(env);
  RolloutResult out;
  while (!env.done()) {
    try {
      env.step(actor.act(env, rng));
    } catch (const PlannerFailure&) {
      out.actor_failed = true;
      break;
    } catch (const MaskViolation&) {
      out.actor_failed = true;
      break;
    }
  }
  out.stats = env.stats();
  out.trace = env.trace();
  return out;
}

// Relative percentage deviation (agent - heuristic) / heuristic, as a fraction.
inline double rpd(double agent_steps, double heuristic_steps) {
  if (!(heuristic_steps > 0)) throw std::invalid_argument("rpd: heuristic steps must be positive");
  return (agent_steps - heuristic_steps) / heuristic_steps;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed of scenario `i` on map `map_index`; shared by every actor for paired comparison.
inline std::uint64_t scenario_seed(std::uint64_t base, int map_index, int i) {
  return splitmix64(splitmix64(base) ^ (static_cast<std::uint64_t>(map_index) << 32) ^ static_cast<std::uint64_t>(i));
}

struct NamedMap {
  std::string name;
  std::shared_ptr<const GridMap> map;
};

struct ActorSpec {
  std::string name;
  std::function<std::unique_ptr<Actor>()> make;
};

struct EvalRow {
  std::string map;
  std::string actor;
  int scenarios = 0;
  double solved_pct = 0.0;
  double crash_pct = 0.0;
  double mean_steps = 0.0;  // over solved episodes; NaN when none
  int rpd_count = 0;        // scenarios solved by both this actor and the heuristic
  double rpd_mean = std::nan("");
  double rpd_std = std::nan("");
};

struct EvalOptions {
  int scenarios = 1024;
  std::uint64_t seed = 7;
  int jobs = 1;
  GeneratorConfig generator;
  EnvConfig env;
};

namespace detail {

template <typename F>
void parallel_for(int n, int jobs, F&& body) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += jobs) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Per map x actor: solved %, crash %, mean steps and RPD against the greedy
// heuristic over the scenarios both solved. RPD spread is over scenarios.
inline std::vector<EvalRow> batch_eval(const std::vector<NamedMap>& maps, const std::vector<ActorSpec>& actors,
                                       const EvalOptions& opt) {
  std::vector<EvalRow> rows;
  for (int mi = 0; mi < static_cast<int>(maps.size()); ++mi) {
    const auto& nm = maps[mi];
    std::vector<Scenario> scenarios(opt.scenarios);
    for (int i = 0; i < opt.scenarios; ++i)
      scenarios[i] = generate_scenario(nm.map, scenario_seed(opt.seed, mi, i), opt.generator);

    std::vector<EpisodeStats> reference(opt.scenarios);
    detail::parallel_for(opt.scenarios, opt.jobs, [&](int i) {
      HeuristicActor h;
      reference[i] = rollout(scenarios[i], h, opt.env, scenario_seed(opt.seed, mi, i)).stats;
    });

    for (const auto& spec : actors) {
      std::vector<EpisodeStats> stats(opt.scenarios);
      detail::parallel_for(opt.scenarios, opt.jobs, [&](int i) {
        auto actor = spec.make();
        stats[i] = rollout(scenarios[i], *actor, opt.env, scenario_seed(opt.seed, mi, i)).stats;
      });

      EvalRow row;
      row.map = nm.name;
      row.actor = spec.name;
      row.scenarios = opt.scenarios;
      int solved = 0, crashed = 0;
      double steps = 0;
      std::vector<double> devs;
      for (int i = 0; i < opt.scenarios; ++i) {
        crashed += stats[i].crashed;
        if (!stats[i].solved) continue;
        ++solved;
        steps += stats[i].steps;
        if (reference[i].solved && reference[i].steps > 0) devs.push_back(rpd(stats[i].steps, reference[i].steps));
      }
      const double n = std::max(1, opt.scenarios);
      row.solved_pct = 100.0 * solved / n;
      row.crash_pct = 100.0 * crashed / n;
      row.mean_steps = solved ? steps / solved : std::nan("");
      row.rpd_count = static_cast<int>(devs.size());
      if (!devs.empty()) {
        double mean = 0;
        for (double d : devs) mean += d;
        mean /= devs.size();
        double var = 0;
        for (double d : devs) var += (d - mean) * (d - mean);
        row.rpd_mean = mean;
        row.rpd_std = std::sqrt(var / devs.size());
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_eval_csv(std::ostream& os, const std::vector<EvalRow>& rows) {
  os << "# rpd_mean/rpd_std: fraction, over scenarios solved by both the actor and the heuristic\n";
  os << "map,actor,scenarios,solved_pct,crash_pct,mean_steps,rpd_n,rpd_mean,rpd_std\n";
  for (const auto& r : rows) {
    os << r.map << ',' << r.actor << ',' << r.scenarios << ',' << r.solved_pct << ',' << r.crash_pct << ','
       << r.mean_steps << ',' << r.rpd_count << ',' << r.rpd_mean << ',' << r.rpd_std << '\n';
  }
}

}  // namespace covplan
