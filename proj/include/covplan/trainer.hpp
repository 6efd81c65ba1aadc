#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "covplan/coverage.hpp"
#include "covplan/dynamics.hpp"
#include "covplan/environment.hpp"
#include "covplan/reward.hpp"
#include "covplan/rng.hpp"
#include "covplan/safety.hpp"

namespace covplan {

using Logits = std::array<double, kActionCount>;
using Probabilities = std::array<double, kActionCount>;

// Softmax restricted to the allowed actions; disallowed logits act as -inf
// and get probability exactly 0.
inline Probabilities masked_distribution(const Logits& logits, const ActionMask& m) {
  double hi = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < kActionCount; ++i) {
    if (!m.allowed[i]) continue;
    any = true;
    hi = std::max(hi, logits[i]);
  }
  if (!any) throw std::logic_error("masked_distribution: no action is allowed");
  Probabilities p{};
  double z = 0.0;
  for (int i = 0; i < kActionCount; ++i) {
    if (!m.allowed[i]) continue;
    p[i] = std::exp(logits[i] - hi);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

inline ActionMask all_allowed() {
  ActionMask m;
  m.allowed.fill(true);
  return m;
}

// Masked argmax; ties go to the lowest action index.
inline Action masked_argmax(const Logits& logits, const ActionMask& m) {
  int best = -1;
  for (int i = 0; i < kActionCount; ++i)
    if (m.allowed[i] && (best < 0 || logits[i] > logits[best])) best = i;
  if (best < 0) throw std::logic_error("masked_argmax: no action is allowed");
  return static_cast<Action>(best);
}

inline Action sample_action(const Probabilities& p, Rng& rng) {
  const double u = uniform_unit(rng);
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < kActionCount; ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    acc += p[i];
    if (u < acc) return static_cast<Action>(i);
  }
  return static_cast<Action>(last);
}

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> targets;
};

// Generalized advantage estimation.
//   delta_t = r_t + gamma * V(s_{t+1}) * (1 - terminal_t) - V(s_t)
//   A_t     = delta_t + gamma * lambda * (1 - episode_end_t) * A_{t+1}
// `next_values[t]` is V of the state reached by transition t. Truncated
// episodes set episode_end but not terminal, so they still bootstrap.
inline AdvantageResult compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                          const std::vector<double>& next_values, const std::vector<bool>& terminal,
                                          const std::vector<bool>& episode_end, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || terminal.size() != n || episode_end.size() != n)
    throw std::invalid_argument("compute_advantages: sequence lengths differ");
  AdvantageResult out;
  out.advantages.assign(n, 0.0);
  out.targets.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rewards[k] + gamma * next_values[k] * (terminal[k] ? 0.0 : 1.0) - values[k];
    running = delta + gamma * lambda * (episode_end[k] ? 0.0 : 1.0) * running;
    out.advantages[k] = running;
    out.targets[k] = running + values[k];
  }
  return out;
}

// Single-trajectory form: `values` has one extra trailing entry, V of the
// state after the last transition. `dones` both stop bootstrapping and cut
// the advantage sum.
inline AdvantageResult compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                          const std::vector<bool>& dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1) throw std::invalid_argument("compute_advantages: values needs n+1 entries");
  std::vector<double> v(values.begin(), values.end() - 1);
  std::vector<double> next(values.begin() + 1, values.end());
  return compute_advantages(rewards, v, next, dones, dones, gamma, lambda);
}

// Tabular state key: position, battery, landed flag and the exact remaining target set.
struct StateKey {
  int position = 0;
  int battery = 0;
  bool landed = false;
  std::vector<int> targets;

  friend bool operator==(const StateKey&, const StateKey&) = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(k.position));
    mix(static_cast<std::uint64_t>(k.battery));
    mix(k.landed ? 1 : 0);
    for (int t : k.targets) mix(static_cast<std::uint64_t>(t));
    return static_cast<std::size_t>(h);
  }
};

inline StateKey state_key(const Environment& env) {
  const auto& s = env.state();
  return StateKey{env.map().index(s.position), s.battery, s.landed, env.targets().indices()};
}

// Actor-critic contract used by the trainer and the evaluation harness.
// A convolutional network over Environment::observe() fits the same surface;
// the tabular policy below reads the exact state instead.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Logits logits(const Environment& env) const = 0;
  virtual double value(const Environment& env) const = 0;
};

struct TableEntry {
  Logits logits{};
  double value = 0.0;
};

using TableGradient = std::unordered_map<StateKey, TableEntry, StateKeyHash>;

// Per-state softmax logits and value. Unseen states read as all zeros.
class TabularPolicy : public Policy {
 public:
  Logits logits(const Environment& env) const override { return logits(state_key(env)); }
  double value(const Environment& env) const override { return value(state_key(env)); }

  Logits logits(const StateKey& k) const {
    auto it = table_.find(k);
    return it == table_.end() ? Logits{} : it->second.logits;
  }
  double value(const StateKey& k) const {
    auto it = table_.find(k);
    return it == table_.end() ? 0.0 : it->second.value;
  }

  TableEntry& entry(const StateKey& k) { return table_[k]; }
  std::size_t size() const { return table_.size(); }
  const std::unordered_map<StateKey, TableEntry, StateKeyHash>& table() const { return table_; }

  // Adds `delta` entrywise.
  void apply_update(const TableGradient& delta) {
    for (const auto& [k, d] : delta) {
      auto& e = table_[k];
      for (int i = 0; i < kActionCount; ++i) e.logits[i] += d.logits[i];
      e.value += d.value;
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json entries = nlohmann::json::array();
    std::vector<const std::pair<const StateKey, TableEntry>*> sorted;
    for (const auto& kv : table_) sorted.push_back(&kv);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
      const auto& x = a->first;
      const auto& y = b->first;
      return std::tie(x.position, x.battery, x.landed, x.targets) < std::tie(y.position, y.battery, y.landed, y.targets);
    });
    for (const auto* kv : sorted) {
      entries.push_back({{"p", kv->first.position},
                         {"b", kv->first.battery},
                         {"l", kv->first.landed},
                         {"targets", kv->first.targets},
                         {"logits", kv->second.logits},
                         {"value", kv->second.value}});
    }
    return {{"format", "covplan-tabular"}, {"version", 1}, {"entries", entries}};
  }

  static TabularPolicy from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "covplan-tabular" || j.value("version", 0) != 1)
      throw std::invalid_argument("not a covplan tabular checkpoint (format/version mismatch)");
    TabularPolicy p;
    for (const auto& e : j.at("entries")) {
      StateKey k{e.at("p").get<int>(), e.at("b").get<int>(), e.at("l").get<bool>(),
                 e.at("targets").get<std::vector<int>>()};
      auto& t = p.table_[k];
      t.logits = e.at("logits").get<Logits>();
      t.value = e.at("value").get<double>();
    }
    return p;
  }

 private:
  std::unordered_map<StateKey, TableEntry, StateKeyHash> table_;
};

struct PpoSample {
  StateKey key;
  ActionMask mask;
  Action action = Action::east;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double value_target = 0.0;
};

struct PpoCoefficients {
  double clip = 0.1;            // epsilon
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

struct PpoLoss {
  double total = 0.0;
  double policy = 0.0;   // mean of -min(rho A, clip(rho) A)
  double value = 0.0;    // mean of 0.5 (V - target)^2
  double entropy = 0.0;  // mean policy entropy
  double clip_fraction = 0.0;
  bool finite = true;
};

// Clipped surrogate loss (to be minimised) over a batch,
//   L = mean_i [ -min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i)
//               + c_v * 0.5 (V(s_i) - target_i)^2 - c_e * H(pi(.|s_i)) ],
// with its exact gradient with respect to the table entries when `grad` is given.
inline PpoLoss ppo_loss(const TabularPolicy& policy, const std::vector<PpoSample>& batch, const PpoCoefficients& c,
                        TableGradient* grad) {
  PpoLoss out;
  if (batch.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  int clipped = 0;
  for (const auto& s : batch) {
    const Logits z = policy.logits(s.key);
    const Probabilities p = masked_distribution(z, s.mask);
    const int a = static_cast<int>(s.action);
    if (!s.mask.allowed[a]) throw std::logic_error("ppo_loss: sample action is masked");
    const double logp = std::log(p[a]);
    const double ratio = std::exp(logp - s.old_log_prob);
    const double clipped_ratio = std::clamp(ratio, 1.0 - c.clip, 1.0 + c.clip);
    const double unclipped_obj = ratio * s.advantage;
    const double clipped_obj = clipped_ratio * s.advantage;
    const bool clip_active = clipped_obj < unclipped_obj;
    clipped += clip_active;

    double entropy = 0.0;
    for (int i = 0; i < kActionCount; ++i)
      if (p[i] > 0.0) entropy -= p[i] * std::log(p[i]);

    const double v = policy.value(s.key);
    const double verr = v - s.value_target;
    out.policy -= std::min(unclipped_obj, clipped_obj) * inv_n;
    out.value += 0.5 * verr * verr * inv_n;
    out.entropy += entropy * inv_n;

    if (!grad) continue;
    TableEntry& g = (*grad)[s.key];
    for (int j = 0; j < kActionCount; ++j) {
      if (!s.mask.allowed[j]) continue;
      double dz = 0.0;
      // d rho / d z_j = rho * (1[j == a] - p_j)
      if (!clip_active) dz -= s.advantage * ratio * ((j == a ? 1.0 : 0.0) - p[j]);
      // d H / d z_j = -p_j (log p_j + H)
      dz += c.entropy_coef * p[j] * (std::log(p[j]) + entropy);
      g.logits[j] += dz * inv_n;
    }
    g.value += c.value_coef * verr * inv_n;
  }
  out.total = out.policy + c.value_coef * out.value - c.entropy_coef * out.entropy;
  out.clip_fraction = clipped * inv_n;
  out.finite = std::isfinite(out.total);
  return out;
}

// Adam over table entries; moment estimates are kept per state key.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Descent step for `grad`; returns the parameter delta.
  TableGradient step(const TableGradient& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    TableGradient delta;
    for (const auto& [k, g] : grad) {
      auto& st = state_[k];
      auto& d = delta[k];
      for (int i = 0; i <= kActionCount; ++i) {
        const double gi = i < kActionCount ? g.logits[i] : g.value;
        st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * gi;
        st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * gi * gi;
        const double upd = -lr_ * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps_);
        if (i < kActionCount)
          d.logits[i] = upd;
        else
          d.value = upd;
      }
    }
    return delta;
  }

 private:
  struct Moments {
    std::array<double, kActionCount + 1> m{};
    std::array<double, kActionCount + 1> v{};
  };

  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::unordered_map<StateKey, Moments, StateKeyHash> state_;
};

struct PpoUpdateStats {
  PpoLoss first;  // loss before the first epoch
  PpoLoss last;   // loss before the last epoch
  bool aborted = false;
};

// `epochs` full-batch Adam steps on the clipped surrogate. A non-finite loss
// aborts the update and leaves the policy at its last finite parameters.
inline PpoUpdateStats ppo_update(TabularPolicy& policy, const std::vector<PpoSample>& batch,
                                 const PpoCoefficients& coef, AdamOptimizer& opt, int epochs) {
  PpoUpdateStats st;
  for (int e = 0; e < epochs; ++e) {
    TableGradient grad;
    const PpoLoss loss = ppo_loss(policy, batch, coef, &grad);
    if (e == 0) st.first = loss;
    st.last = loss;
    if (!loss.finite) {
      st.aborted = true;
      break;
    }
    policy.apply_update(opt.step(grad));
  }
  return st;
}

// One candidate map plus how to draw scenarios on it.
struct ScenarioSource {
  std::shared_ptr<const GridMap> map;
  GeneratorConfig generator;
};

struct TrainConfig {
  PpoCoefficients ppo;
  double lambda = 0.8;
  double learning_rate = 0.05;
  int batch_steps = 1024;
  int epochs = 4;
  std::int64_t total_steps = 200000;
  DiscountSchedule schedule{DiscountSchedule::Mode::scheduled, 0.99, 0.99, 0.1, 5e4};
  bool normalize_advantages = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(ppo.clip > 0.0)) throw std::invalid_argument("PPO clip must be positive");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
    if (batch_steps <= 0 || epochs <= 0) throw std::invalid_argument("batch size and epochs must be positive");
    if (total_steps < 0) throw std::invalid_argument("total steps must be non-negative");
    schedule.validate();
  }
};

struct CurvePoint {
  std::int64_t step = 0;
  double gamma = 0.0;
  int episodes = 0;
  double coverage_ratio = 0.0;
  double crash_ratio = 0.0;
  double solved_ratio = 0.0;
  double episode_steps = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  TabularPolicy policy;
  std::vector<CurvePoint> curve;
  std::int64_t steps = 0;
  long long masked_samples = 0;  // sampled actions outside the mask; must stay 0
  int aborted_updates = 0;
};

// Masked PPO with a per-batch discount snapshot from the schedule. Each
// episode draws its map uniformly from `sources`. Deterministic given cfg.seed.
inline TrainResult train(const std::vector<ScenarioSource>& sources, const EnvConfig& env_cfg, const TrainConfig& cfg,
                         const std::function<void(const CurvePoint&)>& on_batch = {}) {
  cfg.validate();
  if (sources.empty()) throw std::invalid_argument("train: no scenario sources");
  TrainResult result;
  if (cfg.total_steps == 0) return result;

  Rng rng(cfg.seed);
  AdamOptimizer opt(cfg.learning_rate);
  Environment env(env_cfg);
  auto new_episode = [&] {
    const auto& src = sources[uniform_below(rng, sources.size())];
    env.reset(generate_scenario(src.map, rng(), src.generator), rng());
  };
  new_episode();

  std::int64_t s = 0;
  while (s < cfg.total_steps) {
    const double gamma = discount(s, cfg.schedule);
    const int n = static_cast<int>(std::min<std::int64_t>(cfg.batch_steps, cfg.total_steps - s));

    std::vector<PpoSample> batch;
    std::vector<double> rewards, values, next_values;
    std::vector<bool> terminal, episode_end;
    batch.reserve(n);
    CurvePoint pt;
    double cov = 0, crash = 0, solved = 0, steps = 0;

    for (int i = 0; i < n; ++i) {
      PpoSample smp;
      smp.key = state_key(env);
      smp.mask = env.current_mask();
      const Probabilities p = masked_distribution(result.policy.logits(smp.key), smp.mask);
      smp.action = sample_action(p, rng);
      if (!smp.mask[smp.action]) ++result.masked_samples;
      smp.old_log_prob = std::log(p[static_cast<int>(smp.action)]);
      values.push_back(result.policy.value(smp.key));

      const StepResult r = env.step(smp.action);
      rewards.push_back(r.reward);
      terminal.push_back(r.terminated);
      episode_end.push_back(env.done());
      next_values.push_back(r.terminated ? 0.0 : result.policy.value(state_key(env)));
      batch.push_back(std::move(smp));

      if (env.done()) {
        const EpisodeStats es = env.stats();
        ++pt.episodes;
        cov += es.coverage_ratio;
        crash += es.crashed;
        solved += es.solved;
        steps += es.steps;
        new_episode();
      }
    }
    // The last transition of the batch is a cut; it bootstraps from next_values.
    episode_end.back() = true;
    s += n;

    auto adv = compute_advantages(rewards, values, next_values, terminal, episode_end, gamma, cfg.lambda);
    if (cfg.normalize_advantages && n > 1) {
      double mean = 0, var = 0;
      for (double a : adv.advantages) mean += a;
      mean /= n;
      for (double a : adv.advantages) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / n) + 1e-8;
      for (double& a : adv.advantages) a = (a - mean) / sd;
    }
    for (int i = 0; i < n; ++i) {
      batch[i].advantage = adv.advantages[i];
      batch[i].value_target = adv.targets[i];
    }
    const auto up = ppo_update(result.policy, batch, cfg.ppo, opt, cfg.epochs);
    result.aborted_updates += up.aborted;

    pt.step = s;
    pt.gamma = gamma;
    pt.loss = up.first.total;
    if (pt.episodes > 0) {
      pt.coverage_ratio = cov / pt.episodes;
      pt.crash_ratio = crash / pt.episodes;
      pt.solved_ratio = solved / pt.episodes;
      pt.episode_steps = steps / pt.episodes;
    }
    result.curve.push_back(pt);
    if (on_batch) on_batch(pt);
  }
  result.steps = s;
  return result;
}

}  // namespace covplan
