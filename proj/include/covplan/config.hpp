#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "covplan/coverage.hpp"
#include "covplan/environment.hpp"
#include "covplan/observation.hpp"
#include "covplan/reward.hpp"
#include "covplan/safety.hpp"
#include "covplan/trainer.hpp"

namespace covplan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every tunable in one place, stored as an INI file:
//
//   [battery]      b_max b_c beta
//   [reward]       r_c r_m r_s
//   [discount]     mode gamma gamma0 gamma_r gamma_s
//   [observation]  g l alpha history pooling
//   [fov]          fov_half_width los_blocking
//   [generator]    n_patches_range patch_side_range scale_to_map timeout objective
//   [safety]       mask
//   [ppo]          clip lambda learning_rate batch_steps epochs total_steps
//                  value_coef entropy_coef normalize_advantages
//   [run]          seed jobs
//
// Layering: built-in defaults < file < CPP_<SECTION>_<KEY> environment
// variables < explicit section.key=value overrides.
struct GlobalConfig {
  EnvConfig env;
  GeneratorConfig generator;
  TrainConfig train;
  std::uint64_t seed = 0;
  int jobs = 1;

  GlobalConfig() {
    train.schedule = DiscountSchedule{DiscountSchedule::Mode::scheduled, 0.99, 0.99, 0.1, 2e7};
  }

  EnvConfig env_config() const { return env; }
  GeneratorConfig generator_config() const {
    GeneratorConfig g = generator;
    g.b_max = env.battery.capacity;
    g.objective = env.objective;
    return g;
  }

  void validate() const;
};

namespace detail {

inline std::string pair_str(std::pair<int, int> p) { return std::to_string(p.first) + "," + std::to_string(p.second); }

// Shortest text that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::pair<int, int> parse_pair(const std::string& key, const std::string& s) {
  std::istringstream is(s);
  int a = 0, b = 0;
  char comma = 0;
  if (!(is >> a >> comma >> b) || comma != ',') throw ConfigError(key + ": expected 'lo,hi', got '" + s + "'");
  return {a, b};
}

inline std::vector<Cell> parse_cells(const std::string& key, const std::string& s) {
  std::vector<Cell> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    std::istringstream cs(item);
    Cell c;
    char colon = 0;
    if (!(cs >> c.x >> colon >> c.y) || colon != ':' || !(cs >> std::ws).eof())
      throw ConfigError(key + ": expected 'x:y,x:y,...', got '" + s + "'");
    out.push_back(c);
  }
  return out;
}

inline std::string cells_str(const std::vector<Cell>& cells) {
  std::string out;
  for (const Cell& c : cells) out += (out.empty() ? "" : ",") + std::to_string(c.x) + ":" + std::to_string(c.y);
  return out;
}

template <typename T>
T get(const boost::property_tree::ptree& pt, const std::string& key) {
  try {
    return pt.get<T>(key);
  } catch (const boost::property_tree::ptree_error&) {
    throw ConfigError("config key '" + key + "' is missing or malformed");
  }
}

}  // namespace detail

inline boost::property_tree::ptree to_ptree(const GlobalConfig& c) {
  boost::property_tree::ptree pt;
  pt.put("battery.b_max", c.env.battery.capacity);
  pt.put("battery.b_c", c.env.battery.charge_amount);
  pt.put("battery.beta", detail::num(c.generator.beta));
  pt.put("reward.r_c", detail::num(c.env.reward.coverage));
  pt.put("reward.r_m", detail::num(c.env.reward.motion));
  pt.put("reward.r_s", detail::num(c.env.reward.crash));
  const auto& s = c.train.schedule;
  pt.put("discount.mode", s.mode == DiscountSchedule::Mode::scheduled ? "scheduled" : "constant");
  pt.put("discount.gamma", detail::num(s.gamma));
  pt.put("discount.gamma0", detail::num(s.gamma0));
  pt.put("discount.gamma_r", detail::num(s.decay_rate));
  pt.put("discount.gamma_s", detail::num(s.decay_steps));
  pt.put("observation.g", c.env.observation.global_scale);
  pt.put("observation.l", c.env.observation.local_size);
  pt.put("observation.alpha", detail::num(c.env.observation.alpha));
  pt.put("observation.history", std::string(history_mode_name(c.env.observation.history_mode)));
  pt.put("observation.pooling", c.env.observation.pooling == Pooling::mean ? "mean" : "max");
  pt.put("fov.fov_half_width", c.env.fov.half_width);
  pt.put("fov.los_blocking", std::string(los_blocking_name(c.env.fov.blocking)));
  pt.put("generator.n_patches_range", detail::pair_str(c.generator.n_patches_range));
  pt.put("generator.patch_side_range", detail::pair_str(c.generator.patch_side_range));
  pt.put("generator.scale_to_map", c.generator.scale_to_map);
  pt.put("generator.timeout", c.generator.timeout);
  pt.put("generator.targets", c.generator.fixed_targets ? detail::cells_str(*c.generator.fixed_targets) : "");
  pt.put("generator.objective", c.env.objective == Objective::recharge ? "recharge" : "no_recharge");
  pt.put("safety.mask", std::string(mask_level_name(c.env.mask_level)));
  pt.put("ppo.clip", detail::num(c.train.ppo.clip));
  pt.put("ppo.lambda", detail::num(c.train.lambda));
  pt.put("ppo.learning_rate", detail::num(c.train.learning_rate));
  pt.put("ppo.batch_steps", c.train.batch_steps);
  pt.put("ppo.epochs", c.train.epochs);
  pt.put("ppo.total_steps", c.train.total_steps);
  pt.put("ppo.value_coef", detail::num(c.train.ppo.value_coef));
  pt.put("ppo.entropy_coef", detail::num(c.train.ppo.entropy_coef));
  pt.put("ppo.normalize_advantages", c.train.normalize_advantages);
  pt.put("run.seed", c.seed);
  pt.put("run.jobs", c.jobs);
  return pt;
}

inline GlobalConfig from_ptree(const boost::property_tree::ptree& pt) {
  using detail::get;
  GlobalConfig c;
  c.env.battery.capacity = get<int>(pt, "battery.b_max");
  c.env.battery.charge_amount = get<int>(pt, "battery.b_c");
  c.generator.beta = get<double>(pt, "battery.beta");
  c.env.reward.coverage = get<double>(pt, "reward.r_c");
  c.env.reward.motion = get<double>(pt, "reward.r_m");
  c.env.reward.crash = get<double>(pt, "reward.r_s");

  auto& s = c.train.schedule;
  const auto mode = get<std::string>(pt, "discount.mode");
  if (mode == "scheduled")
    s.mode = DiscountSchedule::Mode::scheduled;
  else if (mode == "constant")
    s.mode = DiscountSchedule::Mode::constant;
  else
    throw ConfigError("discount.mode must be 'scheduled' or 'constant'");
  s.gamma = get<double>(pt, "discount.gamma");
  s.gamma0 = get<double>(pt, "discount.gamma0");
  s.decay_rate = get<double>(pt, "discount.gamma_r");
  s.decay_steps = get<double>(pt, "discount.gamma_s");

  c.env.observation.global_scale = get<int>(pt, "observation.g");
  c.env.observation.local_size = get<int>(pt, "observation.l");
  c.env.observation.alpha = get<double>(pt, "observation.alpha");
  auto hm = history_mode_from_name(get<std::string>(pt, "observation.history"));
  if (!hm) throw ConfigError("observation.history must be history, none or random_layer");
  c.env.observation.history_mode = *hm;
  const auto pooling = get<std::string>(pt, "observation.pooling");
  if (pooling != "mean" && pooling != "max") throw ConfigError("observation.pooling must be mean or max");
  c.env.observation.pooling = pooling == "mean" ? Pooling::mean : Pooling::max;

  c.env.fov.half_width = get<int>(pt, "fov.fov_half_width");
  auto lb = los_blocking_from_name(get<std::string>(pt, "fov.los_blocking"));
  if (!lb) throw ConfigError("fov.los_blocking must be all_obstacles or high_only");
  c.env.fov.blocking = *lb;

  c.generator.n_patches_range = detail::parse_pair("generator.n_patches_range", get<std::string>(pt, "generator.n_patches_range"));
  c.generator.patch_side_range = detail::parse_pair("generator.patch_side_range", get<std::string>(pt, "generator.patch_side_range"));
  c.generator.scale_to_map = get<bool>(pt, "generator.scale_to_map");
  c.generator.timeout = get<int>(pt, "generator.timeout");
  if (const auto t = get<std::string>(pt, "generator.targets"); !t.empty())
    c.generator.fixed_targets = detail::parse_cells("generator.targets", t);
  const auto objective = get<std::string>(pt, "generator.objective");
  if (objective != "recharge" && objective != "no_recharge")
    throw ConfigError("generator.objective must be recharge or no_recharge");
  c.env.objective = objective == "recharge" ? Objective::recharge : Objective::no_recharge;

  auto ml = mask_level_from_name(get<std::string>(pt, "safety.mask"));
  if (!ml) throw ConfigError("safety.mask must be none, valid, immediate or invariant");
  c.env.mask_level = *ml;

  c.train.ppo.clip = get<double>(pt, "ppo.clip");
  c.train.lambda = get<double>(pt, "ppo.lambda");
  c.train.learning_rate = get<double>(pt, "ppo.learning_rate");
  c.train.batch_steps = get<int>(pt, "ppo.batch_steps");
  c.train.epochs = get<int>(pt, "ppo.epochs");
  c.train.total_steps = get<std::int64_t>(pt, "ppo.total_steps");
  c.train.ppo.value_coef = get<double>(pt, "ppo.value_coef");
  c.train.ppo.entropy_coef = get<double>(pt, "ppo.entropy_coef");
  c.train.normalize_advantages = get<bool>(pt, "ppo.normalize_advantages");

  c.seed = get<std::uint64_t>(pt, "run.seed");
  c.jobs = get<int>(pt, "run.jobs");
  c.train.seed = c.seed;
  c.generator.b_max = c.env.battery.capacity;
  c.generator.objective = c.env.objective;
  return c;
}

inline void GlobalConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(env.battery.capacity >= 2, "battery.b_max must be at least 2");
  require(env.battery.charge_amount >= 1, "battery.b_c must be positive");
  require(generator.beta > 0.0 && generator.beta <= 1.0, "battery.beta must lie in (0, 1]");
  require(env.reward.coverage >= 0 && env.reward.motion >= 0 && env.reward.crash >= 0, "rewards must be non-negative");
  require(env.fov.half_width >= 0, "fov.fov_half_width must be non-negative");
  require(generator.n_patches_range.first >= 1 && generator.n_patches_range.first <= generator.n_patches_range.second,
          "generator.n_patches_range must be 1 <= lo <= hi");
  require(generator.patch_side_range.first >= 1 && generator.patch_side_range.first <= generator.patch_side_range.second,
          "generator.patch_side_range must be 1 <= lo <= hi");
  require(generator.timeout >= 0, "generator.timeout must be non-negative (0 = size-proportional)");
  require(jobs >= 1, "run.jobs must be positive");
  require(env.observation.global_scale >= 1, "observation.g must be >= 1");
  require(env.observation.local_size >= 1 && env.observation.local_size % 2 == 1, "observation.l must be odd");
  require(env.observation.alpha > 0.0 && env.observation.alpha < 1.0, "observation.alpha must lie in (0, 1)");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline void merge_into(boost::property_tree::ptree& base, const boost::property_tree::ptree& over) {
  for (const auto& [section, sub] : over) {
    if (sub.empty()) throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, leaf] : sub) {
      if (!base.get_child_optional(section + "." + key))
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      base.put(section + "." + key, leaf.data());
    }
  }
}

inline void apply_override(boost::property_tree::ptree& pt, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like section.key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  if (!pt.get_child_optional(key)) throw ConfigError("unknown config key '" + key + "'");
  pt.put(key, assignment.substr(eq + 1));
}

inline std::string env_var_name(const std::string& section, const std::string& key) {
  std::string name = "CPP_" + section + "_" + key;
  for (char& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

// Builds the effective configuration. `ini_text` may be empty.
inline GlobalConfig load_config(const std::string& ini_text, const std::vector<std::string>& overrides = {},
                                bool read_environment = true) {
  auto pt = to_ptree(GlobalConfig{});
  if (!ini_text.empty()) {
    boost::property_tree::ptree file;
    std::istringstream is(ini_text);
    try {
      boost::property_tree::ini_parser::read_ini(is, file);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(std::string("config file: ") + e.what());
    }
    merge_into(pt, file);
  }
  if (read_environment) {
    for (auto& [section, sub] : pt)
      for (auto& [key, leaf] : sub)
        if (const char* v = std::getenv(env_var_name(section, key).c_str())) leaf.put_value(std::string(v));
  }
  for (const auto& o : overrides) apply_override(pt, o);
  GlobalConfig c = from_ptree(pt);
  c.validate();
  return c;
}

inline std::string dump_config(const GlobalConfig& c) {
  std::ostringstream os;
  boost::property_tree::ini_parser::write_ini(os, to_ptree(c));
  return os.str();
}

}  // namespace covplan
