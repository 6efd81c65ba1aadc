#include <gtest/gtest.h>

#include <cstdlib>

#include "covplan/config.hpp"

using namespace covplan;

TEST(Config, DefaultsMatchParameterTable) {
  const auto c = load_config("", {}, false);
  EXPECT_EQ(c.env.battery.capacity, 100);
  EXPECT_EQ(c.env.battery.charge_amount, 2);
  EXPECT_EQ(c.generator.beta, 0.5);
  EXPECT_EQ(c.env.observation.global_scale, 3);
  EXPECT_EQ(c.env.observation.local_size, 17);
  EXPECT_EQ(c.env.observation.alpha, 0.99);
  EXPECT_EQ(c.train.ppo.clip, 0.1);
  EXPECT_EQ(c.train.lambda, 0.8);
  EXPECT_EQ(c.env.reward.coverage, 0.01);
  EXPECT_EQ(c.env.reward.motion, 0.02);
  EXPECT_EQ(c.env.reward.crash, 5.0);
  EXPECT_EQ(c.train.schedule.gamma0, 0.99);
  EXPECT_EQ(c.train.schedule.decay_rate, 0.1);
  EXPECT_EQ(c.train.schedule.decay_steps, 2e7);
  EXPECT_EQ(c.env.mask_level, MaskLevel::invariant);
}

TEST(Config, DumpRoundTrips) {
  auto c = load_config("[battery]\nb_max=20\n[fov]\nfov_half_width=1\nlos_blocking=high_only\n", {"ppo.clip=0.2"},
                       false);
  const std::string dumped = dump_config(c);
  const auto again = load_config(dumped, {}, false);
  EXPECT_EQ(dump_config(again), dumped);
  EXPECT_EQ(again.env.battery.capacity, 20);
  EXPECT_EQ(again.env.fov.half_width, 1);
  EXPECT_EQ(again.env.fov.blocking, LosBlocking::high_only);
  EXPECT_EQ(again.train.ppo.clip, 0.2);
}

TEST(Config, LayeringOrder) {
  ::setenv("CPP_BATTERY_B_C", "4", 1);
  ::setenv("CPP_BATTERY_B_MAX", "40", 1);
  const auto c = load_config("[battery]\nb_max=30\nb_c=3\n", {"battery.b_max=50"}, true);
  ::unsetenv("CPP_BATTERY_B_C");
  ::unsetenv("CPP_BATTERY_B_MAX");
  EXPECT_EQ(c.env.battery.charge_amount, 4);
  EXPECT_EQ(c.env.battery.capacity, 50);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(load_config("[battery]\nbmax=3\n", {}, false), ConfigError);
  EXPECT_THROW(load_config("[nonsense]\nx=1\n", {}, false), ConfigError);
  EXPECT_THROW(load_config("", {"battery.nope=1"}, false), ConfigError);
  EXPECT_THROW(load_config("", {"battery.b_max"}, false), ConfigError);
  EXPECT_THROW(load_config("[battery]\nb_max=abc\n", {}, false), ConfigError);
  EXPECT_THROW(load_config("[battery]\nbeta=1.5\n", {}, false), ConfigError);
  EXPECT_THROW(load_config("[observation]\nl=4\n", {}, false), ConfigError);
  EXPECT_THROW(load_config("[safety]\nmask=maybe\n", {}, false), ConfigError);
  EXPECT_THROW(load_config("[discount]\ngamma_r=2\n", {}, false), ConfigError);
}

TEST(Config, EnvVarName) { EXPECT_EQ(env_var_name("ppo", "learning_rate"), "CPP_PPO_LEARNING_RATE"); }

TEST(Config, GeneratorConfigInheritsBattery) {
  const auto c = load_config("[battery]\nb_max=20\n[generator]\nobjective=no_recharge\n", {}, false);
  EXPECT_EQ(c.generator_config().b_max, 20);
  EXPECT_EQ(c.generator_config().objective, Objective::no_recharge);
}

TEST(Config, FixedTargets) {
  EXPECT_FALSE(load_config("", {}, false).generator.fixed_targets);
  const auto c = load_config("[generator]\ntargets=4:4, 4:3\n", {}, false);
  ASSERT_TRUE(c.generator.fixed_targets);
  EXPECT_EQ(*c.generator.fixed_targets, (std::vector<Cell>{{4, 4}, {4, 3}}));
  EXPECT_NE(dump_config(c).find("targets=4:4,4:3"), std::string::npos);
  EXPECT_THROW(load_config("", {"generator.targets=4-4"}, false), ConfigError);
  EXPECT_THROW(load_config("", {"generator.targets=1:2:3"}, false), ConfigError);
}

TEST(Config, DoublesDumpInShortestForm) {
  const auto text = dump_config(load_config("", {}, false));
  EXPECT_NE(text.find("gamma0=0.99\n"), std::string::npos);
  EXPECT_NE(text.find("clip=0.1\n"), std::string::npos);
}
