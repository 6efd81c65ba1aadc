#include <gtest/gtest.h>

#include <sstream>

#include "covplan/eval.hpp"
#include "covplan/io.hpp"
#include "support/oracles.hpp"

using namespace covplan;

namespace {

std::shared_ptr<const GridMap> small_map() {
  GridMap map = GridMap::square(6);
  map.set({0, 0}, CellKind::landing);
  map.set({5, 5}, CellKind::landing);
  map.set({2, 3}, CellKind::low_obstacle);
  map.set({3, 3}, CellKind::high_obstacle);
  map.set({4, 1}, CellKind::nfz);
  return std::make_shared<const GridMap>(map);
}

Scenario scenario_with(std::shared_ptr<const GridMap> map, std::vector<Cell> targets, Cell p0, int b0, int timeout) {
  Scenario sc;
  sc.map = std::move(map);
  sc.targets0 = TargetMap::from_cells(*sc.map, targets);
  sc.p0 = p0;
  sc.b0 = b0;
  sc.l0 = true;
  sc.timeout = timeout;
  return sc;
}

}  // namespace

TEST(Environment, MaskedActionIsRejected) {
  Environment env({});
  env.reset(scenario_with(small_map(), {{5, 0}}, {0, 0}, 60, 100));
  EXPECT_THROW(env.step(Action::east), MaskViolation);
  EXPECT_EQ(env.steps(), 0);
}

TEST(Environment, CrashUnderNoMaskEndsEpisodeWithPenalty) {
  EnvConfig cfg;
  cfg.mask_level = MaskLevel::none;
  Environment env(cfg);
  env.reset(scenario_with(small_map(), {{5, 0}}, {0, 0}, 60, 100));
  const auto r = env.step(Action::east);
  EXPECT_TRUE(r.terminated);
  EXPECT_EQ(r.crash_reason, CrashReason::invalid_action);
  EXPECT_NEAR(r.reward, -5.02, 1e-12);
  EXPECT_TRUE(env.done());
  EXPECT_TRUE(env.stats().crashed);
  EXPECT_FALSE(env.stats().solved);
}

TEST(Environment, StepAfterDoneThrows) {
  EnvConfig cfg;
  cfg.mask_level = MaskLevel::none;
  Environment env(cfg);
  env.reset(scenario_with(small_map(), {{5, 0}}, {0, 0}, 60, 100));
  env.step(Action::east);
  EXPECT_THROW(env.step(Action::take_off), std::logic_error);
}

TEST(Environment, CellsAroundSpawnAreCoveredByTheFirstStep) {
  Environment env({});
  env.reset(scenario_with(small_map(), {{1, 1}}, {0, 0}, 60, 100));
  EXPECT_FALSE(env.done());
  const auto r = env.step(Action::charge);
  EXPECT_EQ(r.covered, 1);
  EXPECT_NEAR(r.reward, 0.01 - 0.02, 1e-12);
  EXPECT_TRUE(env.done());
  EXPECT_TRUE(env.stats().solved);
  EXPECT_EQ(env.stats().covered_on_ground, 1);
  EXPECT_EQ(env.stats().steps, 1);
}

TEST(Environment, EmptyTargetSetIsSolvedAtReset) {
  Environment env({});
  env.reset(scenario_with(small_map(), {}, {0, 0}, 60, 100));
  EXPECT_TRUE(env.done());
  EXPECT_TRUE(env.stats().solved);
  EXPECT_EQ(env.stats().steps, 0);
}

TEST(Environment, TimeoutTruncatesWithoutCrash) {
  Environment env({});
  env.reset(scenario_with(small_map(), {{5, 0}}, {0, 0}, 60, 3));
  env.step(Action::take_off);
  env.step(Action::north);
  const auto r = env.step(Action::north);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminated);
  EXPECT_TRUE(env.stats().truncated);
  EXPECT_FALSE(env.stats().crashed);
}

TEST(Environment, NoRechargeObjectiveEndsAtFirstLanding) {
  EnvConfig cfg;
  cfg.objective = Objective::no_recharge;
  Environment env(cfg);
  Scenario sc = scenario_with(small_map(), {{5, 3}}, {0, 0}, 60, 100);
  sc.l0 = false;
  env.reset(sc);
  EXPECT_FALSE(env.done());
  env.step(Action::land);
  EXPECT_TRUE(env.done());
  EXPECT_FALSE(env.stats().solved);
}

TEST(Rollout, RandomInvariantActorNeverCrashes) {
  Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    const auto map = std::make_shared<const GridMap>(oracle::random_map(rng, 10));
    const auto sc = generate_scenario(map, rng(), {});
    RandomActor actor;
    const auto out = rollout(sc, actor, {}, trial);
    EXPECT_FALSE(out.stats.crashed);
    EXPECT_FALSE(out.actor_failed);
  }
}

TEST(Rollout, LoopingPolicyIsTruncated) {
  // take_off, land, charge forever: the state repeats every three steps.
  const auto sc = scenario_with(small_map(), {{5, 2}}, {0, 0}, 60, 90);
  FunctionActor loop([](const Environment& env) {
    if (env.state().landed) return env.current_mask()[Action::charge] && env.steps() % 3 == 2 ? Action::charge
                                                                                                 : Action::take_off;
    return Action::land;
  });
  const auto out = rollout(sc, loop, {}, 0);
  EXPECT_TRUE(out.stats.truncated);
  EXPECT_FALSE(out.stats.solved);
  EXPECT_FALSE(out.stats.crashed);
  EXPECT_EQ(out.stats.steps, 90);
}

TEST(Rollout, HeuristicPassesPartitionCoverage) {
  const auto map = small_map();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GeneratorConfig gen;
    gen.b_max = 30;
    EnvConfig cfg;
    cfg.battery = {30, 2};
    const auto sc = generate_scenario(map, seed, gen);
    HeuristicActor h;
    const auto out = rollout(sc, h, cfg, seed);
    ASSERT_TRUE(out.stats.solved);
    int covered = out.stats.covered_on_ground;
    for (std::size_t i = 0; i < out.stats.passes.size(); ++i) {
      const auto& p = out.stats.passes[i];
      covered += p.cells_covered;
      ASSERT_GE(p.landing_step, 0);
      EXPECT_EQ(out.trace[p.takeoff_step].action, Action::take_off);
      EXPECT_EQ(out.trace[p.landing_step].action, Action::land);
      if (i > 0) EXPECT_GT(p.takeoff_step, out.stats.passes[i - 1].landing_step);
    }
    EXPECT_EQ(covered, out.stats.targets0);
    // Return identity for solved crash-free episodes.
    EXPECT_NEAR(out.stats.undiscounted_return, 0.01 * out.stats.targets0 - 0.02 * out.stats.steps, 1e-9);
  }
}

TEST(Rpd, Values) {
  EXPECT_NEAR(rpd(166, 266), -0.37593984962406013, 1e-12);
  EXPECT_EQ(rpd(382, 382), 0.0);
  EXPECT_THROW(rpd(10, 0), std::invalid_argument);
}

TEST(BatchEval, HeuristicAgainstItselfAndDegenerateActor) {
  std::vector<NamedMap> maps{{"small", small_map()}};
  std::vector<ActorSpec> actors{
      {"heuristic", [] { return std::make_unique<HeuristicActor>(); }},
      {"grounded", [] {
         return std::make_unique<FunctionActor>([](const Environment& env) {
           return env.current_mask()[Action::charge] ? Action::charge : Action::land;
         });
       }}};
  EvalOptions opt;
  opt.scenarios = 40;
  opt.jobs = 3;
  opt.env.mask_level = MaskLevel::none;
  // Out of sight from both landing cells, so staying on the ground cannot solve.
  opt.generator.fixed_targets = std::vector<Cell>{{5, 0}, {2, 5}};
  const auto rows = batch_eval(maps, actors, opt);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].solved_pct, 100.0);
  EXPECT_EQ(rows[0].rpd_count, 40);
  EXPECT_EQ(rows[0].rpd_mean, 0.0);
  EXPECT_EQ(rows[0].rpd_std, 0.0);
  EXPECT_EQ(rows[1].solved_pct, 0.0);
  EXPECT_EQ(rows[1].rpd_count, 0);
  EXPECT_TRUE(std::isnan(rows[1].rpd_mean));
  std::ostringstream os;
  write_eval_csv(os, rows);
  EXPECT_NE(os.str().find("small,heuristic,40,100"), std::string::npos);
}

TEST(BatchEval, ParallelMatchesSerial) {
  std::vector<NamedMap> maps{{"small", small_map()}};
  std::vector<ActorSpec> actors{{"random", [] { return std::make_unique<RandomActor>(); }}};
  EvalOptions opt;
  opt.scenarios = 24;
  opt.jobs = 1;
  const auto a = batch_eval(maps, actors, opt);
  opt.jobs = 4;
  const auto b = batch_eval(maps, actors, opt);
  EXPECT_EQ(a[0].solved_pct, b[0].solved_pct);
  EXPECT_EQ(a[0].mean_steps == b[0].mean_steps || (std::isnan(a[0].mean_steps) && std::isnan(b[0].mean_steps)), true);
}

TEST(BatchEval, PairedScenariosAreIdentical) {
  const auto map = small_map();
  const auto a = generate_scenario(map, scenario_seed(7, 0, 5), {});
  const auto b = generate_scenario(map, scenario_seed(7, 0, 5), {});
  EXPECT_EQ(a.targets0, b.targets0);
  EXPECT_EQ(a.b0, b.b0);
  EXPECT_NE(scenario_seed(7, 0, 5), scenario_seed(7, 1, 5));
}

TEST(Trace, JsonlRoundTrip) {
  const auto sc = generate_scenario(small_map(), 3, {});
  const auto run = run_heuristic(sc, {});
  std::stringstream ss;
  write_trace(ss, run.trace);
  const auto back = read_trace(ss);
  ASSERT_EQ(back.size(), run.trace.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].t, run.trace[i].t);
    EXPECT_EQ(back[i].p, run.trace[i].p);
    EXPECT_EQ(back[i].b, run.trace[i].b);
    EXPECT_EQ(back[i].l, run.trace[i].l);
    EXPECT_EQ(back[i].action, run.trace[i].action);
    EXPECT_EQ(back[i].remaining, run.trace[i].remaining);
  }
  EXPECT_FALSE(back[0].action.has_value());
}

TEST(Scenario, JsonRoundTripAndProblems) {
  const auto sc = generate_scenario(small_map(), 11, {});
  const auto j = scenario_to_json(sc);
  const auto back = scenario_from_json(j, sc.map);
  EXPECT_EQ(back.targets0.indices(), sc.targets0.indices());
  EXPECT_EQ(back.p0, sc.p0);
  EXPECT_EQ(back.b0, sc.b0);
  EXPECT_EQ(back.seed, sc.seed);
  EXPECT_TRUE(scenario_problems(back, 100, 0.5).empty());
  Scenario bad = back;
  bad.b0 = 10;
  bad.p0 = {1, 1};
  EXPECT_EQ(scenario_problems(bad, 100, 0.5).size(), 2u);
}
