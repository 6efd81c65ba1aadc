#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "covplan/covplan.hpp"
#include "support/oracles.hpp"
#include "support/ppo_oracle.hpp"

using namespace covplan;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0 = none
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(COVPLAN_SOURCE_DIR) / rel; }

// Every flying state lies in the invariant set, positions stay off NFZs and
// landed states sit on landing cells. d_L comes from the fixed-point oracle.
int constraint_violations(const GridMap& map, const std::vector<int>& d_oracle, const std::vector<TraceStep>& trace) {
  int bad = 0;
  for (const auto& s : trace) {
    if (!map.contains(s.p) || map.nfz(s.p)) {
      ++bad;
      continue;
    }
    if (s.l) {
      bad += !map.landing(s.p) || s.b < 0;
    } else {
      const int d = d_oracle[map.index(s.p)];
      bad += s.b <= 0 || d == oracle::kInf || d > s.b;
    }
  }
  return bad;
}

std::vector<NamedMap> suite_maps() {
  std::vector<NamedMap> out;
  for (const char* name : {"courtyard10", "district16", "campus20"})
    out.push_back({name, std::make_shared<const GridMap>(load_map(source_path(std::string("maps/") + name + ".map")))});
  return out;
}

// ---------------------------------------------------------------------------

Outcome safety_guarantee() {
  Rng rng(1001);
  EnvConfig cfg;
  long long steps = 0, flying = 0, crashes = 0, empty_masks = 0, episodes = 0;
  const int maps = 50, per_map = 2000;
  for (int k = 0; k < maps; ++k) {
    const auto map = std::make_shared<const GridMap>(oracle::random_map(rng, 16));
    const auto landing = map->landing_cells();
    Environment env(cfg);
    auto fresh = [&] {
      Scenario sc;
      sc.map = map;
      sc.targets0 = oracle::random_targets(rng, *map, 0.1);
      sc.p0 = map->cell(landing[uniform_int(rng, 0, static_cast<int>(landing.size()) - 1)]);
      sc.b0 = uniform_int(rng, 1, cfg.battery.capacity);
      sc.l0 = true;
      sc.timeout = 100000;
      env.reset(sc, rng());
      ++episodes;
    };
    fresh();
    for (int i = 0; i < per_map; ++i) {
      if (env.done()) fresh();
      const ActionMask m = env.current_mask();
      if (!m.any()) {
        ++empty_masks;
        fresh();
        continue;
      }
      std::vector<Action> allowed;
      for (Action a : kAllActions)
        if (m[a]) allowed.push_back(a);
      const auto r = env.step(allowed[uniform_int(rng, 0, static_cast<int>(allowed.size()) - 1)]);
      crashes += r.crash_reason.has_value();
      flying += !env.state().landed;
      ++steps;
    }
  }
  return {steps == 100000 && crashes == 0 && empty_masks == 0,
          fmt("%lld steps (%lld airborne), %lld episodes on %d maps: %lld crashes, %lld empty masks", steps, flying,
              episodes, maps, crashes, empty_masks)};
}

Outcome mask_nesting() {
  Rng rng(1002);
  int states = 0, violations = 0;
  for (int k = 0; k < 20; ++k) {
    const GridMap map = oracle::random_map(rng, 16);
    const auto d = landing_distance_field(map);
    while (states < (k + 1) * 500) {
      const Cell p{uniform_int(rng, 0, 15), uniform_int(rng, 0, 15)};
      if (map.nfz(p)) continue;
      const bool landed = map.landing(p) && uniform_unit(rng) < 0.5;
      const UavState s{p, uniform_int(rng, 0, 100), landed};
      const auto v = mask(map, d, s, MaskLevel::valid, 100);
      const auto im = mask(map, d, s, MaskLevel::immediate, 100);
      const auto inv = mask(map, d, s, MaskLevel::invariant, 100);
      violations += !inv.subset_of(im) || !im.subset_of(v);
      ++states;
    }
  }
  return {states == 10000 && violations == 0, fmt("%d random states, %d nesting violations", states, violations)};
}

Outcome distance_field() {
  Rng rng(1003);
  int mismatched_maps = 0, cells = 0;
  for (int k = 0; k < 100; ++k) {
    const GridMap map = oracle::random_map(rng, 16);
    const auto got = landing_distance_field(map).values();
    const auto want = oracle::bellman_ford_landing_field(map);
    mismatched_maps += got != want;
    cells += static_cast<int>(want.size());
  }
  return {mismatched_maps == 0, fmt("100 maps, %d cells, %d maps differ from the fixed-point oracle", cells, mismatched_maps)};
}

Outcome discount_schedule() {
  const DiscountSchedule s = GlobalConfig().train.schedule;
  const double e0 = std::abs(discount(0, s) - 0.99);
  const double e1 = std::abs(discount(20'000'000, s) - 0.999);
  const double e2 = std::abs(discount(40'000'000, s) - 0.9999);
  const double worst = std::max({e0, e1, e2});
  return {s.mode == DiscountSchedule::Mode::scheduled && worst <= 1e-9,
          fmt("gamma(0)=%.12f gamma(2e7)=%.12f gamma(4e7)=%.12f, max err %.2e", discount(0, s), discount(20'000'000, s),
              discount(40'000'000, s), worst)};
}

Outcome rpd_value() {
  const double v = rpd(166, 266);
  const double err = std::abs(v - (-0.375939));
  return {err <= 1e-6, fmt("rpd(166, 266) = %.9f", v)};
}

Outcome heuristic_suite() {
  const EnvConfig cfg;
  const GeneratorConfig gen;
  int total = 0, solved = 0, bad_end = 0, violations = 0, failures = 0;
  std::ostringstream per_map;
  for (const auto& nm : suite_maps()) {
    const auto d_oracle = oracle::bellman_ford_landing_field(*nm.map);
    int map_solved = 0;
    for (int i = 0; i < 500; ++i) {
      const auto sc = generate_scenario(nm.map, scenario_seed(2024, 0, i), gen);
      const auto run = run_heuristic(sc, cfg);
      ++total;
      const bool ok = run.stats.solved && !run.stats.crashed && !run.stats.truncated && run.stats.steps <= sc.timeout;
      map_solved += ok;
      bad_end += !(run.trace.back().l && run.trace.back().remaining == 0);
      failures += run.planner_failed || run.mask_violations > 0;
      violations += constraint_violations(*nm.map, d_oracle, run.trace);
    }
    solved += map_solved;
    per_map << ' ' << nm.name << ' ' << map_solved << "/500 (T/O " << default_timeout(nm.map->size()) << ')';
  }
  return {solved == total && bad_end == 0 && violations == 0 && failures == 0,
          fmt("solved %d/%d;", solved, total) + per_map.str() +
              fmt("; %d not ending landed+empty, %d constraint violations, %d planner/mask failures", bad_end, violations,
                  failures)};
}

Outcome loop_discriminability() {
  GridMap grid = GridMap::square(6);
  grid.set({0, 0}, CellKind::landing);
  const auto map = std::make_shared<const GridMap>(grid);
  Scenario sc;
  sc.map = map;
  sc.targets0 = TargetMap::from_cells(*map, {{5, 5}});
  sc.p0 = {0, 0};
  sc.b0 = 60;
  sc.l0 = true;
  sc.timeout = 1000;

  auto replay = [&](HistoryMode mode) {
    EnvConfig cfg;
    cfg.battery = {100, 2};
    cfg.observation.local_size = 5;
    cfg.observation.history_mode = mode;
    Environment env(cfg);
    env.reset(sc, 0);
    for (Action a : {Action::take_off, Action::east, Action::north, Action::west, Action::south, Action::land})
      env.step(a);
    std::vector<Observation> obs;
    for (int loop = 0; loop < 8; ++loop) {
      for (Action a : {Action::take_off, Action::land, Action::charge}) env.step(a);
      obs.push_back(env.observe());
    }
    return std::pair{obs, env.state()};
  };

  const double alpha = ObservationConfig{}.alpha;
  auto max_abs = [](const Observation& a, const Observation& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.local.data.size(); ++i) m = std::max(m, double(std::abs(a.local.data[i] - b.local.data[i])));
    for (std::size_t i = 0; i < a.global.data.size(); ++i)
      m = std::max(m, double(std::abs(a.global.data[i] - b.global.data[i])));
    for (std::size_t i = 0; i < a.scalars.size(); ++i) m = std::max(m, double(std::abs(a.scalars[i] - b.scalars[i])));
    return m;
  };

  const auto [with, s_with] = replay(HistoryMode::history);
  const auto [without, s_without] = replay(HistoryMode::none);
  double min_diff = 1e9;
  int identical = 0;
  for (std::size_t i = 1; i < with.size(); ++i) {
    min_diff = std::min(min_diff, max_abs(with[i - 1], with[i]));
    identical += serialize_observation(without[i - 1]) == serialize_observation(without[i]);
  }
  const int pairs = static_cast<int>(with.size()) - 1;
  return {min_diff >= 1 - alpha && identical == pairs && s_with.landed && s_without.landed,
          fmt("%d loop iterations: with history min max-abs diff %.5f (need >= %.5f); without history %d/%d bitwise "
              "identical",
              pairs + 1, min_diff, 1 - alpha, identical, pairs)};
}

Outcome coverage_correctness() {
  Rng rng(1008);
  int mismatches = 0;
  long long checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const GridMap map = oracle::random_map(rng, 12);
    const TargetMap t = oracle::random_targets(rng, map, 0.4);
    const FovConfig fov{uniform_int(rng, 1, 3), uniform_unit(rng) < 0.5 ? LosBlocking::all_obstacles : LosBlocking::high_only};
    Cell p;
    do p = {uniform_int(rng, 0, 11), uniform_int(rng, 0, 11)};
    while (map.nfz(p));
    std::vector<int> expect;
    for (int idx : t.indices()) {
      if (!oracle::oracle_visible(map, fov, p, map.cell(idx))) expect.push_back(idx);
      ++checked;
    }
    mismatches += update_targets(map, fov, t, p).indices() != expect;
  }
  return {mismatches == 0, fmt("200 instances, %lld target cells checked, %d instances differ", checked, mismatches)};
}

Outcome gradient_check() {
  Rng rng(1009);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto [policy, batch] = oracle::random_ppo_problem(rng);
    const PpoCoefficients coef{0.1 + 0.2 * uniform_unit(rng), 0.5, 0.05};
    TableGradient grad;
    ppo_loss(policy, batch, coef, &grad);
    worst = std::max(worst, oracle::gradient_relative_error(policy, batch, coef, grad, 1e-6));
  }
  return {worst <= 1e-5, fmt("20 batches, worst relative error %.3e", worst)};
}

struct DeskRun {
  double solved_pct = 0, policy_steps = 0, heuristic_steps = 0;
  bool ok = false;
};

GlobalConfig desk_config() { return load_config(read_file(source_path("configs/desk.ini")), {}, false); }

Outcome desk_learning() {
  const GlobalConfig cfg = desk_config();
  const auto map = std::make_shared<const GridMap>(load_map(source_path("maps/desk/desk5.map")));
  const double ratio_limit = 1.2;
  std::vector<DeskRun> runs;
  std::ostringstream detail;
  int passing = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const auto result = train({{map, cfg.generator_config()}}, cfg.env_config(), tc);
    auto policy = std::make_shared<const TabularPolicy>(result.policy);
    EvalOptions opt;
    opt.scenarios = 256;
    opt.seed = 9000 + seed;
    opt.env = cfg.env_config();
    opt.generator = cfg.generator_config();
    const auto rows = batch_eval(
        {{"desk5", map}},
        {{"heuristic", [] { return std::make_unique<HeuristicActor>(); }},
         {"policy", [policy] { return std::make_unique<PolicyActor>(policy, InferenceMode::deterministic); }}},
        opt);
    DeskRun r;
    r.heuristic_steps = rows[0].mean_steps;
    r.solved_pct = rows[1].solved_pct;
    r.policy_steps = rows[1].mean_steps;
    r.ok = result.steps <= 200000 && r.solved_pct >= 95.0 && r.policy_steps <= ratio_limit * r.heuristic_steps;
    passing += r.ok;
    detail << fmt(" seed %d: solved %.1f%%, steps %.2f vs %.2f (x%.3f)%s;", int(seed), r.solved_pct, r.policy_steps,
                  r.heuristic_steps, r.policy_steps / r.heuristic_steps, r.ok ? "" : " FAIL");
  }
  return {passing >= 4, fmt("%d/5 seeds meet >=95%% solved and <=%.1fx heuristic steps within %lld steps;", passing,
                            ratio_limit, static_cast<long long>(cfg.train.total_steps)) +
                            detail.str()};
}

Outcome return_identity() {
  long long episodes = 0, solved = 0, mismatches = 0;
  double worst = 0;
  auto check = [&](const RolloutResult& out, const EnvConfig& cfg) {
    ++episodes;
    if (!out.stats.solved || out.stats.crashed) return;
    ++solved;
    const auto& s = out.stats;
    int covered = s.covered_on_ground;
    for (const auto& p : s.passes) covered += p.cells_covered;
    const double expect = cfg.reward.coverage * s.targets0 - cfg.reward.motion * s.steps;
    double summed = 0;
    for (const auto& t : out.trace) summed += t.reward;
    const double err = std::max(std::abs(s.undiscounted_return - expect), std::abs(summed - expect));
    worst = std::max(worst, err);
    mismatches += covered != s.targets0 || static_cast<int>(out.trace.size()) != s.steps + 1 || err > 1e-9;
  };

  const EnvConfig cfg;
  std::uint64_t i = 0;
  for (const auto& nm : suite_maps())
    for (int k = 0; k < 200; ++k, ++i) {
      HeuristicActor h;
      check(rollout(generate_scenario(nm.map, scenario_seed(77, 0, int(i)), {}), h, cfg, i), cfg);
    }

  const GlobalConfig desk = desk_config();
  const auto map = std::make_shared<const GridMap>(load_map(source_path("maps/desk/desk5.map")));
  TrainConfig tc = desk.train;
  tc.seed = 1;
  auto policy = std::make_shared<const TabularPolicy>(train({{map, desk.generator_config()}}, desk.env_config(), tc).policy);
  for (int k = 0; k < 300; ++k, ++i) {
    const auto sc = generate_scenario(map, scenario_seed(78, 0, k), desk.generator_config());
    RandomActor random;
    PolicyActor stochastic(policy, InferenceMode::stochastic);
    check(rollout(sc, random, desk.env_config(), i), desk.env_config());
    check(rollout(sc, stochastic, desk.env_config(), i), desk.env_config());
  }
  return {mismatches == 0 && solved > 0,
          fmt("%lld solved crash-free of %lld episodes (heuristic, random, PPO), %lld mismatches, max |err| %.2e",
              solved, episodes, mismatches, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the coverage planner"};
  std::vector<int> only;
  app.add_option("criteria", only, "Run only these criterion numbers");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "safety guarantee", 30, safety_guarantee},
      {2, "mask nesting", 0, mask_nesting},
      {3, "distance field", 0, distance_field},
      {4, "discount schedule", 0, discount_schedule},
      {5, "rpd", 0, rpd_value},
      {6, "heuristic suite", 120, heuristic_suite},
      {7, "loop discriminability", 0, loop_discriminability},
      {8, "coverage correctness", 0, coverage_correctness},
      {9, "ppo gradient check", 0, gradient_check},
      {10, "desk-scale learning", 600, desk_learning},
      {11, "return identity", 0, return_identity},
  };

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.time_limit_s > 0) {
      timing += fmt(" of %.0f s", c.time_limit_s);
      if (secs > c.time_limit_s) {
        o.pass = false;
        timing += " (over limit)";
      }
    }
    failed += !o.pass;
    std::printf("%s  %2d %-22s %s [%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
