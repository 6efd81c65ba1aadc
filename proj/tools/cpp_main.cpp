#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "covplan/covplan.hpp"
#include "covplan/protocol.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace covplan;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  bool json = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;

  GlobalConfig load() const {
    std::string path = config_path;
    if (path.empty())
      if (const char* env = std::getenv("CPP_CONFIG")) path = env;
    const std::string text = path.empty() ? std::string() : read_file(path);
    auto sets = overrides;
    if (seed) sets.push_back("run.seed=" + std::to_string(*seed));
    if (jobs) sets.push_back("run.jobs=" + std::to_string(*jobs));
    return load_config(text, sets);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "INI config file (default: $CPP_CONFIG)");
  cmd->add_option("--set", c.overrides, "Override a config key, section.key=value")->take_all();
  cmd->add_flag("--json", c.json, "Machine-readable JSON output");
}

void emit(const Common& c, const json& j, const std::string& text) {
  if (c.json)
    std::cout << j.dump(2) << '\n';
  else
    std::cout << text;
}

std::shared_ptr<const GridMap> shared_map(const std::string& path) {
  return std::make_shared<const GridMap>(load_map(path));
}

json stats_json(const EpisodeStats& s) {
  json passes = json::array();
  for (const auto& p : s.passes)
    passes.push_back({{"takeoff_step", p.takeoff_step}, {"landing_step", p.landing_step}, {"cells_covered", p.cells_covered}});
  json j{{"steps", s.steps},
         {"solved", s.solved},
         {"crashed", s.crashed},
         {"truncated", s.truncated},
         {"targets0", s.targets0},
         {"remaining", s.remaining},
         {"covered_on_ground", s.covered_on_ground},
         {"coverage_ratio", s.coverage_ratio},
         {"return", s.undiscounted_return},
         {"passes", passes}};
  j["crash_reason"] = s.crash_reason ? json(std::string(crash_reason_name(*s.crash_reason))) : json(nullptr);
  return j;
}

std::string stats_text(const EpisodeStats& s) {
  std::ostringstream os;
  os << "steps " << s.steps << ", " << (s.solved ? "solved" : s.crashed ? "crashed" : s.truncated ? "timeout" : "unsolved")
     << ", coverage " << s.coverage_ratio * 100 << "% of " << s.targets0 << " targets, " << s.passes.size()
     << " pass(es), return " << s.undiscounted_return << '\n';
  for (std::size_t i = 0; i < s.passes.size(); ++i)
    os << "  pass " << i + 1 << ": steps " << s.passes[i].takeoff_step << ".." << s.passes[i].landing_step << ", "
       << s.passes[i].cells_covered << " cells\n";
  return os.str();
}

// map check ------------------------------------------------------------------

int cmd_map_check(const Common& c, const std::vector<std::string>& files) {
  json all = json::array();
  std::ostringstream text;
  int status = kOk;
  for (const auto& f : files) {
    json j{{"file", f}};
    try {
      const GridMap map = load_map(f);
      std::map<CellKind, int> counts;
      for (int i = 0; i < map.cell_count(); ++i) ++counts[map.kind(map.cell(i))];
      const auto d = landing_distance_field(map);
      int stranded = 0;
      for (int i = 0; i < map.cell_count(); ++i)
        if (!map.nfz(i) && d.at(i) == kUnreachable) ++stranded;
      j["ok"] = true;
      j["size"] = map.size();
      j["landing"] = counts[CellKind::landing];
      j["nfz"] = counts[CellKind::nfz];
      j["low_obstacle"] = counts[CellKind::low_obstacle];
      j["high_obstacle"] = counts[CellKind::high_obstacle];
      j["unreachable_cells"] = stranded;
      json warnings = json::array();
      if (counts[CellKind::landing] == 0) warnings.push_back("no landing cells; every distance is unreachable");
      if (stranded > 0) warnings.push_back(std::to_string(stranded) + " flyable cells cannot reach a landing cell");
      j["warnings"] = warnings;
      text << f << ": ok, " << map.size() << "x" << map.size() << ", " << counts[CellKind::landing] << " landing, "
           << counts[CellKind::nfz] << " nfz, " << counts[CellKind::low_obstacle] << " low, "
           << counts[CellKind::high_obstacle] << " high\n";
      for (const auto& w : warnings) text << "  warning: " << w.get<std::string>() << '\n';
    } catch (const ParseError& e) {
      j["ok"] = false;
      j["error"] = e.what();
      j["line"] = e.line();
      j["column"] = e.column();
      text << e.what() << '\n';
      status = kValidation;
    }
    all.push_back(j);
  }
  emit(c, all, text.str());
  return status;
}

// scenario gen ---------------------------------------------------------------

int cmd_scenario_gen(const Common& c, const std::string& map_path, int n, const std::string& out) {
  const auto cfg = c.load();
  auto map = shared_map(map_path);
  json all = json::array();
  for (int i = 0; i < n; ++i) {
    Scenario sc = generate_scenario(map, cfg.seed + static_cast<std::uint64_t>(i), cfg.generator_config());
    sc.map_path = out.empty() ? map_path : fs::relative(fs::absolute(map_path), fs::absolute(out).parent_path()).string();
    all.push_back(scenario_to_json(sc));
  }
  if (!out.empty()) {
    if (n == 1) {
      write_file(out, all[0].dump(2) + "\n");
    } else {
      std::ostringstream os;
      for (const auto& j : all) os << j.dump() << '\n';
      write_file(out, os.str());
    }
  }
  if (c.json || out.empty()) {
    std::cout << (n == 1 ? all[0].dump(2) : all.dump(2)) << '\n';
  } else {
    std::cout << "wrote " << n << " scenario(s) to " << out << '\n';
  }
  return kOk;
}

// heuristic ------------------------------------------------------------------

Scenario scenario_from_args(const GlobalConfig& cfg, const std::string& scenario_path, const std::string& map_path) {
  if (!scenario_path.empty()) {
    std::vector<std::string> warnings;
    Scenario sc = load_scenario(scenario_path, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    const auto problems = scenario_problems(sc, cfg.env.battery.capacity, cfg.generator.beta);
    if (!problems.empty()) throw ValidationError(scenario_path + ": " + problems.front());
    return sc;
  }
  if (map_path.empty()) throw CLI::RequiredError("--scenario or --map");
  Scenario sc = generate_scenario(shared_map(map_path), cfg.seed, cfg.generator_config());
  sc.map_path = map_path;
  return sc;
}

int cmd_heuristic(const Common& c, const std::string& scenario_path, const std::string& map_path,
                  const std::string& trace_out, const std::string& render_out) {
  const auto cfg = c.load();
  const Scenario sc = scenario_from_args(cfg, scenario_path, map_path);
  const auto run = run_heuristic(sc, cfg.env_config());
  if (!trace_out.empty()) {
    std::ofstream os(trace_out);
    if (!os) throw std::runtime_error("cannot write " + trace_out);
    write_trace(os, run.trace);
  }
  if (!render_out.empty())
    write_file(render_out, encode_ppm(render_trace(*sc.map, sc.targets0, run.trace, cfg.env.fov)));
  json j = stats_json(run.stats);
  j["planner_failed"] = run.planner_failed;
  j["mask_violations"] = run.mask_violations;
  std::string text = stats_text(run.stats);
  if (run.planner_failed) text += "planner failed: no admissible plan\n";
  emit(c, j, text);
  return run.planner_failed || run.mask_violations ? kRuntime : kOk;
}

// train ----------------------------------------------------------------------

int cmd_train(const Common& c, const std::vector<std::string>& maps, const std::string& out_dir) {
  const auto cfg = c.load();
  if (cfg.env.mask_level != MaskLevel::invariant)
    std::cerr << "warning: training without the invariant mask; crashes are possible\n";
  std::vector<ScenarioSource> sources;
  for (const auto& m : maps) sources.push_back({shared_map(m), cfg.generator_config()});
  fs::create_directories(out_dir);
  std::ofstream curves(fs::path(out_dir) / "curves.csv");
  if (!curves) throw std::runtime_error("cannot write curves.csv in " + out_dir);
  curves << "step,gamma,episodes,coverage_ratio,crash_ratio,solved_ratio,episode_steps,loss\n";
  const auto result = train(sources, cfg.env_config(), cfg.train, [&](const CurvePoint& p) {
    curves << p.step << ',' << p.gamma << ',' << p.episodes << ',' << p.coverage_ratio << ',' << p.crash_ratio << ','
           << p.solved_ratio << ',' << p.episode_steps << ',' << p.loss << '\n';
    if (!c.json)
      std::cerr << "step " << p.step << "  solved " << p.solved_ratio << "  coverage " << p.coverage_ratio
                << "  steps " << p.episode_steps << '\n';
  });
  write_file(fs::path(out_dir) / "policy.json", result.policy.to_json().dump() + "\n");
  json j{{"steps", result.steps},
         {"states", result.policy.size()},
         {"masked_samples", result.masked_samples},
         {"aborted_updates", result.aborted_updates},
         {"curves", (fs::path(out_dir) / "curves.csv").string()},
         {"checkpoint", (fs::path(out_dir) / "policy.json").string()}};
  if (!result.curve.empty()) j["final_solved_ratio"] = result.curve.back().solved_ratio;
  std::ostringstream text;
  text << "trained " << result.steps << " steps, " << result.policy.size() << " table states\n"
       << "checkpoint " << j["checkpoint"].get<std::string>() << "\ncurves " << j["curves"].get<std::string>() << '\n';
  emit(c, j, text.str());
  return result.aborted_updates ? kRuntime : kOk;
}

// eval -----------------------------------------------------------------------

std::vector<NamedMap> collect_maps(const std::string& spec) {
  std::vector<NamedMap> out;
  std::vector<fs::path> paths;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const fs::path p(item);
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".map") paths.push_back(e.path());
    } else {
      paths.push_back(p);
    }
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) out.push_back({p.stem().string(), shared_map(p.string())});
  if (out.empty()) throw ValidationError("no .map files found in " + spec);
  return out;
}

std::vector<ActorSpec> parse_actors(const std::string& spec, InferenceMode mode) {
  std::vector<ActorSpec> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "heuristic") {
      out.push_back({item, [] { return std::make_unique<HeuristicActor>(); }});
    } else if (item == "random") {
      out.push_back({item, [] { return std::make_unique<RandomActor>(); }});
    } else if (item.rfind("policy:", 0) == 0) {
      const std::string path = item.substr(7);
      auto policy = std::make_shared<const TabularPolicy>(TabularPolicy::from_json(json::parse(read_file(path))));
      out.push_back({"policy:" + fs::path(path).stem().string(),
                     [policy, mode] { return std::make_unique<PolicyActor>(policy, mode); }});
    } else {
      throw ValidationError("unknown actor '" + item + "' (heuristic, random, policy:<checkpoint>)");
    }
  }
  return out;
}

int cmd_eval(const Common& c, const std::string& maps_spec, const std::string& actors_spec, int n,
             const std::string& out, const std::string& mode) {
  const auto cfg = c.load();
  if (mode != "deterministic" && mode != "stochastic") throw ValidationError("--mode must be deterministic or stochastic");
  EvalOptions opt;
  opt.scenarios = n;
  opt.seed = cfg.seed;
  opt.jobs = cfg.jobs;
  opt.env = cfg.env_config();
  opt.generator = cfg.generator_config();
  const auto maps = collect_maps(maps_spec);
  const auto actors =
      parse_actors(actors_spec, mode == "deterministic" ? InferenceMode::deterministic : InferenceMode::stochastic);
  const auto rows = batch_eval(maps, actors, opt);
  std::ostringstream csv;
  write_eval_csv(csv, rows);
  if (!out.empty()) write_file(out, csv.str());
  json j = json::array();
  for (const auto& r : rows) {
    auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    j.push_back({{"map", r.map},
                 {"actor", r.actor},
                 {"scenarios", r.scenarios},
                 {"solved_pct", r.solved_pct},
                 {"crash_pct", r.crash_pct},
                 {"mean_steps", num(r.mean_steps)},
                 {"rpd_n", r.rpd_count},
                 {"rpd_mean", num(r.rpd_mean)},
                 {"rpd_std", num(r.rpd_std)}});
  }
  emit(c, j, csv.str());
  return kOk;
}

// render ---------------------------------------------------------------------

int cmd_render(const Common& c, const std::string& trace_path, const std::string& scenario_path,
               const std::string& map_path, const std::string& out, bool ascii, int scale) {
  const auto cfg = c.load();
  std::ifstream is(trace_path);
  if (!is) throw std::runtime_error("cannot open " + trace_path);
  const auto trace = read_trace(is);
  std::shared_ptr<const GridMap> map;
  TargetMap targets0;
  if (!scenario_path.empty()) {
    const Scenario sc = load_scenario(scenario_path);
    map = sc.map;
    targets0 = sc.targets0;
  } else if (!map_path.empty()) {
    map = shared_map(map_path);
    targets0 = TargetMap(map->cell_count());
  } else {
    throw CLI::RequiredError("--scenario or --map");
  }
  for (const auto& s : trace)
    if (!map->contains(s.p)) throw ValidationError("trace position outside the map");
  if (ascii) {
    const std::string art = render_ascii(*map, targets0, trace, cfg.env.fov);
    if (!out.empty()) write_file(out, art);
    emit(c, json{{"ascii", art}}, out.empty() ? art : "wrote " + out + "\n");
    return kOk;
  }
  if (out.empty()) throw CLI::RequiredError("--out");
  const Image img = render_trace(*map, targets0, trace, cfg.env.fov, scale);
  write_file(out, encode_ppm(img));
  emit(c, json{{"out", out}, {"width", img.width}, {"height", img.height}}, "wrote " + out + "\n");
  return kOk;
}

// mask probe -----------------------------------------------------------------

UavState parse_state(const std::string& spec, const GridMap& map) {
  UavState s;
  s.landed = false;
  bool have_b = false, have_p = false;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "landed") {
      s.landed = true;
    } else if (item == "flying") {
      s.landed = false;
    } else if (item.rfind("b=", 0) == 0) {
      try {
        s.battery = std::stoi(item.substr(2));
      } catch (const std::logic_error&) {
        throw ValidationError("bad battery in --state: " + item);
      }
      have_b = true;
    } else if (item.rfind("p=", 0) == 0) {
      const auto cells = detail::parse_cells("--state p", item.substr(2));
      if (cells.size() != 1) throw ValidationError("p= takes one cell x:y");
      s.position = cells[0];
      have_p = true;
    } else {
      throw ValidationError("unknown --state item '" + item + "' (landed, flying, b=<int>, p=<x>:<y>)");
    }
  }
  if (!have_b) throw ValidationError("--state needs b=<int>");
  if (!have_p) {
    const auto landing = map.landing_cells();
    if (landing.empty()) throw ValidationError("--state needs p=<x>:<y> on a map without landing cells");
    s.position = map.cell(landing.front());
  }
  if (!map.contains(s.position)) throw ValidationError("state position outside the map");
  if (s.landed && !map.landing(s.position)) throw ValidationError("a landed state must be on a landing cell");
  return s;
}

int cmd_mask_probe(const Common& c, const std::string& state_spec, const std::string& map_path) {
  const auto cfg = c.load();
  // Default: a 3x3 open map with a single landing cell in the middle.
  const GridMap map = map_path.empty() ? parse_map("cpp-map v1\nsize 3\n...\n.L.\n...\n") : load_map(map_path);
  const UavState s = parse_state(state_spec, map);
  const auto d = landing_distance_field(map);
  json levels = json::object();
  std::ostringstream text;
  text << "state p=(" << s.position.x << "," << s.position.y << ") b=" << s.battery << (s.landed ? " landed" : " flying")
       << ", d_L(p)=";
  if (d(s.position) == kUnreachable)
    text << "unreachable\n";
  else
    text << d(s.position) << '\n';
  for (MaskLevel lvl : {MaskLevel::valid, MaskLevel::immediate, MaskLevel::invariant}) {
    const auto m = mask(map, d, s, lvl, cfg.env.battery.capacity);
    json allowed = json::array(), denied = json::array();
    text << "  " << mask_level_name(lvl) << ":";
    for (Action a : kAllActions) {
      (m[a] ? allowed : denied).push_back(std::string(action_name(a)));
      if (m[a]) text << ' ' << action_name(a);
    }
    if (!m.any()) text << " (none)";
    text << '\n';
    levels[std::string(mask_level_name(lvl))] = {{"allowed", allowed}, {"disallowed", denied}};
  }
  json j{{"state", {{"p", cell_json(s.position)}, {"b", s.battery}, {"landed", s.landed}}}, {"levels", levels}};
  emit(c, j, text.str());
  return kOk;
}

// env serve / script ---------------------------------------------------------

int cmd_env_serve(const Common& c, const std::string& map_path) {
  const auto cfg = c.load();
  EnvSession session(cfg, shared_map(map_path), map_path);
  session.serve(std::cin, std::cout);
  return kOk;
}

int cmd_env_script(const Common& c, const std::string& map_path, int steps, const std::string& out) {
  const auto cfg = c.load();
  EnvSession session(cfg, shared_map(map_path), map_path);
  if (out.empty()) {
    write_golden_trace(session, cfg.seed, steps, std::cout);
  } else {
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out);
    write_golden_trace(session, cfg.seed, steps, os);
    if (c.json)
      std::cout << json{{"out", out}, {"steps", steps}}.dump() << '\n';
    else
      std::cout << "wrote " << out << '\n';
  }
  return kOk;
}

int cmd_config_dump(const Common& c) {
  const auto cfg = c.load();
  if (c.json) {
    json j = json::object();
    const auto pt = to_ptree(cfg);
    for (const auto& [section, sub] : pt)
      for (const auto& [key, leaf] : sub) j[section][key] = leaf.data();
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << dump_config(cfg);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power-constrained coverage path planning with recharge"};
  app.require_subcommand(1);
  Common common;

  auto* map_cmd = app.add_subcommand("map", "Map utilities")->require_subcommand(1);
  auto* map_check = map_cmd->add_subcommand("check", "Parse and summarise map files");
  std::vector<std::string> map_files;
  map_check->add_option("files", map_files, "Map files")->required()->check(CLI::ExistingFile);
  add_common(map_check, common);

  auto* sc_cmd = app.add_subcommand("scenario", "Scenario utilities")->require_subcommand(1);
  auto* sc_gen = sc_cmd->add_subcommand("gen", "Generate scenarios on a map");
  std::string sc_map, sc_out;
  int sc_n = 1;
  sc_gen->add_option("--map", sc_map, "Map file")->required()->check(CLI::ExistingFile);
  sc_gen->add_option("--n", sc_n, "Number of scenarios (seeds seed..seed+n-1)")->check(CLI::PositiveNumber);
  sc_gen->add_option("--out", sc_out, "Output file (JSON, or JSON lines when n > 1)");
  sc_gen->add_option("--seed", common.seed, "Base seed");
  add_common(sc_gen, common);

  auto* heur = app.add_subcommand("heuristic", "Run the greedy coverage heuristic on one scenario");
  std::string h_scenario, h_map, h_trace, h_render;
  heur->add_option("--scenario", h_scenario, "Scenario JSON")->check(CLI::ExistingFile);
  heur->add_option("--map", h_map, "Map file; a scenario is generated from --seed")->check(CLI::ExistingFile);
  heur->add_option("--trace", h_trace, "Write the trajectory as JSON lines");
  heur->add_option("--render", h_render, "Write a PPM rendering");
  heur->add_option("--seed", common.seed, "Scenario seed with --map");
  add_common(heur, common);

  auto* tr = app.add_subcommand("train", "Masked PPO with a tabular policy");
  std::vector<std::string> t_maps;
  std::string t_out, t_targets;
  tr->add_option("--map", t_maps, "Map file; repeat to draw a map per episode")->required()->check(CLI::ExistingFile);
  tr->add_option("--targets", t_targets, "Fixed target cells x:y,x:y (same as --set generator.targets=...)");
  tr->add_option("--out", t_out, "Output directory for curves.csv and policy.json")->required();
  tr->add_option("--seed", common.seed, "Training seed");
  add_common(tr, common);

  auto* ev = app.add_subcommand("eval", "Batch evaluation against the heuristic");
  std::string e_maps, e_actors = "heuristic", e_out, e_mode = "deterministic", e_targets;
  int e_n = 1024;
  ev->add_option("--maps", e_maps, "Map directory or comma-separated map files")->required();
  ev->add_option("--actors", e_actors, "heuristic, random, policy:<checkpoint>, comma-separated");
  ev->add_option("--n", e_n, "Scenarios per map")->check(CLI::PositiveNumber);
  ev->add_option("--out", e_out, "CSV output file");
  ev->add_option("--mode", e_mode, "Policy inference: deterministic or stochastic");
  ev->add_option("--targets", e_targets, "Fixed target cells x:y,x:y (same as --set generator.targets=...)");
  ev->add_option("--seed", common.seed, "Scenario seed base");
  ev->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_common(ev, common);

  auto* rd = app.add_subcommand("render", "Render a trajectory");
  std::string r_trace, r_scenario, r_map, r_out;
  bool r_ascii = false;
  int r_scale = 8;
  rd->add_option("--trace", r_trace, "Trace JSON lines")->required()->check(CLI::ExistingFile);
  rd->add_option("--scenario", r_scenario, "Scenario JSON (adds target shading)")->check(CLI::ExistingFile);
  rd->add_option("--map", r_map, "Map file")->check(CLI::ExistingFile);
  rd->add_option("--out", r_out, "Output PPM (or text with --ascii)");
  rd->add_flag("--ascii", r_ascii, "Text rendering");
  rd->add_option("--scale", r_scale, "Pixels per cell")->check(CLI::Range(1, 64));
  add_common(rd, common);

  auto* mk = app.add_subcommand("mask", "Action mask utilities")->require_subcommand(1);
  auto* probe = mk->add_subcommand("probe", "Print the valid, immediate and invariant masks for a state");
  std::string m_state, m_map;
  probe->add_option("--state", m_state, "landed|flying,b=<int>[,p=<x>:<y>]")->required();
  probe->add_option("--map", m_map, "Map file (default: 3x3 with a central landing cell)")->check(CLI::ExistingFile);
  add_common(probe, common);

  auto* cf = app.add_subcommand("config", "Configuration utilities")->require_subcommand(1);
  auto* dump = cf->add_subcommand("dump", "Print the effective configuration");
  add_common(dump, common);

  auto* envc = app.add_subcommand("env", "Environment protocol for external bindings")->require_subcommand(1);
  auto* serve = envc->add_subcommand("serve", "JSON-lines reset/step/close protocol on stdin/stdout");
  std::string v_map, v_out;
  int v_steps = 100;
  serve->add_option("--map", v_map, "Map file")->required()->check(CLI::ExistingFile);
  add_common(serve, common);
  auto* script = envc->add_subcommand("script", "Scripted heuristic rollout through the protocol (golden trace)");
  script->add_option("--map", v_map, "Map file")->required()->check(CLI::ExistingFile);
  script->add_option("--steps", v_steps, "Step requests to issue")->check(CLI::PositiveNumber);
  script->add_option("--out", v_out, "Output JSON lines file");
  script->add_option("--seed", common.seed, "First reset seed");
  add_common(script, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  for (const auto* t : {&t_targets, &e_targets})
    if (!t->empty()) common.overrides.push_back("generator.targets=" + *t);

  try {
    if (map_check->parsed()) return cmd_map_check(common, map_files);
    if (sc_gen->parsed()) return cmd_scenario_gen(common, sc_map, sc_n, sc_out);
    if (heur->parsed()) return cmd_heuristic(common, h_scenario, h_map, h_trace, h_render);
    if (tr->parsed()) return cmd_train(common, t_maps, t_out);
    if (ev->parsed()) return cmd_eval(common, e_maps, e_actors, e_n, e_out, e_mode);
    if (rd->parsed()) return cmd_render(common, r_trace, r_scenario, r_map, r_out, r_ascii, r_scale);
    if (probe->parsed()) return cmd_mask_probe(common, m_state, m_map);
    if (dump->parsed()) return cmd_config_dump(common);
    if (serve->parsed()) return cmd_env_serve(common, v_map);
    if (script->parsed()) return cmd_env_script(common, v_map, v_steps, v_out);
  } catch (const CLI::RequiredError& e) {
    std::cerr << "error: " << e.what() << " is required\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "map error: " << e.what() << '\n';
    return kValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const json::exception& e) {
    std::cerr << "invalid JSON input: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
