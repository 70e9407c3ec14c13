#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "experiment.hpp"
#include "json.hpp"
#include "shieldkit/automata_io.hpp"
#include "shieldkit/errors.hpp"
#include "shieldkit/game.hpp"
#include "shieldkit/shield.hpp"
#include "shieldkit/verify.hpp"

namespace fs = std::filesystem;
using namespace shieldkit;
using namespace shieldkit::cli;
using Clock = std::chrono::steady_clock;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("shieldkit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* v = std::getenv("SHIELD_LOG")) {
    const auto level = spdlog::level::from_str(v);
    if (level == spdlog::level::off && std::string(v) != "off") {
      spdlog::warn("SHIELD_LOG: unknown level '{}', keeping info", v);
    } else {
      spdlog::set_level(level);
    }
  }
}

// Flags shared by the subcommands that describe an environment and its automata.
struct Inputs {
  std::string config;
  std::string env;
  std::string map;
  std::string cycle;
  std::string energy;
  std::string spec;
  std::string abstraction;
  std::string placement;

  void add_to(CLI::App* app, bool with_placement) {
    app->add_option("--config", config, "flat key = value configuration file");
    app->add_option("--env", env, "watertank, grid9x9, grid15x9 or grid");
    app->add_option("--map", map, "map file for env = grid");
    app->add_option("--cycle", cycle, "opponent cycle file (default: map with .cycle extension)");
    app->add_option("--energy", energy, "water tank energy CSV");
    app->add_option("--spec", spec, "builtin, accept-all or an automaton JSON file");
    app->add_option("--abstraction", abstraction, "builtin or an automaton JSON file");
    if (with_placement) app->add_option("--placement", placement, "none, preemptive or postposed");
  }

  std::map<std::string, std::string> overrides() const {
    std::map<std::string, std::string> kv;
    const auto put = [&](const char* key, const std::string& v) {
      if (!v.empty()) kv[key] = v;
    };
    put("env", env);
    put("map", map);
    put("cycle", cycle);
    put("energy", energy);
    put("spec", spec);
    put("abstraction", abstraction);
    put("placement", placement);
    return kv;
  }
};

ExperimentConfig resolve(const std::string& config_path, const std::map<std::string, std::string>& overrides) {
  ExperimentConfig c;
  if (!config_path.empty()) c.apply(parse_key_values(read_file(config_path)));
  c.apply(overrides);
  if (const auto p = c.problems(); !p.empty()) throw ConfigError(p);
  return c;
}

struct Synthesis {
  game::SafetyGame game;
  game::WinningRegion region;
  double seconds = 0;
};

Synthesis synthesize(const automata::SafetyAutomaton& spec, const automata::SafetyAutomaton& abs) {
  const auto t0 = Clock::now();
  auto g = game::build_safety_game(spec, abs);
  auto w = game::solve(g);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {std::move(g), std::move(w), secs};
}

// Specification and abstraction named by the configuration. The environment
// is only built when a builtin automaton needs it.
struct Automata {
  std::string source;
  automata::SafetyAutomaton spec;
  automata::SafetyAutomaton abs;
};

Automata automata_for(const ExperimentConfig& c) {
  if (c.spec != "builtin" && c.spec != "accept-all" && c.abstraction != "builtin") {
    return {"custom", automata::load(c.spec), automata::load(c.abstraction)};
  }
  const auto env = make_environment(c);
  return {env->name(), load_spec(c.spec, *env), load_abstraction(c.abstraction, *env)};
}

shield::Shield extract(const Synthesis& s, Placement p) {
  return p == Placement::Postposed ? shield::extract_postposed(s.game, s.region)
                                   : shield::extract_preemptive(s.game, s.region);
}

int cmd_synth(const Inputs& in, const std::string& out_dir) {
  auto kv = in.overrides();
  if (!kv.count("placement") && in.config.empty()) kv["placement"] = "preemptive";
  const auto c = resolve(in.config, kv);
  if (c.placement == Placement::None) throw ConfigError({"placement: synth needs preemptive or postposed"});
  const auto a = automata_for(c);
  spdlog::info("synthesizing {} shield for {}", to_string(c.placement), a.source);
  const auto s = synthesize(a.spec, a.abs);
  const auto& z = s.game.sizes();

  nlohmann::ordered_json report;
  report["environment"] = a.source;
  report["placement"] = to_string(c.placement);
  report["turn_order"] = game::to_string(s.game.order());
  report["game_states"] = {{"raw_pairs", z.raw_pairs},
                           {"merged_full", z.merged_full},
                           {"merged_reachable", z.merged_reachable}};
  report["winning_region_size"] = s.region.size();
  report["realizable"] = s.region.realizable;
  report["seconds"] = s.seconds;
  const fs::path out(out_dir);
  if (!s.region.realizable) {
    const auto why = game::explain_unrealizable(s.game, s.region);
    report["diagnostic"] = why;
    write_atomically(out / "synthesis.json", report.dump(2) + "\n");
    spdlog::error("specification is unrealizable against this abstraction");
    std::cerr << why << "\n";
    return kFailed;
  }
  const auto sh = extract(s, c.placement);
  report["shield_states"] = sh.num_states();
  report["trivial"] = sh.trivial();
  write_atomically(out / "shield.json", shield::to_json(sh));
  write_atomically(out / "synthesis.json", report.dump(2) + "\n");
  std::cout << "game states: " << z.merged_full << " merged (" << z.merged_reachable << " reachable, "
            << z.raw_pairs << " raw pairs)\n"
            << "winning region: " << s.region.size() << "\n"
            << "shield states: " << sh.num_states() << (sh.trivial() ? " (trivial: allows every action)" : "")
            << "\n"
            << "time: " << s.seconds << " s\n";
  return kOk;
}

int cmd_train(const Inputs& in, const std::vector<std::string>& sets, const std::string& seeds,
              const std::string& episodes, const std::string& out, const std::string& jobs) {
  auto kv = in.overrides();
  for (const auto& s : sets) {
    const auto parsed = parse_key_values(s);
    kv.insert(parsed.begin(), parsed.end());
  }
  if (!seeds.empty()) kv["seeds"] = seeds;
  if (!episodes.empty()) kv["episodes"] = episodes;
  if (!out.empty()) kv["out"] = out;
  if (!jobs.empty()) kv["jobs"] = jobs;
  const auto c = resolve(in.config, kv);
  const auto env = make_environment(c);

  std::optional<shield::Shield> sh;
  if (c.placement != Placement::None) {
    const auto s = synthesize(load_spec(c.spec, *env), load_abstraction(c.abstraction, *env));
    if (!s.region.realizable) {
      spdlog::error("specification is unrealizable against this abstraction");
      std::cerr << game::explain_unrealizable(s.game, s.region) << "\n";
      return kFailed;
    }
    sh = extract(s, c.placement);
    spdlog::info("shield ready: {} states in {:.3f} s", sh->num_states(), s.seconds);
  }
  const auto mode = c.placement == Placement::None         ? learn::ShieldMode::None
                    : c.placement == Placement::Preemptive ? learn::ShieldMode::Preemptive
                                                           : learn::ShieldMode::Postposed;

  std::vector<learn::RunLog> logs(c.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_lock;
  std::exception_ptr error;
  const auto worker = [&] {
    for (std::size_t i = next++; i < c.seeds.size(); i = next++) {
      try {
        learn::LearnerConfig lc = c.learner;
        lc.seed = c.seeds[i];
        learn::ValueTable table(env->actions().size(), lc.initial_value);
        const auto t0 = Clock::now();
        logs[i] = learn::train(*env, sh ? &*sh : nullptr, mode, lc, {c.episodes, false}, table);
        write_atomically(c.out / ("seed_" + std::to_string(lc.seed) + ".csv"), logs[i].to_csv());
        spdlog::info("seed {}: {} episodes, {} violations, {:.2f} s", lc.seed, c.episodes,
                     logs[i].total_violations(), std::chrono::duration<double>(Clock::now() - t0).count());
      } catch (...) {
        std::lock_guard lock(error_lock);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n = std::min(c.seeds.size(), c.jobs == 0 ? hw : c.jobs);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  write_atomically(c.out / "aggregate.csv", aggregate_csv(logs));
  write_atomically(c.out / "config.txt", to_key_values(c));
  std::size_t violations = 0;
  for (const auto& l : logs) violations += l.total_violations();
  std::cout << env->name() << " " << to_string(c.placement) << " " << learn::to_string(c.learner.algorithm) << ": "
            << c.seeds.size() << " seeds x " << c.episodes << " episodes, " << violations << " violations, output in "
            << c.out.string() << "\n";
  return kOk;
}

int cmd_verify(const Inputs& in, const std::string& shield_path, const std::string& mode, std::size_t walks,
               std::size_t walk_length, std::uint64_t seed, std::size_t max_states, const std::string& out) {
  const auto c = resolve(in.config, in.overrides());
  const auto a = automata_for(c);
  const auto sh = shield::load(shield_path);
  shield::VerifyOptions o;
  if (mode == "randomized") {
    o.mode = shield::VerifyOptions::Mode::Randomized;
  } else if (mode != "exhaustive") {
    throw ConfigError({"mode: '" + mode + "' is not exhaustive or randomized"});
  }
  o.walks = walks;
  o.walk_length = walk_length;
  o.seed = seed;
  o.max_states = max_states;
  const auto t0 = Clock::now();
  const auto r = shield::verify_shield(sh, a.spec, a.abs, o);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const std::string json = shield::to_json(r, sh);
  if (!out.empty()) write_atomically(out, json);
  std::cout << (r.clean() ? "clean" : "NOT clean") << (r.partial ? " (partial)" : "") << ": " << r.joint_states
            << " joint states, " << r.decisions_checked << " decisions, " << r.violations.size()
            << " counterexamples, " << r.unsafe_allowances.size() << " unsafe allowances, "
            << r.over_restrictions.size() << " over-restrictions, " << r.missing_successors.size()
            << " missing successors, " << secs << " s\n";
  if (!r.violations.empty()) {
    const auto j = nlohmann::json::parse(json);
    std::cout << "first counterexample: " << j["violations"][0].dump() << "\n";
  }
  return r.clean() ? kOk : kFailed;
}

struct SeedSummary {
  std::string name;
  std::size_t episodes = 0;
  double tail_mean = 0;
  std::size_t violations = 0;
  std::size_t interventions = 0;
  std::optional<std::size_t> reached;
};

int cmd_report(const std::string& dir, std::size_t tail, std::optional<double> threshold, std::size_t window) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("seed_", 0) == 0 && e.path().extension() == ".csv") files.push_back(e.path());
  }
  if (files.empty()) throw IoError("no seed_*.csv files in " + dir);
  std::sort(files.begin(), files.end());
  std::vector<SeedSummary> rows;
  for (const auto& f : files) {
    std::istringstream in(read_file(f));
    std::string line;
    std::getline(in, line);
    if (line != "episode,accumulated_reward,violations,interventions,steps") {
      throw SchemaError(f.string() + ": unexpected header");
    }
    std::vector<double> rewards;
    SeedSummary s;
    s.name = f.stem().string();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(fields, cell, ',')) cells.push_back(cell);
      if (cells.size() != 5) throw SchemaError(f.string() + ": expected 5 columns");
      rewards.push_back(std::stod(cells[1]));
      s.violations += std::stoul(cells[2]);
      s.interventions += std::stoul(cells[3]);
    }
    s.episodes = rewards.size();
    const std::size_t k = std::min(tail, rewards.size());
    for (std::size_t i = rewards.size() - k; i < rewards.size(); ++i) s.tail_mean += rewards[i];
    if (k) s.tail_mean /= static_cast<double>(k);
    if (threshold) {
      double sum = 0;
      for (std::size_t i = 0; i < rewards.size(); ++i) {
        sum += rewards[i];
        if (i >= window) sum -= rewards[i - window];
        if (i + 1 >= window && sum / static_cast<double>(window) >= *threshold) {
          s.reached = i + 1;
          break;
        }
      }
    }
    rows.push_back(s);
  }
  std::cout << "run,episodes,tail_mean,violations,interventions" << (threshold ? ",episodes_to_threshold" : "")
            << "\n";
  double mean = 0;
  for (const auto& r : rows) {
    std::cout << r.name << ',' << r.episodes << ',' << r.tail_mean << ',' << r.violations << ',' << r.interventions;
    if (threshold) std::cout << ',' << (r.reached ? std::to_string(*r.reached) : "never");
    std::cout << "\n";
    mean += r.tail_mean;
  }
  mean /= static_cast<double>(rows.size());
  double var = 0;
  for (const auto& r : rows) var += (r.tail_mean - mean) * (r.tail_mean - mean);
  const double se = rows.size() > 1 ? std::sqrt(var / static_cast<double>(rows.size() - 1) / rows.size()) : 0.0;
  std::cout << "tail mean over the last " << tail << " episodes: " << mean << " +- " << se << " (" << rows.size()
            << " seeds)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Shield synthesis, verification and shielded reinforcement learning"};
  app.require_subcommand(1);

  Inputs synth_in;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "synthesize a shield and report the game");
  synth_in.add_to(synth, true);
  synth->add_option("--out", synth_out, "output directory")->required();

  Inputs train_in;
  std::vector<std::string> train_sets;
  std::string train_seeds, train_episodes, train_out, train_jobs;
  auto* train = app.add_subcommand("train", "train learners over a seed sweep");
  train_in.add_to(train, true);
  train->add_option("--seeds,--seed", train_seeds, "seed list such as 1,2,5 or 1-5");
  train->add_option("--episodes", train_episodes, "episodes per seed");
  train->add_option("--out", train_out, "output directory");
  train->add_option("--jobs", train_jobs, "parallel seeds (0: hardware threads)");
  train->add_option("--set", train_sets, "extra key=value configuration entries");

  Inputs verify_in;
  std::string verify_shield_path, verify_mode = "exhaustive", verify_out;
  std::size_t walks = 1000, walk_length = 1000, max_states = 2'000'000;
  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "check a shield against its specification");
  verify_in.add_to(verify, false);
  verify->add_option("--shield", verify_shield_path, "shield JSON file")->required();
  verify->add_option("--mode", verify_mode, "exhaustive or randomized");
  verify->add_option("--walks", walks, "random walks (randomized mode)");
  verify->add_option("--walk-length", walk_length, "steps per walk (randomized mode)");
  verify->add_option("--seed", verify_seed, "seed for randomized mode");
  verify->add_option("--max-states", max_states, "joint state bound (exhaustive mode)");
  verify->add_option("--out", verify_out, "write the JSON report here");

  std::string report_in;
  std::size_t report_tail = 100, report_window = 20;
  std::optional<double> report_threshold;
  auto* report = app.add_subcommand("report", "summarize a training output directory");
  report->add_option("--in", report_in, "directory written by train")->required();
  report->add_option("--tail", report_tail, "episodes averaged at the end of each run");
  report->add_option("--threshold", report_threshold, "return threshold for episodes-to-threshold");
  report->add_option("--window", report_window, "moving-average window for the threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*synth) return cmd_synth(synth_in, synth_out);
    if (*train) return cmd_train(train_in, train_sets, train_seeds, train_episodes, train_out, train_jobs);
    if (*verify) {
      return cmd_verify(verify_in, verify_shield_path, verify_mode, walks, walk_length, verify_seed, max_states,
                        verify_out);
    }
    if (*report) {
      if (report_window == 0) throw ConfigError({"window: must be positive"});
      return cmd_report(report_in, report_tail, report_threshold, report_window);
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kInvalid;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kIoFailure;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kIoFailure;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kInvalid;
  }
  return kInvalid;
}
