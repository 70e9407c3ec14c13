#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shieldkit/automata_io.hpp"
#include "shieldkit/envs/grid.hpp"
#include "shieldkit/envs/watertank.hpp"
#include "shieldkit/errors.hpp"

namespace shieldkit::cli {

namespace {

std::string join_problems(const std::vector<std::string>& p) {
  std::string out = "invalid configuration:";
  for (const auto& s : p) out += "\n  " + s;
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc{} && r.ptr == end;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
  } else if (s == "false" || s == "0" || s == "no") {
    out = false;
  } else {
    return false;
  }
  return true;
}

bool is_builtin(const std::string& source) { return source == "builtin" || source == "accept-all"; }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  for (int row = 1; std::getline(in, line); ++row) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(row) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      problems.push_back("line " + std::to_string(row) + ": empty key");
      continue;
    }
    if (out.count(key)) problems.push_back("line " + std::to_string(row) + ": duplicate key " + key);
    out[key] = trim(line.substr(eq + 1));
  }
  if (!problems.empty()) throw ConfigError(problems);
  return out;
}

std::string to_string(Placement p) {
  switch (p) {
    case Placement::None: return "none";
    case Placement::Preemptive: return "preemptive";
    case Placement::Postposed: return "postposed";
  }
  return "?";
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "env",         "map",         "cycle",          "energy",      "spec",          "abstraction",
      "placement",   "algorithm",   "alpha",          "gamma",       "epsilon_start", "epsilon_end",
      "epsilon_decay", "rank_width", "reward_variant", "punishment", "random_tie_break",
      "single_state_view", "initial_value", "episodes", "seeds",      "out",           "jobs"};
  return keys;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    const auto dash = item.find('-');
    std::uint64_t a = 0, b = 0;
    if (dash != std::string::npos && dash > 0) {
      if (!parse_number(trim(item.substr(0, dash)), a) || !parse_number(trim(item.substr(dash + 1)), b) || b < a) {
        throw ConfigError({"seeds: bad range '" + item + "'"});
      }
      for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    } else if (parse_number(item, a)) {
      out.push_back(a);
    } else {
      throw ConfigError({"seeds: '" + item + "' is not a seed"});
    }
  }
  if (out.empty()) throw ConfigError({"seeds: empty list"});
  return out;
}

void ExperimentConfig::apply(const std::map<std::string, std::string>& values) {
  std::vector<std::string> problems;
  const auto bad = [&](const std::string& key, const std::string& v, const std::string& want) {
    problems.push_back(key + ": '" + v + "' is not " + want);
  };
  for (const auto& [key, v] : values) {
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      problems.push_back("unknown key '" + key + "'");
      continue;
    }
    explicit_keys.push_back(key);
    if (key == "env") {
      env = v;
    } else if (key == "map") {
      map = v;
    } else if (key == "cycle") {
      cycle = v;
    } else if (key == "energy") {
      energy = v;
    } else if (key == "spec") {
      spec = v;
    } else if (key == "abstraction") {
      abstraction = v;
    } else if (key == "placement") {
      if (v == "none") placement = Placement::None;
      else if (v == "preemptive") placement = Placement::Preemptive;
      else if (v == "postposed") placement = Placement::Postposed;
      else bad(key, v, "none, preemptive or postposed");
    } else if (key == "algorithm") {
      if (v == "q" || v == "qlearning") learner.algorithm = learn::Algorithm::QLearning;
      else if (v == "sarsa") learner.algorithm = learn::Algorithm::Sarsa;
      else bad(key, v, "q or sarsa");
    } else if (key == "reward_variant") {
      if (v == "punish") learner.reward_variant = learn::RewardVariant::Punish;
      else if (v == "passthrough") learner.reward_variant = learn::RewardVariant::Passthrough;
      else bad(key, v, "punish or passthrough");
    } else if (key == "alpha" || key == "gamma" || key == "epsilon_start" || key == "epsilon_end" ||
               key == "punishment" || key == "initial_value") {
      double x = 0;
      if (!parse_number(v, x) || !std::isfinite(x)) {
        bad(key, v, "a number");
        continue;
      }
      if (key == "alpha") learner.alpha = x;
      if (key == "gamma") learner.gamma = x;
      if (key == "epsilon_start") learner.epsilon.start = x;
      if (key == "epsilon_end") learner.epsilon.end = x;
      if (key == "punishment") learner.punishment = x;
      if (key == "initial_value") learner.initial_value = x;
    } else if (key == "epsilon_decay" || key == "rank_width" || key == "episodes" || key == "jobs") {
      std::size_t n = 0;
      if (!parse_number(v, n)) {
        bad(key, v, "a non-negative integer");
        continue;
      }
      if (key == "epsilon_decay") learner.epsilon.decay_episodes = n;
      if (key == "rank_width") learner.rank_width = n;
      if (key == "episodes") episodes = n;
      if (key == "jobs") jobs = n;
    } else if (key == "random_tie_break" || key == "single_state_view") {
      bool b = false;
      if (!parse_bool(v, b)) {
        bad(key, v, "true or false");
        continue;
      }
      (key == "random_tie_break" ? learner.random_tie_break : learner.single_state_view) = b;
    } else if (key == "seeds") {
      try {
        seeds = parse_seeds(v);
      } catch (const ConfigError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
      }
    } else if (key == "out") {
      out = v;
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
}

std::vector<std::string> ExperimentConfig::problems() const {
  std::vector<std::string> p = learner.problems();
  const bool grid = env == "grid9x9" || env == "grid15x9" || env == "grid";
  if (env != "watertank" && !grid) p.push_back("env: unknown environment '" + env + "'");
  if (env == "grid" && !map) p.push_back("map: required for env = grid");
  if (map && env != "grid") p.push_back("map: only used with env = grid");
  if (cycle && !map) p.push_back("cycle: needs a map");
  if (energy && env != "watertank") p.push_back("energy: only used with env = watertank");
  const auto must_exist = [&](const std::string& key, const std::filesystem::path& f) {
    if (!std::filesystem::exists(f)) p.push_back(key + ": file not found: " + f.string());
  };
  if (map) must_exist("map", *map);
  if (cycle) must_exist("cycle", *cycle);
  if (energy) must_exist("energy", *energy);
  if (!is_builtin(spec)) must_exist("spec", spec);
  if (abstraction != "builtin") must_exist("abstraction", abstraction);
  if (placement == Placement::None) {
    for (const std::string key : {"spec", "abstraction", "rank_width", "reward_variant", "punishment",
                                  "single_state_view"}) {
      if (std::find(explicit_keys.begin(), explicit_keys.end(), key) != explicit_keys.end()) {
        p.push_back(key + ": shield setting given with placement = none");
      }
    }
  }
  if (seeds.empty()) p.push_back("seeds: empty list");
  if (out.empty()) p.push_back("out: empty path");
  return p;
}

std::string to_key_values(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto& l = c.learner;
  os << "env = " << c.env << '\n';
  if (c.map) os << "map = " << c.map->string() << '\n';
  if (c.cycle) os << "cycle = " << c.cycle->string() << '\n';
  if (c.energy) os << "energy = " << c.energy->string() << '\n';
  os << "placement = " << to_string(c.placement) << '\n';
  if (c.placement != Placement::None) {
    os << "spec = " << c.spec << '\n';
    os << "abstraction = " << c.abstraction << '\n';
    os << "rank_width = " << l.rank_width << '\n';
    os << "reward_variant = " << learn::to_string(l.reward_variant) << '\n';
    os << "punishment = " << l.punishment << '\n';
    os << "single_state_view = " << (l.single_state_view ? "true" : "false") << '\n';
  }
  os << "algorithm = " << (l.algorithm == learn::Algorithm::Sarsa ? "sarsa" : "q") << '\n';
  os << "alpha = " << l.alpha << '\n';
  os << "gamma = " << l.gamma << '\n';
  os << "epsilon_start = " << l.epsilon.start << '\n';
  os << "epsilon_end = " << l.epsilon.end << '\n';
  os << "epsilon_decay = " << l.epsilon.decay_episodes << '\n';
  os << "random_tie_break = " << (l.random_tie_break ? "true" : "false") << '\n';
  os << "initial_value = " << l.initial_value << '\n';
  os << "episodes = " << c.episodes << '\n';
  os << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
  os << '\n';
  return os.str();
}

std::unique_ptr<envs::Environment> make_environment(const ExperimentConfig& c) {
  if (c.env == "watertank") {
    envs::WaterTank::Config tc;
    if (c.energy) tc.energy = envs::load_energy_csv(*c.energy);
    return std::make_unique<envs::WaterTank>(tc);
  }
  if (c.env == "grid9x9") return std::make_unique<envs::GridWorld>(envs::default_map_9x9(), "grid9x9");
  if (c.env == "grid15x9") return std::make_unique<envs::GridWorld>(envs::default_map_15x9(), "grid15x9");
  if (c.env == "grid") {
    if (!c.map) throw ConfigError({"map: required for env = grid"});
    return std::make_unique<envs::GridWorld>(envs::load_map(*c.map, c.cycle), c.map->stem().string());
  }
  throw ConfigError({"env: unknown environment '" + c.env + "'"});
}

automata::SafetyAutomaton load_spec(const std::string& source, const envs::Environment& env) {
  if (source == "builtin") return env.specification();
  if (source == "accept-all") {
    return automata::accept_all(env.labels(), env.actions()).with_timing(env.specification().timing());
  }
  return automata::load(source);
}

automata::SafetyAutomaton load_abstraction(const std::string& source, const envs::Environment& env) {
  if (source == "builtin") return env.abstraction();
  return automata::load(source);
}

std::string aggregate_csv(const std::vector<learn::RunLog>& logs) {
  std::ostringstream os;
  os.precision(10);
  os << "episode,seeds,reward_mean,reward_stderr,violations_mean,interventions_mean\n";
  std::size_t n = 0;
  for (const auto& l : logs) n = std::max(n, l.episodes.size());
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<const learn::EpisodeRecord*> rows;
    for (const auto& l : logs) {
      if (e < l.episodes.size()) rows.push_back(&l.episodes[e]);
    }
    const double k = static_cast<double>(rows.size());
    double mean = 0, viol = 0, inter = 0;
    for (const auto* r : rows) {
      mean += r->accumulated_reward;
      viol += static_cast<double>(r->violations);
      inter += static_cast<double>(r->interventions);
    }
    mean /= k;
    double var = 0;
    for (const auto* r : rows) var += (r->accumulated_reward - mean) * (r->accumulated_reward - mean);
    const double stderr_ = rows.size() > 1 ? std::sqrt(var / (k - 1) / k) : 0.0;
    os << e << ',' << rows.size() << ',' << mean << ',' << stderr_ << ',' << viol / k << ',' << inter / k << '\n';
  }
  return os.str();
}

void write_atomically(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << text;
    if (!f) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace shieldkit::cli
