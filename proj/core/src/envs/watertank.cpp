#include "shieldkit/envs/watertank.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shieldkit/errors.hpp"

namespace shieldkit::envs {

using automata::AutomatonTable;
using automata::LetterTiming;
using automata::Role;
using automata::SafetyAutomaton;

Alphabet watertank_labels() {
  std::vector<std::string> names;
  names.reserve(WaterTank::kCapacity + 1);
  names.emplace_back("level<1");
  for (unsigned k = 1; k < WaterTank::kCapacity; ++k) {
    names.push_back(std::to_string(k) + "<=level<" + std::to_string(k + 1));
  }
  names.emplace_back("level>99");
  return Alphabet(std::move(names));
}

Alphabet watertank_actions() { return Alphabet({"open", "close"}); }

std::vector<double> default_energy() {
  std::vector<double> e(WaterTank::kCapacity + 1);
  for (unsigned x = 0; x <= WaterTank::kCapacity; ++x) {
    const double d20 = (x - 20.0) / 8.0;
    const double d70 = (x - 70.0) / 8.0;
    const double v = 1.0 - 0.5 * std::exp(-0.5 * d20 * d20) - 0.9 * std::exp(-0.5 * d70 * d70);
    e[x] = std::round(v * 1e4) / 1e4;
  }
  return e;
}

std::vector<double> load_energy_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<double> e(WaterTank::kCapacity + 1, std::nan(""));
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    if (row == 1 && line.find_first_not_of("0123456789.-, \r") != std::string::npos) continue;  // header
    std::istringstream fields(line);
    unsigned level = 0;
    char comma = 0;
    double value = 0;
    if (!(fields >> level >> comma >> value) || comma != ',') {
      throw SchemaError(path.string() + ":" + std::to_string(row) + ": expected 'level,energy'");
    }
    if (level > WaterTank::kCapacity) {
      throw SchemaError(path.string() + ":" + std::to_string(row) + ": level out of range");
    }
    if (!std::isfinite(value)) throw SchemaError(path.string() + ":" + std::to_string(row) + ": energy is not finite");
    e[level] = value;
  }
  for (unsigned x = 0; x <= WaterTank::kCapacity; ++x) {
    if (std::isnan(e[x])) throw SchemaError(path.string() + ": missing energy for level " + std::to_string(x));
  }
  return e;
}

WaterTank::WaterTank() : WaterTank(Config{}) {}

WaterTank::WaterTank(Config config)
    : config_(std::move(config)), labels_(watertank_labels()), actions_(watertank_actions()) {
  if (config_.energy.empty()) config_.energy = default_energy();
  if (config_.energy.size() != kCapacity + 1) throw ConstructionError("watertank: energy table needs 101 entries");
  if (config_.initial_level < 1 || config_.initial_level >= kCapacity) {
    throw ConstructionError("watertank: initial level must lie in [1, 99]");
  }
  if (!(config_.violation_penalty < 0)) throw ConstructionError("watertank: violation penalty must be negative");
}

EnvState WaterTank::encode(const State& s) const {
  return static_cast<EnvState>((s.level * 2 + s.mode) * kHold + s.remaining);
}

WaterTank::State WaterTank::decode(EnvState s) const {
  State st;
  st.remaining = s % kHold;
  st.mode = static_cast<ActionId>((s / kHold) % 2);
  st.level = s / (2 * kHold);
  return st;
}

EnvState WaterTank::initial_state() const { return encode({config_.initial_level, kClose, 0}); }

LabelId WaterTank::label(EnvState s) const { return static_cast<LabelId>(decode(s).level); }

Transition WaterTank::finish(const State& from, ActionId a, int inflow, int outflow) const {
  State to = from;
  bool violation = false;
  if (a != from.mode) {
    violation = from.remaining > 0;
    to.mode = a;
    to.remaining = kHold - 1;
  } else if (to.remaining > 0) {
    --to.remaining;
  }
  const int level = static_cast<int>(from.level) + inflow - outflow;
  violation = violation || level < 1 || level > static_cast<int>(kCapacity) - 1;
  to.level = static_cast<unsigned>(std::clamp(level, 0, static_cast<int>(kCapacity)));
  Transition t;
  t.next = encode(to);
  t.violation = violation;
  t.terminal = violation;
  t.reward = violation ? config_.violation_penalty : reward(to.level);
  return t;
}

Transition WaterTank::step(EnvState s, ActionId a, Rng& rng) const {
  const State st = decode(s);
  const int inflow = a == kOpen ? 1 + static_cast<int>(rng.below(2)) : 0;
  const int outflow = static_cast<int>(rng.below(2));
  return finish(st, a, inflow, outflow);
}

std::vector<Outcome> WaterTank::outcomes(EnvState s, ActionId a) const {
  const State st = decode(s);
  std::vector<Outcome> out;
  const std::vector<int> inflows = a == kOpen ? std::vector<int>{1, 2} : std::vector<int>{0};
  const double p = 1.0 / (2.0 * static_cast<double>(inflows.size()));
  for (int in : inflows) {
    for (int o : {0, 1}) {
      const Transition t = finish(st, a, in, o);
      auto it = std::find_if(out.begin(), out.end(), [&](const Outcome& x) { return x.transition.next == t.next; });
      if (it == out.end()) {
        out.push_back({p, t});
      } else {
        it->probability += p;
      }
    }
  }
  return out;
}

std::string WaterTank::describe(EnvState s) const {
  const State st = decode(s);
  return "level=" + std::to_string(st.level) + " valve=" + actions_.name(st.mode) +
         " hold=" + std::to_string(st.remaining);
}

SafetyAutomaton WaterTank::specification() const { return watertank_spec(); }
SafetyAutomaton WaterTank::abstraction() const { return watertank_abstraction(config_.initial_level); }

SafetyAutomaton watertank_abstraction(unsigned initial_level) {
  constexpr unsigned levels = WaterTank::kCapacity;  // q_0 .. q_99
  if (initial_level >= levels) throw ConstructionError("watertank: initial level out of range");
  AutomatonTable t;
  t.labels = watertank_labels();
  t.actions = watertank_actions();
  t.num_states = levels + 1;
  t.initial = initial_level;
  t.role = Role::Abstraction;
  t.timing = LetterTiming::ActionThenOutcome;
  t.safe.assign(levels + 1, true);
  t.safe[levels] = false;
  const std::size_t nl = t.labels.size();
  t.delta.assign(t.num_states * nl * 2, levels);
  for (unsigned j = 0; j < levels; ++j) {
    t.state_names.push_back("q" + std::to_string(j));
    auto set = [&](unsigned k, ActionId a) {
      if (k > WaterTank::kCapacity) return;
      t.delta[(j * nl + k) * 2 + a] = std::min(k, levels - 1);
    };
    set(j, WaterTank::kClose);
    if (j > 0) set(j - 1, WaterTank::kClose);
    for (unsigned k = j; k <= j + 2; ++k) set(k, WaterTank::kOpen);
  }
  t.state_names.emplace_back("fail");
  return SafetyAutomaton::from_table(std::move(t));
}

SafetyAutomaton watertank_spec() {
  const Alphabet labels = watertank_labels();
  const Alphabet actions = watertank_actions();
  const std::array<LabelId, 2> bad{0, WaterTank::kCapacity};
  const auto spec = automata::conjoin(
      automata::conjoin(automata::build_invariance(labels, actions, bad),
                        automata::build_min_hold(labels, actions, WaterTank::kOpen, WaterTank::kHold)),
      automata::build_min_hold(labels, actions, WaterTank::kClose, WaterTank::kHold, true));

  // Name the states after the valve history that reaches them.
  AutomatonTable t = spec.table();
  t.timing = LetterTiming::ActionThenOutcome;
  const LabelId mid = 50;
  const ActionId o = WaterTank::kOpen;
  const ActionId c = WaterTank::kClose;
  const std::vector<std::pair<std::string, automata::Word>> named = {
      {"q_a", {}},
      {"q_b", {{mid, o}}},
      {"q_c", {{mid, o}, {mid, o}}},
      {"q_d", {{mid, o}, {mid, o}, {mid, o}}},
      {"q_e", {{mid, o}, {mid, o}, {mid, o}, {mid, c}}},
      {"q_f", {{mid, o}, {mid, o}, {mid, o}, {mid, c}, {mid, c}}},
  };
  t.state_names.assign(t.num_states, "");
  for (const auto& [name, word] : named) t.state_names[spec.run(word)] = name;
  for (StateId s = 0; s < t.num_states; ++s) {
    if (!t.safe[s]) {
      t.state_names[s] = "fail";
    } else if (t.state_names[s].empty()) {
      throw ConstructionError("watertank: unexpected specification state");
    }
  }
  return SafetyAutomaton::from_table(std::move(t));
}

}  // namespace shieldkit::envs
