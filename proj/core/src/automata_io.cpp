#include "shieldkit/automata_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shieldkit/errors.hpp"

namespace shieldkit::automata {

using nlohmann::json;

namespace {

Alphabet read_alphabet(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw SchemaError(std::string("automaton: missing array '") + key + "'");
  }
  return Alphabet(j[key].get<std::vector<std::string>>());
}

std::uint64_t read_index(const json& v, std::uint64_t bound, const char* what) {
  if (!v.is_number_unsigned()) throw SchemaError(std::string("automaton: ") + what + " is not an index");
  const auto x = v.get<std::uint64_t>();
  if (x >= bound) throw SchemaError(std::string("automaton: ") + what + " out of range");
  return x;
}

}  // namespace

std::string to_json(const SafetyAutomaton& m) {
  json j;
  j["role"] = to_string(m.role());
  j["timing"] = to_string(m.timing());
  j["labels"] = m.labels().names();
  j["actions"] = m.actions().names();
  j["states"] = m.num_states();
  j["initial"] = m.initial();
  json safe = json::array();
  json names = json::array();
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (m.is_safe(s)) safe.push_back(s);
    names.push_back(m.state_name(s));
  }
  j["safe"] = std::move(safe);
  j["state_names"] = std::move(names);
  json tr = json::array();
  for (StateId s = 0; s < m.num_states(); ++s) {
    for (LabelId l = 0; l < m.labels().size(); ++l) {
      for (ActionId a = 0; a < m.actions().size(); ++a) {
        tr.push_back({s, l, a, m.next(s, l, a)});
      }
    }
  }
  j["transitions"] = std::move(tr);
  return j.dump();
}

namespace {

SafetyAutomaton from_json_impl(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("automaton: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("automaton: top level must be an object");

  AutomatonTable t;
  try {
    t.labels = read_alphabet(j, "labels");
    t.actions = read_alphabet(j, "actions");
  } catch (const ConstructionError& e) {
    throw SchemaError(std::string("automaton: ") + e.what());
  }
  if (!j.contains("states") || !j["states"].is_number_unsigned()) {
    throw SchemaError("automaton: 'states' must be a count");
  }
  t.num_states = j["states"].get<std::size_t>();
  if (t.num_states == 0) throw SchemaError("automaton: 'states' must be positive");
  if (!j.contains("initial")) throw SchemaError("automaton: missing 'initial'");
  t.initial = static_cast<StateId>(read_index(j["initial"], t.num_states, "initial state"));

  const std::string role = j.value("role", std::string("specification"));
  if (role == "specification") {
    t.role = Role::Specification;
  } else if (role == "abstraction") {
    t.role = Role::Abstraction;
  } else {
    throw SchemaError("automaton: unknown role '" + role + "'");
  }
  const std::string timing = j.value("timing", std::string("same_step"));
  if (timing == "same_step") {
    t.timing = LetterTiming::SameStep;
  } else if (timing == "action_then_outcome") {
    t.timing = LetterTiming::ActionThenOutcome;
  } else {
    throw SchemaError("automaton: unknown timing '" + timing + "'");
  }

  t.safe.assign(t.num_states, false);
  if (!j.contains("safe") || !j["safe"].is_array()) throw SchemaError("automaton: missing 'safe'");
  for (const auto& v : j["safe"]) t.safe[read_index(v, t.num_states, "safe state")] = true;

  if (j.contains("state_names")) {
    t.state_names = j["state_names"].get<std::vector<std::string>>();
    if (t.state_names.size() != t.num_states) throw SchemaError("automaton: state_names has wrong length");
  }

  const std::size_t nl = t.labels.size();
  const std::size_t na = t.actions.size();
  if (nl == 0 || na == 0) throw SchemaError("automaton: empty alphabet");
  t.delta.assign(t.num_states * nl * na, kNoState);
  if (!j.contains("transitions") || !j["transitions"].is_array()) {
    throw SchemaError("automaton: missing 'transitions'");
  }
  for (const auto& row : j["transitions"]) {
    if (!row.is_array() || row.size() != 4) {
      throw SchemaError("automaton: transitions must be [from, label, action, to]");
    }
    const auto from = read_index(row[0], t.num_states, "transition source");
    const auto l = read_index(row[1], nl, "transition label");
    const auto a = read_index(row[2], na, "transition action");
    const auto to = read_index(row[3], t.num_states, "transition target");
    auto& slot = t.delta[(from * nl + l) * na + a];
    if (slot != kNoState) throw SchemaError("automaton: duplicate transition");
    slot = static_cast<StateId>(to);
  }
  for (std::size_t k = 0; k < t.delta.size(); ++k) {
    if (t.delta[k] == kNoState) {
      const std::size_t s = k / (nl * na);
      const std::size_t l = (k / na) % nl;
      const std::size_t a = k % na;
      throw SchemaError("automaton: transition function is not total (state " + std::to_string(s) +
                        ", label " + t.labels.name(static_cast<LabelId>(l)) + ", action " +
                        t.actions.name(static_cast<ActionId>(a)) + ")");
    }
  }
  try {
    return SafetyAutomaton::from_table(std::move(t));
  } catch (const ConstructionError& e) {
    throw SchemaError(e.what());
  }
}

}  // namespace

SafetyAutomaton from_json(const std::string& text) {
  try {
    return from_json_impl(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("automaton: ") + e.what());
  }
}

void save(const SafetyAutomaton& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(m) << '\n';
}

SafetyAutomaton load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace shieldkit::automata
