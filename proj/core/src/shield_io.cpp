#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shieldkit/errors.hpp"
#include "shieldkit/shield.hpp"

namespace shieldkit::shield {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json index_or_null(std::uint32_t v, std::uint32_t none) { return v == none ? json(nullptr) : json(v); }

std::uint32_t read_index(const json& v, std::size_t bound, const std::string& what) {
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() >= bound) {
    throw SchemaError("shield: invalid " + what);
  }
  return v.get<std::uint32_t>();
}

Shield from_json_impl(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("shield: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", std::string()) != "shieldkit-shield") {
    throw SchemaError("shield: not a shield file");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw SchemaError("shield: unsupported format version");
  }
  Shield::Table t;
  const std::string placement = j.at("placement").get<std::string>();
  if (placement == "preemptive") {
    t.placement = Placement::Preemptive;
  } else if (placement == "postposed") {
    t.placement = Placement::Postposed;
  } else {
    throw SchemaError("shield: unknown placement '" + placement + "'");
  }
  const std::string order = j.at("order").get<std::string>();
  if (order == "environment_first") {
    t.order = game::TurnOrder::EnvironmentFirst;
  } else if (order == "system_first") {
    t.order = game::TurnOrder::SystemFirst;
  } else {
    throw SchemaError("shield: unknown order '" + order + "'");
  }
  try {
    t.labels = Alphabet(j.at("labels").get<std::vector<std::string>>());
    t.actions = Alphabet(j.at("actions").get<std::vector<std::string>>());
  } catch (const ConstructionError& e) {
    throw SchemaError(std::string("shield: ") + e.what());
  }
  const std::size_t nl = t.labels.size();
  const std::size_t na = t.actions.size();
  if (nl == 0 || na == 0) throw SchemaError("shield: empty alphabet");
  if (na > kMaxActions) throw SchemaError("shield: more than 64 actions");

  const json& states = j.at("states");
  if (!states.is_array() || states.empty()) throw SchemaError("shield: 'states' must be a nonempty array");
  const std::size_t n = states.size();
  for (const auto& s : states) {
    Shield::StateInfo info;
    info.name = s.at("name").get<std::string>();
    info.paradise = s.at("paradise").get<bool>();
    info.game_state = s.at("game_state").is_null() ? kNoState : s.at("game_state").get<StateId>();
    info.pending = s.at("pending").is_null() ? kNoAction : read_index(s.at("pending"), na, "pending action");
    t.states.push_back(std::move(info));
  }
  t.initial = read_index(j.at("initial"), n, "initial state");

  const json& menu = j.at("menu");
  const json& next = j.at("next");
  const json& sub = j.at("substitute");
  if (!menu.is_array() || menu.size() != n || !next.is_array() || next.size() != n || !sub.is_array() ||
      sub.size() != n) {
    throw SchemaError("shield: tables must have one row per state");
  }
  t.menu.assign(n * nl, 0);
  t.substitute.assign(n * nl, kNoAction);
  t.next.assign(n * nl * na, kNoState);
  for (std::size_t s = 0; s < n; ++s) {
    if (menu[s].size() != nl || next[s].size() != nl || sub[s].size() != nl) {
      throw SchemaError("shield: truncated table row for state " + std::to_string(s));
    }
    for (std::size_t l = 0; l < nl; ++l) {
      ActionSet m = 0;
      for (const auto& a : menu[s][l]) m |= action_bit(read_index(a, na, "menu action"));
      if (m == 0) {
        throw SchemaError("shield: empty menu at state " + std::to_string(s) + ", label " + std::to_string(l));
      }
      t.menu[s * nl + l] = m;
      t.substitute[s * nl + l] = read_index(sub[s][l], na, "substitute");
      const json& row = next[s][l];
      if (!row.is_array() || row.size() != na) {
        throw SchemaError("shield: truncated successor row at state " + std::to_string(s));
      }
      for (std::size_t a = 0; a < na; ++a) {
        if (!row[a].is_null()) t.next[(s * nl + l) * na + a] = read_index(row[a], n, "successor");
      }
    }
  }
  try {
    return Shield::from_table(std::move(t));
  } catch (const ConstructionError& e) {
    throw SchemaError(e.what());
  }
}

}  // namespace

std::string to_json(const Shield& shield) {
  const auto& t = shield.table();
  const std::size_t nl = t.labels.size();
  const std::size_t na = t.actions.size();
  json j;
  j["format"] = "shieldkit-shield";
  j["version"] = kFormatVersion;
  j["placement"] = to_string(t.placement);
  j["order"] = game::to_string(t.order);
  j["labels"] = t.labels.names();
  j["actions"] = t.actions.names();
  j["initial"] = t.initial;
  json states = json::array();
  for (const auto& s : t.states) {
    states.push_back({{"name", s.name},
                      {"paradise", s.paradise},
                      {"game_state", index_or_null(s.game_state, kNoState)},
                      {"pending", index_or_null(s.pending, kNoAction)}});
  }
  j["states"] = std::move(states);
  json menu = json::array();
  json next = json::array();
  json sub = json::array();
  for (std::size_t s = 0; s < t.states.size(); ++s) {
    json mrow = json::array();
    json nrow = json::array();
    json srow = json::array();
    for (std::size_t l = 0; l < nl; ++l) {
      mrow.push_back(to_list(t.menu[s * nl + l]));
      json succ = json::array();
      for (std::size_t a = 0; a < na; ++a) succ.push_back(index_or_null(t.next[(s * nl + l) * na + a], kNoState));
      nrow.push_back(std::move(succ));
      srow.push_back(t.substitute[s * nl + l]);
    }
    menu.push_back(std::move(mrow));
    next.push_back(std::move(nrow));
    sub.push_back(std::move(srow));
  }
  j["menu"] = std::move(menu);
  j["next"] = std::move(next);
  j["substitute"] = std::move(sub);
  return j.dump();
}

Shield from_json(const std::string& text) {
  try {
    return from_json_impl(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("shield: ") + e.what());
  }
}

void save(const Shield& shield, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(shield) << '\n';
}

Shield load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace shieldkit::shield
