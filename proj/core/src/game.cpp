#include "shieldkit/game.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "shieldkit/errors.hpp"

namespace shieldkit::game {

namespace {

std::uint64_t pair_key(StateId q, StateId qm) {
  return (static_cast<std::uint64_t>(q) << 32) | qm;
}

// Reverse adjacency: for each target, the (source, label, action) triples hitting it.
struct ReverseEdges {
  std::vector<std::size_t> offset;
  std::vector<std::uint64_t> edge;  // source * letters + label * |A| + action

  explicit ReverseEdges(const SafetyGame& g) {
    const std::size_t n = g.num_states();
    const std::size_t nl = g.labels().size();
    const std::size_t na = g.actions().size();
    offset.assign(n + 1, 0);
    for (StateId s = 0; s < n; ++s)
      for (LabelId l = 0; l < nl; ++l)
        for (ActionId a = 0; a < na; ++a) ++offset[g.next(s, l, a) + 1];
    for (std::size_t i = 0; i < n; ++i) offset[i + 1] += offset[i];
    edge.resize(offset[n]);
    std::vector<std::size_t> fill(offset.begin(), offset.end() - 1);
    for (StateId s = 0; s < n; ++s)
      for (LabelId l = 0; l < nl; ++l)
        for (ActionId a = 0; a < na; ++a)
          edge[fill[g.next(s, l, a)]++] = (static_cast<std::uint64_t>(s) * nl + l) * na + a;
  }
};

}  // namespace

TurnOrder turn_order_for(automata::LetterTiming timing) {
  return timing == automata::LetterTiming::SameStep ? TurnOrder::EnvironmentFirst
                                                     : TurnOrder::SystemFirst;
}

std::string to_string(TurnOrder order) {
  return order == TurnOrder::EnvironmentFirst ? "environment_first" : "system_first";
}

SafetyGame SafetyGame::from_table(Table t) {
  const std::size_t n = t.safe.size();
  if (t.labels.empty() || t.actions.empty()) throw ConstructionError("game: empty alphabet");
  if (n == 0) throw ConstructionError("game: no states");
  if (t.origins.size() != n) throw ConstructionError("game: origin list does not match state count");
  if (t.delta.size() != n * t.labels.size() * t.actions.size()) {
    throw ConstructionError("game: transition table is not total");
  }
  for (StateId to : t.delta) {
    if (to >= n) throw ConstructionError("game: transition target out of range");
  }
  if (t.initial >= n) throw ConstructionError("game: initial state out of range");
  if (t.safe[0] || t.origins[0].kind != StateOrigin::Kind::Fail) {
    throw ConstructionError("game: state 0 must be the unsafe fail state");
  }
  if (!t.state_names.empty() && t.state_names.size() != n) {
    throw ConstructionError("game: state name count does not match state count");
  }

  SafetyGame g;
  g.labels_ = std::move(t.labels);
  g.actions_ = std::move(t.actions);
  g.order_ = t.order;
  g.origins_ = std::move(t.origins);
  g.safe_ = std::move(t.safe);
  g.delta_ = std::move(t.delta);
  g.initial_ = t.initial;
  g.sizes_ = t.sizes;
  if (g.sizes_.merged_reachable == 0) g.sizes_.merged_reachable = n;
  g.names_ = std::move(t.state_names);
  if (g.names_.empty()) {
    g.names_.resize(n);
    for (StateId s = 0; s < n; ++s) g.names_[s] = "g" + std::to_string(s);
    g.names_[0] = "fail";
  }
  for (StateId s = 0; s < n; ++s) {
    const auto& o = g.origins_[s];
    if (o.kind == StateOrigin::Kind::Paradise) {
      if (g.paradise_) throw ConstructionError("game: more than one paradise state");
      if (!g.safe_[s]) throw ConstructionError("game: paradise state must be safe");
      g.paradise_ = s;
    } else if (o.kind == StateOrigin::Kind::Product) {
      g.index_.emplace(pair_key(o.spec_state, o.abs_state), s);
    }
  }
  return g;
}

std::optional<StateId> SafetyGame::find(StateId spec_state, StateId abs_state) const {
  const auto it = index_.find(pair_key(spec_state, abs_state));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SafetyGame build_safety_game(const automata::SafetyAutomaton& spec,
                             const automata::SafetyAutomaton& abs) {
  if (!(spec.labels() == abs.labels()) || !(spec.actions() == abs.actions())) {
    throw AlphabetMismatch("game: specification and abstraction alphabets differ");
  }
  if (spec.timing() != abs.timing()) {
    throw AlphabetMismatch("game: specification and abstraction use different letter timing");
  }
  if (!spec.is_safe(spec.initial())) throw ConstructionError("game: specification initial state is unsafe");

  const std::size_t nl = spec.labels().size();
  const std::size_t na = spec.actions().size();

  SafetyGame::Table t;
  t.labels = spec.labels();
  t.actions = spec.actions();
  t.order = turn_order_for(spec.timing());
  t.sizes.raw_pairs = spec.num_states() * abs.num_states();
  t.sizes.merged_full = spec.num_safe_states() * abs.num_safe_states() + 2;

  t.origins.push_back({StateOrigin::Kind::Fail, kNoState, kNoState});
  t.safe.push_back(false);
  t.state_names.emplace_back("fail");
  StateId paradise = kNoState;

  std::unordered_map<std::uint64_t, StateId> ids;
  std::deque<StateId> queue;
  auto intern = [&](StateId q, StateId qm) -> StateId {
    if (!abs.is_safe(qm)) {
      if (paradise == kNoState) {
        paradise = static_cast<StateId>(t.safe.size());
        t.origins.push_back({StateOrigin::Kind::Paradise, kNoState, kNoState});
        t.safe.push_back(true);
        t.state_names.emplace_back("paradise");
      }
      return paradise;
    }
    if (!spec.is_safe(q)) return 0;
    const auto [it, fresh] = ids.emplace(pair_key(q, qm), static_cast<StateId>(t.safe.size()));
    if (fresh) {
      t.origins.push_back({StateOrigin::Kind::Product, q, qm});
      t.safe.push_back(true);
      t.state_names.push_back("(" + spec.state_name(q) + "," + abs.state_name(qm) + ")");
      queue.push_back(it->second);
    }
    return it->second;
  };

  t.initial = intern(spec.initial(), abs.initial());
  // Rows are filled in discovery order; the delta table grows with the state list.
  std::vector<StateId> rows;
  auto row = [&](StateId s) -> StateId* {
    const std::size_t need = (static_cast<std::size_t>(s) + 1) * nl * na;
    if (rows.size() < need) rows.resize(need, kNoState);
    return rows.data() + static_cast<std::size_t>(s) * nl * na;
  };
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    const auto o = t.origins[s];
    for (LabelId l = 0; l < nl; ++l) {
      for (ActionId a = 0; a < na; ++a) {
        const StateId to = intern(spec.next(o.spec_state, l, a), abs.next(o.abs_state, l, a));
        row(s)[l * na + a] = to;
      }
    }
  }
  const std::size_t n = t.safe.size();
  rows.resize(n * nl * na, kNoState);
  std::fill_n(rows.begin(), nl * na, 0);  // fail is absorbing
  if (paradise != kNoState) {
    std::fill_n(rows.begin() + static_cast<std::ptrdiff_t>(paradise * nl * na), nl * na, paradise);
  }
  t.delta = std::move(rows);
  t.sizes.merged_reachable = n;
  return SafetyGame::from_table(std::move(t));
}

std::size_t WinningRegion::size() const {
  return static_cast<std::size_t>(std::count(member.begin(), member.end(), true));
}

WinningRegion solve(const SafetyGame& game) {
  const std::size_t n = game.num_states();
  const std::size_t nl = game.labels().size();
  const std::size_t na = game.actions().size();
  const ReverseEdges rev(game);

  WinningRegion w;
  w.member.assign(n, false);
  w.peel_round.assign(n, WinningRegion::kNotPeeled);
  std::deque<StateId> removed;
  for (StateId s = 0; s < n; ++s) {
    if (game.is_safe(s)) {
      w.member[s] = true;
    } else {
      w.peel_round[s] = 0;
      removed.push_back(s);
    }
  }

  // Counters start from the full state set; the queued unsafe states are
  // then removed like any other.
  // EnvironmentFirst: live[s][l] counts actions still leading into the region.
  // SystemFirst: ok[s][a] says every label keeps action a inside; live[s] counts ok actions.
  const bool env_first = game.order() == TurnOrder::EnvironmentFirst;
  std::vector<std::uint32_t> live;
  std::vector<char> ok;
  if (env_first) {
    live.assign(n * nl, static_cast<std::uint32_t>(na));
  } else {
    ok.assign(n * na, 1);
    live.assign(n, static_cast<std::uint32_t>(na));
  }
  auto drop = [&](StateId s, std::uint32_t round) {
    w.member[s] = false;
    w.peel_round[s] = round;
    removed.push_back(s);
  };

  while (!removed.empty()) {
    const StateId h = removed.front();
    removed.pop_front();
    for (std::size_t k = rev.offset[h]; k < rev.offset[h + 1]; ++k) {
      const std::uint64_t e = rev.edge[k];
      const auto s = static_cast<StateId>(e / (nl * na));
      if (!w.member[s]) continue;
      const auto l = static_cast<LabelId>((e / na) % nl);
      const auto a = static_cast<ActionId>(e % na);
      if (env_first) {
        if (--live[s * nl + l] == 0) drop(s, w.peel_round[h] + 1);
      } else if (ok[s * na + a]) {
        ok[s * na + a] = 0;
        if (--live[s] == 0) drop(s, w.peel_round[h] + 1);
      }
    }
  }
  w.realizable = w.member[game.initial()];
  return w;
}

std::vector<ActionId> winning_actions(const SafetyGame& game, const WinningRegion& region,
                                      StateId g, LabelId l) {
  std::vector<ActionId> out;
  const std::size_t nl = game.labels().size();
  for (ActionId a = 0; a < game.actions().size(); ++a) {
    bool good = true;
    if (game.order() == TurnOrder::EnvironmentFirst) {
      good = region.member[game.next(g, l, a)];
    } else {
      for (LabelId k = 0; k < nl && good; ++k) good = region.member[game.next(g, k, a)];
    }
    if (good) out.push_back(a);
  }
  return out;
}

std::vector<StateId> closure_violations(const SafetyGame& game, const std::vector<bool>& region) {
  std::vector<StateId> bad;
  const std::size_t nl = game.labels().size();
  const std::size_t na = game.actions().size();
  for (StateId g = 0; g < game.num_states(); ++g) {
    if (!region[g]) continue;
    bool closed = game.is_safe(g);
    if (game.order() == TurnOrder::EnvironmentFirst) {
      for (LabelId l = 0; l < nl && closed; ++l) {
        bool some = false;
        for (ActionId a = 0; a < na && !some; ++a) some = region[game.next(g, l, a)];
        closed = some;
      }
    } else {
      bool some = false;
      for (ActionId a = 0; a < na && !some; ++a) {
        bool all = true;
        for (LabelId l = 0; l < nl && all; ++l) all = region[game.next(g, l, a)];
        some = all;
      }
      closed = closed && some;
    }
    if (!closed) bad.push_back(g);
  }
  return bad;
}

std::vector<StateId> maximality_violations(const SafetyGame& game, const std::vector<bool>& region) {
  std::vector<StateId> bad;
  const std::size_t nl = game.labels().size();
  const std::size_t na = game.actions().size();
  for (StateId g = 0; g < game.num_states(); ++g) {
    if (region[g] || !game.is_safe(g)) continue;
    bool env_wins = false;
    if (game.order() == TurnOrder::EnvironmentFirst) {
      for (LabelId l = 0; l < nl && !env_wins; ++l) {
        bool all_out = true;
        for (ActionId a = 0; a < na && all_out; ++a) all_out = !region[game.next(g, l, a)];
        env_wins = all_out;
      }
    } else {
      env_wins = true;
      for (ActionId a = 0; a < na && env_wins; ++a) {
        bool some_out = false;
        for (LabelId l = 0; l < nl && !some_out; ++l) some_out = !region[game.next(g, l, a)];
        env_wins = some_out;
      }
    }
    if (!env_wins) bad.push_back(g);
  }
  return bad;
}

std::string explain_unrealizable(const SafetyGame& game, const WinningRegion& region) {
  if (region.realizable) return {};
  const std::size_t nl = game.labels().size();
  const std::size_t na = game.actions().size();
  const auto& rank = region.peel_round;
  std::ostringstream out;
  out << "environment wins from " << game.state_name(game.initial()) << " within "
      << rank[game.initial()] << " step(s):\n";
  StateId g = game.initial();
  while (game.is_safe(g)) {
    LabelId best_l = 0;
    ActionId best_a = 0;
    if (game.order() == TurnOrder::EnvironmentFirst) {
      // Environment picks the label with the quickest forced loss; the system
      // then delays as long as it can.
      std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
      for (LabelId l = 0; l < nl; ++l) {
        std::uint32_t worst = 0;
        ActionId arg = 0;
        for (ActionId a = 0; a < na; ++a) {
          const std::uint32_t r = rank[game.next(g, l, a)];
          if (a == 0 || r > worst) {
            worst = r;
            arg = a;
          }
        }
        if (worst < best) {
          best = worst;
          best_l = l;
          best_a = arg;
        }
      }
    } else {
      std::uint32_t best = 0;
      bool first = true;
      for (ActionId a = 0; a < na; ++a) {
        std::uint32_t quickest = std::numeric_limits<std::uint32_t>::max();
        LabelId arg = 0;
        for (LabelId l = 0; l < nl; ++l) {
          const std::uint32_t r = rank[game.next(g, l, a)];
          if (r < quickest) {
            quickest = r;
            arg = l;
          }
        }
        if (first || quickest > best) {
          best = quickest;
          best_a = a;
          best_l = arg;
          first = false;
        }
      }
    }
    const StateId to = game.next(g, best_l, best_a);
    out << "  " << game.state_name(g) << " --(" << game.labels().name(best_l) << ", "
        << game.actions().name(best_a) << ")--> " << game.state_name(to) << '\n';
    if (rank[to] >= rank[g]) break;  // defensive: ranks strictly decrease on the principal line
    g = to;
  }
  return out.str();
}

std::string to_json(const SafetyGame& game, const WinningRegion* region) {
  using nlohmann::json;
  json j;
  j["order"] = to_string(game.order());
  j["labels"] = game.labels().names();
  j["actions"] = game.actions().names();
  j["initial"] = game.initial();
  j["sizes"] = {{"raw_pairs", game.sizes().raw_pairs},
                {"merged_full", game.sizes().merged_full},
                {"merged_reachable", game.sizes().merged_reachable}};
  json states = json::array();
  for (StateId g = 0; g < game.num_states(); ++g) {
    json s;
    s["id"] = g;
    s["name"] = game.state_name(g);
    s["safe"] = game.is_safe(g);
    if (region) s["winning"] = static_cast<bool>(region->member[g]);
    json succ = json::array();
    for (LabelId l = 0; l < game.labels().size(); ++l)
      for (ActionId a = 0; a < game.actions().size(); ++a) succ.push_back(game.next(g, l, a));
    s["next"] = std::move(succ);
    states.push_back(std::move(s));
  }
  j["states"] = std::move(states);
  if (region) j["realizable"] = region->realizable;
  return j.dump();
}

std::string to_dot(const SafetyGame& game, const WinningRegion* region, std::size_t max_states) {
  if (game.num_states() > max_states) {
    throw ConstructionError("game: " + std::to_string(game.num_states()) +
                            " states exceed the DOT export limit of " + std::to_string(max_states));
  }
  std::ostringstream out;
  out << "digraph game {\n  rankdir=LR;\n";
  for (StateId g = 0; g < game.num_states(); ++g) {
    out << "  g" << g << " [label=\"" << game.state_name(g) << "\"";
    if (!game.is_safe(g)) {
      out << ", shape=doublecircle";
    } else if (region && !region->member[g]) {
      out << ", style=dashed";
    }
    out << "];\n";
  }
  if (game.initial() < game.num_states()) out << "  init [shape=point];\n  init -> g" << game.initial() << ";\n";
  for (StateId g = 0; g < game.num_states(); ++g) {
    std::vector<std::pair<StateId, std::string>> edges;
    for (LabelId l = 0; l < game.labels().size(); ++l) {
      for (ActionId a = 0; a < game.actions().size(); ++a) {
        const StateId to = game.next(g, l, a);
        if (to == g && (!game.is_safe(g) || game.origin(g).kind == StateOrigin::Kind::Paradise)) continue;
        const std::string letter = game.labels().name(l) + "/" + game.actions().name(a);
        auto it = std::find_if(edges.begin(), edges.end(), [&](const auto& e) { return e.first == to; });
        if (it == edges.end()) {
          edges.emplace_back(to, letter);
        } else {
          it->second += "\\n" + letter;
        }
      }
    }
    for (const auto& [to, text] : edges) out << "  g" << g << " -> g" << to << " [label=\"" << text << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace shieldkit::game
