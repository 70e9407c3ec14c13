#include "shieldkit/shield.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "shieldkit/errors.hpp"

namespace shieldkit::shield {

std::vector<ActionId> to_list(ActionSet s) {
  std::vector<ActionId> out;
  while (s) {
    out.push_back(static_cast<ActionId>(std::countr_zero(s)));
    s &= s - 1;
  }
  return out;
}

ActionSet full_set(std::size_t num_actions) {
  return num_actions >= 64 ? ~ActionSet{0} : (ActionSet{1} << num_actions) - 1;
}

std::string to_string(Placement p) { return p == Placement::Preemptive ? "preemptive" : "postposed"; }

Ranking::Ranking(std::vector<ActionId> order, std::size_t num_actions) : order_(std::move(order)) {
  if (order_.empty()) throw ContractViolation("ranking: must contain at least one action");
  if (order_.size() > num_actions) throw ContractViolation("ranking: longer than the action alphabet");
  ActionSet seen = 0;
  for (ActionId a : order_) {
    if (a >= num_actions) throw ContractViolation("ranking: unknown action " + std::to_string(a));
    if (contains(seen, a)) throw ContractViolation("ranking: duplicate action " + std::to_string(a));
    seen |= action_bit(a);
  }
}

Shield Shield::from_table(Table t) {
  const std::size_t nl = t.labels.size();
  const std::size_t na = t.actions.size();
  const std::size_t n = t.states.size();
  if (nl == 0 || na == 0) throw ConstructionError("shield: empty alphabet");
  if (na > kMaxActions) throw ConstructionError("shield: more than 64 actions");
  if (n == 0) throw ConstructionError("shield: no states");
  if (t.initial >= n) throw ConstructionError("shield: initial state out of range");
  if (t.menu.size() != n * nl || t.substitute.size() != n * nl || t.next.size() != n * nl * na) {
    throw ConstructionError("shield: tables are not total");
  }
  const ActionSet all = full_set(na);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t l = 0; l < nl; ++l) {
      const ActionSet m = t.menu[s * nl + l];
      const std::string where = " at state " + std::to_string(s) + ", label " + std::to_string(l);
      if (m == 0) throw ConstructionError("shield: empty menu" + where);
      if (m & ~all) throw ConstructionError("shield: menu names an unknown action" + where);
      const ActionId sub = t.substitute[s * nl + l];
      if (sub >= na || !contains(m, sub)) throw ConstructionError("shield: substitute outside the menu" + where);
      for (ActionId a = 0; a < na; ++a) {
        const StateId to = t.next[(s * nl + l) * na + a];
        if (contains(m, a) && to >= n) throw ConstructionError("shield: missing successor" + where);
        if (!contains(m, a) && to != kNoState) throw ConstructionError("shield: successor for a blocked action" + where);
      }
    }
  }
  Shield sh;
  sh.t_ = std::move(t);
  return sh;
}

bool Shield::trivial() const {
  const ActionSet all = full_set(t_.actions.size());
  return std::all_of(t_.menu.begin(), t_.menu.end(), [&](ActionSet m) { return m == all; });
}

StateId Shield::decision_state(StateId s, LabelId l) const {
  if (t_.order == game::TurnOrder::EnvironmentFirst) return s;
  const ActionSet m = menu(s, l);
  if (m == 0) return s;
  const StateId n = next(s, l, static_cast<ActionId>(std::countr_zero(m)));
  return n == kNoState ? s : n;
}

bool Shield::single_state_certified() const {
  const auto ordinary = std::count_if(t_.states.begin(), t_.states.end(),
                                      [](const StateInfo& i) { return !i.paradise; });
  return ordinary <= 1;
}

Shield Shield::with_menu(StateId s, LabelId l, ActionSet menu) const {
  Shield copy = *this;
  const std::size_t nl = t_.labels.size();
  const std::size_t na = t_.actions.size();
  copy.t_.menu[s * nl + l] = menu;
  for (ActionId a = 0; a < na; ++a) {
    if (!contains(menu, a)) copy.t_.next[(s * nl + l) * na + a] = kNoState;
  }
  if (!contains(menu, copy.t_.substitute[s * nl + l])) {
    copy.t_.substitute[s * nl + l] = menu ? static_cast<ActionId>(std::countr_zero(menu)) : kNoAction;
  }
  return copy;
}

namespace {

Shield extract(const game::SafetyGame& game, const game::WinningRegion& region, Placement placement,
               const FallbackPolicy& fallback) {
  if (game.actions().size() > kMaxActions) throw ConstructionError("shield: more than 64 actions");
  if (!region.realizable) {
    throw UnrealizableError("specification is unrealizable against the abstraction",
                            game::explain_unrealizable(game, region));
  }
  const std::size_t nl = game.labels().size();
  const std::size_t na = game.actions().size();
  const bool env_first = game.order() == game::TurnOrder::EnvironmentFirst;
  const auto paradise = game.paradise_state();

  // Actions that keep the play in W when committed at game state g; for
  // environment-first games this depends on the label as well.
  auto winning = [&](StateId g, LabelId l) {
    ActionSet m = 0;
    for (ActionId a : game::winning_actions(game, region, g, l)) m |= action_bit(a);
    return m;
  };

  Shield::Table t;
  t.placement = placement;
  t.order = game.order();
  t.labels = game.labels();
  t.actions = game.actions();

  std::unordered_map<std::uint64_t, StateId> ids;
  std::deque<StateId> queue;
  StateId paradise_id = kNoState;
  auto intern = [&](StateId g, ActionId pending) -> StateId {
    if (paradise && g == *paradise) {
      if (paradise_id == kNoState) {
        paradise_id = static_cast<StateId>(t.states.size());
        t.states.push_back({g, kNoAction, true, "paradise"});
        queue.push_back(paradise_id);
      }
      return paradise_id;
    }
    const std::uint64_t key = (static_cast<std::uint64_t>(g) << 32) | pending;
    const auto [it, fresh] = ids.emplace(key, static_cast<StateId>(t.states.size()));
    if (fresh) {
      std::string name = game.state_name(g);
      if (pending != kNoAction) name += "|" + game.actions().name(pending);
      t.states.push_back({g, pending, false, std::move(name)});
      queue.push_back(it->second);
    }
    return it->second;
  };

  t.initial = intern(game.initial(), kNoAction);
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    const auto info = t.states[s];
    const std::size_t need = (static_cast<std::size_t>(s) + 1) * nl;
    if (t.menu.size() < need) {
      t.menu.resize(need, 0);
      t.substitute.resize(need, kNoAction);
      t.next.resize(need * na, kNoState);
    }
    for (LabelId l = 0; l < nl; ++l) {
      ActionSet m = 0;
      StateId here = info.game_state;
      if (!info.paradise && !env_first && info.pending != kNoAction) {
        here = game.next(info.game_state, l, info.pending);
      }
      const bool in_paradise = info.paradise || (paradise && here == *paradise);
      if (in_paradise) {
        m = full_set(na);
      } else {
        m = winning(here, l);
      }
      if (m == 0) {
        throw ConstructionError("shield: empty menu at " + game.state_name(here) +
                                " (region is not closed)");
      }
      ActionId sub = static_cast<ActionId>(std::countr_zero(m));
      if (fallback.kind == FallbackPolicy::Kind::ConfiguredPerState) {
        const auto it = fallback.preferred.find({here, l});
        if (it != fallback.preferred.end() && it->second < na && contains(m, it->second)) sub = it->second;
      }
      t.menu[s * nl + l] = m;
      t.substitute[s * nl + l] = sub;
      for (ActionId a : to_list(m)) {
        StateId to;
        if (in_paradise) {
          to = intern(*paradise, kNoAction);
        } else if (env_first) {
          to = intern(game.next(here, l, a), kNoAction);
        } else {
          to = intern(here, a);
        }
        t.next[(s * nl + l) * na + a] = to;
      }
    }
  }
  return Shield::from_table(std::move(t));
}

}  // namespace

Shield extract_preemptive(const game::SafetyGame& game, const game::WinningRegion& region) {
  return extract(game, region, Placement::Preemptive, {});
}

Shield extract_postposed(const game::SafetyGame& game, const game::WinningRegion& region,
                         const FallbackPolicy& fallback) {
  return extract(game, region, Placement::Postposed, fallback);
}

ActionSet preemptive_step(const Shield& shield, StateId s, LabelId l) { return shield.menu(s, l); }

StateId advance(const Shield& shield, StateId s, LabelId l, ActionId chosen) {
  if (chosen >= shield.actions().size() || !contains(shield.menu(s, l), chosen)) {
    throw ContractViolation("shield: action " + std::to_string(chosen) + " is not in the menu of state " +
                            std::to_string(s));
  }
  return shield.next(s, l, chosen);
}

PostposedResult postposed_step(const Shield& shield, StateId s, LabelId l, const Ranking& ranking) {
  const ActionSet m = shield.menu(s, l);
  for (ActionId a : ranking.actions()) {
    if (contains(m, a)) return {a, false, shield.next(s, l, a)};
  }
  const ActionId sub = shield.substitute(s, l);
  return {sub, true, shield.next(s, l, sub)};
}

}  // namespace shieldkit::shield
