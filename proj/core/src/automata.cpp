#include "shieldkit/automata.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>

#include "shieldkit/errors.hpp"

namespace shieldkit::automata {

namespace {

void require_alphabets(const Alphabet& labels, const Alphabet& actions, const char* who) {
  if (labels.empty() || actions.empty()) {
    throw ConstructionError(std::string(who) + ": label and action alphabets must be nonempty");
  }
}

std::size_t letter_count(const Alphabet& labels, const Alphabet& actions) {
  return labels.size() * actions.size();
}

// Builds a table from a successor function over an explicit state list.
// States for which `safe` is false are merged by from_table().
template <typename Next>
AutomatonTable make_table(const Alphabet& labels, const Alphabet& actions, std::size_t n,
                          StateId initial, std::vector<bool> safe, std::vector<std::string> names,
                          Next&& next) {
  AutomatonTable t;
  t.labels = labels;
  t.actions = actions;
  t.num_states = n;
  t.initial = initial;
  t.safe = std::move(safe);
  t.state_names = std::move(names);
  t.delta.resize(n * letter_count(labels, actions));
  for (StateId s = 0; s < n; ++s) {
    for (LabelId l = 0; l < labels.size(); ++l) {
      for (ActionId a = 0; a < actions.size(); ++a) {
        t.delta[(static_cast<std::size_t>(s) * labels.size() + l) * actions.size() + a] =
            next(s, l, a);
      }
    }
  }
  return t;
}

}  // namespace

std::string to_string(Role role) {
  return role == Role::Specification ? "specification" : "abstraction";
}

std::string to_string(LetterTiming timing) {
  return timing == LetterTiming::SameStep ? "same_step" : "action_then_outcome";
}

SafetyAutomaton SafetyAutomaton::from_table(AutomatonTable t) {
  require_alphabets(t.labels, t.actions, "automaton");
  if (t.num_states == 0) throw ConstructionError("automaton: no states");
  if (t.safe.size() != t.num_states) {
    throw ConstructionError("automaton: safe flags do not match the state count");
  }
  const std::size_t letters = letter_count(t.labels, t.actions);
  if (t.delta.size() != t.num_states * letters) {
    throw ConstructionError("automaton: transition table is not total");
  }
  if (t.initial >= t.num_states) throw ConstructionError("automaton: initial state out of range");
  for (StateId to : t.delta) {
    if (to >= t.num_states) throw ConstructionError("automaton: transition target out of range");
  }
  if (!t.safe[t.initial]) {
    throw ConstructionError("automaton: initial state is unsafe (specification is vacuously violated)");
  }
  if (!t.state_names.empty() && t.state_names.size() != t.num_states) {
    throw ConstructionError("automaton: state name count does not match the state count");
  }

  // Renumber: safe states first in original order, then one fail state.
  std::vector<StateId> remap(t.num_states);
  StateId next_id = 0;
  for (StateId s = 0; s < t.num_states; ++s) {
    if (t.safe[s]) remap[s] = next_id++;
  }
  const StateId num_safe = next_id;
  const bool has_fail = num_safe < t.num_states;
  for (StateId s = 0; s < t.num_states; ++s) {
    if (!t.safe[s]) remap[s] = num_safe;
  }
  const std::size_t n = num_safe + (has_fail ? 1 : 0);

  SafetyAutomaton m;
  m.labels_ = std::move(t.labels);
  m.actions_ = std::move(t.actions);
  m.role_ = t.role;
  m.timing_ = t.timing;
  m.initial_ = remap[t.initial];
  m.safe_.assign(n, true);
  m.delta_.resize(n * letters);
  m.names_.resize(n);
  for (StateId s = 0; s < t.num_states; ++s) {
    if (!t.safe[s]) continue;
    const StateId r = remap[s];
    std::copy_n(t.delta.begin() + static_cast<std::ptrdiff_t>(s * letters), letters,
                m.delta_.begin() + static_cast<std::ptrdiff_t>(r * letters));
    for (std::size_t k = 0; k < letters; ++k) {
      auto& to = m.delta_[r * letters + k];
      to = remap[to];
    }
    m.names_[r] = t.state_names.empty() ? "q" + std::to_string(s) : t.state_names[s];
  }
  if (has_fail) {
    m.fail_ = num_safe;
    m.safe_[num_safe] = false;
    std::fill_n(m.delta_.begin() + static_cast<std::ptrdiff_t>(num_safe * letters), letters,
                num_safe);
    m.names_[num_safe] = "fail";
  }
  return m;
}

std::size_t SafetyAutomaton::num_safe_states() const noexcept {
  return static_cast<std::size_t>(std::count(safe_.begin(), safe_.end(), true));
}

StateId SafetyAutomaton::run_from(StateId start, std::span<const Letter> word) const {
  StateId s = start;
  for (const Letter& x : word) s = next(s, x.label, x.action);
  return s;
}

StateId SafetyAutomaton::run(std::span<const Letter> word) const { return run_from(initial_, word); }

std::optional<std::size_t> SafetyAutomaton::first_violation(std::span<const Letter> word) const {
  StateId s = initial_;
  for (std::size_t i = 0; i < word.size(); ++i) {
    s = next(s, word[i].label, word[i].action);
    if (!safe_[s]) return i;
  }
  return std::nullopt;
}

std::vector<Letter> SafetyAutomaton::immediate_violations() const {
  std::vector<Letter> out;
  for (LabelId l = 0; l < labels_.size(); ++l) {
    for (ActionId a = 0; a < actions_.size(); ++a) {
      if (!safe_[next(initial_, l, a)]) out.push_back({l, a});
    }
  }
  return out;
}

SafetyAutomaton SafetyAutomaton::with_role(Role role) const {
  SafetyAutomaton copy = *this;
  copy.role_ = role;
  return copy;
}

SafetyAutomaton SafetyAutomaton::with_timing(LetterTiming timing) const {
  SafetyAutomaton copy = *this;
  copy.timing_ = timing;
  return copy;
}

AutomatonTable SafetyAutomaton::table() const {
  AutomatonTable t;
  t.labels = labels_;
  t.actions = actions_;
  t.num_states = safe_.size();
  t.initial = initial_;
  t.safe = safe_;
  t.delta = delta_;
  t.role = role_;
  t.timing = timing_;
  t.state_names = names_;
  return t;
}

SafetyAutomaton prune_unreachable(const SafetyAutomaton& m) {
  const std::size_t n = m.num_states();
  std::vector<StateId> order;
  std::vector<StateId> id(n, kNoState);
  id[m.initial()] = 0;
  order.push_back(m.initial());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const StateId s = order[i];
    for (LabelId l = 0; l < m.labels().size(); ++l) {
      for (ActionId a = 0; a < m.actions().size(); ++a) {
        const StateId t = m.next(s, l, a);
        if (id[t] == kNoState) {
          id[t] = static_cast<StateId>(order.size());
          order.push_back(t);
        }
      }
    }
  }
  std::vector<bool> safe(order.size());
  std::vector<std::string> names(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    safe[i] = m.is_safe(order[i]);
    names[i] = m.state_name(order[i]);
  }
  auto t = make_table(m.labels(), m.actions(), order.size(), 0, std::move(safe), std::move(names),
                      [&](StateId s, LabelId l, ActionId a) { return id[m.next(order[s], l, a)]; });
  t.role = m.role();
  t.timing = m.timing();
  return SafetyAutomaton::from_table(std::move(t));
}

SafetyAutomaton accept_all(const Alphabet& labels, const Alphabet& actions) {
  require_alphabets(labels, actions, "accept_all");
  return SafetyAutomaton::from_table(make_table(labels, actions, 1, 0, {true}, {"top"},
                                                [](StateId, LabelId, ActionId) { return 0u; }));
}

SafetyAutomaton build_invariance(const Alphabet& labels, const Alphabet& actions,
                                 std::span<const LabelId> bad) {
  require_alphabets(labels, actions, "build_invariance");
  std::vector<bool> is_bad(labels.size(), false);
  for (LabelId l : bad) {
    if (l >= labels.size()) throw ConstructionError("build_invariance: bad label out of range");
    is_bad[l] = true;
  }
  // 0 = ok, 1 = fail
  auto t = make_table(labels, actions, 2, 0, {true, false}, {"ok", "fail"},
                      [&](StateId s, LabelId l, ActionId) -> StateId {
                        return (s == 1 || is_bad[l]) ? 1 : 0;
                      });
  return prune_unreachable(SafetyAutomaton::from_table(std::move(t)));
}

SafetyAutomaton build_min_hold(const Alphabet& labels, const Alphabet& actions, ActionId watched,
                               unsigned hold, bool start_in_watched) {
  require_alphabets(labels, actions, "build_min_hold");
  if (hold == 0) throw ConstructionError("build_min_hold: hold must be at least 1");
  if (watched >= actions.size()) throw ConstructionError("build_min_hold: watched action out of range");

  // State (mode, remaining): mode 0 = not watched, 1 = watched; remaining in
  // [0, hold-1] counts the steps still owed to the current mode.
  const unsigned per_mode = hold;
  const std::size_t n = 2 * per_mode + 1;
  const StateId fail = static_cast<StateId>(n - 1);
  auto encode = [&](unsigned mode, unsigned remaining) {
    return static_cast<StateId>(mode * per_mode + remaining);
  };
  std::vector<bool> safe(n, true);
  safe[fail] = false;
  std::vector<std::string> names(n);
  const std::string watched_name = actions.name(watched);
  for (unsigned mode = 0; mode < 2; ++mode) {
    for (unsigned r = 0; r < per_mode; ++r) {
      names[encode(mode, r)] = (mode ? watched_name : "not_" + watched_name) +
                               (r == 0 ? std::string("/settled") : "/owes" + std::to_string(r));
    }
  }
  names[fail] = "fail";

  auto t = make_table(labels, actions, n, encode(start_in_watched ? 1 : 0, 0), std::move(safe),
                      std::move(names), [&](StateId s, LabelId, ActionId a) -> StateId {
                        if (s == fail) return fail;
                        const unsigned mode = s / per_mode;
                        const unsigned remaining = s % per_mode;
                        const unsigned chosen = (a == watched) ? 1 : 0;
                        if (chosen == mode) return encode(mode, remaining == 0 ? 0 : remaining - 1);
                        if (remaining > 0) return fail;
                        return encode(chosen, hold - 1);
                      });
  return prune_unreachable(SafetyAutomaton::from_table(std::move(t)));
}

SafetyAutomaton build_bounded_stay(const Alphabet& labels, const Alphabet& actions,
                                   std::span<const LabelId> sticky, unsigned max_consecutive) {
  require_alphabets(labels, actions, "build_bounded_stay");
  std::vector<bool> is_sticky(labels.size(), false);
  for (LabelId l : sticky) {
    if (l >= labels.size()) throw ConstructionError("build_bounded_stay: sticky label out of range");
    is_sticky[l] = true;
  }
  // Counter states 0..max_consecutive, then fail.
  const std::size_t n = max_consecutive + 2;
  const StateId fail = static_cast<StateId>(n - 1);
  std::vector<bool> safe(n, true);
  safe[fail] = false;
  std::vector<std::string> names(n);
  for (StateId s = 0; s < fail; ++s) names[s] = "stay" + std::to_string(s);
  names[fail] = "fail";
  auto t = make_table(labels, actions, n, 0, std::move(safe), std::move(names),
                      [&](StateId s, LabelId l, ActionId) -> StateId {
                        if (s == fail) return fail;
                        if (!is_sticky[l]) return 0;
                        return s + 1;  // s + 1 == fail once the bound is exceeded
                      });
  return prune_unreachable(SafetyAutomaton::from_table(std::move(t)));
}

SafetyAutomaton build_bounded_stay(const Alphabet& labels, const Alphabet& actions, LabelId sticky,
                                   unsigned max_consecutive) {
  const LabelId one[] = {sticky};
  return build_bounded_stay(labels, actions, one, max_consecutive);
}

SafetyAutomaton build_collision(const Alphabet& labels, std::span<const std::uint8_t> blocked,
                                const Alphabet& actions,
                                std::span<const std::optional<Direction>> move) {
  require_alphabets(labels, actions, "build_collision");
  if (blocked.size() != labels.size()) {
    throw ConstructionError("build_collision: every label needs an obstacle mask");
  }
  if (move.size() != actions.size()) {
    throw ConstructionError("build_collision: every action needs a direction entry");
  }
  std::uint8_t covered = 0;
  for (const auto& d : move) {
    if (d) covered |= direction_bit(*d);
  }
  if (covered != 0x0F) throw ConstructionError("build_collision: a direction has no move action");
  for (std::uint8_t mask : blocked) {
    if (mask & ~0x0F) throw ConstructionError("build_collision: obstacle mask has unknown flags");
  }
  auto t = make_table(labels, actions, 2, 0, {true, false}, {"clear", "crashed"},
                      [&](StateId s, LabelId l, ActionId a) -> StateId {
                        if (s == 1) return 1;
                        return (move[a] && (blocked[l] & direction_bit(*move[a]))) ? 1 : 0;
                      });
  return prune_unreachable(SafetyAutomaton::from_table(std::move(t)));
}

SafetyAutomaton conjoin(const SafetyAutomaton& a, const SafetyAutomaton& b) {
  if (!(a.labels() == b.labels()) || !(a.actions() == b.actions())) {
    throw AlphabetMismatch("conjoin: automata use different alphabets");
  }
  if (a.timing() != b.timing()) throw AlphabetMismatch("conjoin: automata use different letter timing");

  const std::size_t nl = a.labels().size();
  const std::size_t na = a.actions().size();
  std::map<std::pair<StateId, StateId>, StateId> index;
  std::vector<std::pair<StateId, StateId>> pairs;
  // Pairs where either side is unsafe all map to one fail state, created lazily.
  StateId fail = kNoState;
  std::vector<StateId> delta;
  auto intern = [&](StateId x, StateId y) -> StateId {
    if (!a.is_safe(x) || !b.is_safe(y)) {
      if (fail == kNoState) {
        fail = static_cast<StateId>(pairs.size());
        pairs.emplace_back(kNoState, kNoState);
      }
      return fail;
    }
    auto [it, inserted] = index.try_emplace({x, y}, static_cast<StateId>(pairs.size()));
    if (inserted) pairs.emplace_back(x, y);
    return it->second;
  };
  intern(a.initial(), b.initial());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [x, y] = pairs[i];
    for (LabelId l = 0; l < nl; ++l) {
      for (ActionId act = 0; act < na; ++act) {
        const StateId to = (x == kNoState) ? fail : intern(a.next(x, l, act), b.next(y, l, act));
        delta.push_back(to);
      }
    }
  }
  AutomatonTable t;
  t.labels = a.labels();
  t.actions = a.actions();
  t.num_states = pairs.size();
  t.initial = 0;
  t.safe.resize(pairs.size());
  t.state_names.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    t.safe[i] = pairs[i].first != kNoState;
    t.state_names[i] = t.safe[i] ? a.state_name(pairs[i].first) + "&" + b.state_name(pairs[i].second)
                                 : "fail";
  }
  t.delta = std::move(delta);
  t.role = a.role() == b.role() ? a.role() : Role::Specification;
  t.timing = a.timing();
  return SafetyAutomaton::from_table(std::move(t));
}

std::vector<StateId> validate_abstraction(const SafetyAutomaton& m) {
  // Greatest fixed point of "safe and has a successor in the set", computed
  // by peeling states whose safe successor count drops to zero.
  const std::size_t n = m.num_states();
  std::vector<std::vector<StateId>> preds(n);
  std::vector<std::size_t> alive_succ(n, 0);
  for (StateId s = 0; s < n; ++s) {
    if (!m.is_safe(s)) continue;
    std::vector<StateId> succ;
    for (LabelId l = 0; l < m.labels().size(); ++l) {
      for (ActionId a = 0; a < m.actions().size(); ++a) succ.push_back(m.next(s, l, a));
    }
    std::sort(succ.begin(), succ.end());
    succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
    for (StateId t : succ) {
      if (m.is_safe(t)) {
        ++alive_succ[s];
        preds[t].push_back(s);
      }
    }
  }
  std::vector<bool> in_set(n, false);
  std::deque<StateId> queue;
  for (StateId s = 0; s < n; ++s) {
    in_set[s] = m.is_safe(s);
    if (in_set[s] && alive_succ[s] == 0) queue.push_back(s);
  }
  std::vector<StateId> offenders;
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    if (!in_set[s]) continue;
    in_set[s] = false;
    offenders.push_back(s);
    for (StateId p : preds[s]) {
      if (in_set[p] && --alive_succ[p] == 0) queue.push_back(p);
    }
  }
  std::sort(offenders.begin(), offenders.end());
  return offenders;
}

SafetyAutomaton demote_offenders(const SafetyAutomaton& m) {
  const auto offenders = validate_abstraction(m);
  if (offenders.empty()) return m;
  auto t = m.table();
  for (StateId s : offenders) t.safe[s] = false;
  if (!t.safe[t.initial]) {
    throw ConstructionError("demote_offenders: initial state has no infinite safe continuation");
  }
  return SafetyAutomaton::from_table(std::move(t));
}

std::optional<Word> find_distinguishing_word(const SafetyAutomaton& a, const SafetyAutomaton& b) {
  if (!(a.labels() == b.labels()) || !(a.actions() == b.actions())) {
    throw AlphabetMismatch("find_distinguishing_word: automata use different alphabets");
  }
  // BFS over the pair graph; a pair with mismatched safety is a witness.
  // Pairs where both sides are unsafe are dead (both reject every extension).
  struct Visit {
    StateId x, y;
    std::size_t parent;
    Letter via;
  };
  std::vector<Visit> visits;
  std::map<std::pair<StateId, StateId>, std::size_t> seen;
  visits.push_back({a.initial(), b.initial(), static_cast<std::size_t>(-1), {}});
  seen[{a.initial(), b.initial()}] = 0;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    const auto [x, y, parent, via] = visits[i];
    if (a.is_safe(x) != b.is_safe(y)) {
      Word w;
      for (std::size_t k = i; visits[k].parent != static_cast<std::size_t>(-1); k = visits[k].parent) {
        w.push_back(visits[k].via);
      }
      std::reverse(w.begin(), w.end());
      return w;
    }
    if (!a.is_safe(x)) continue;
    for (LabelId l = 0; l < a.labels().size(); ++l) {
      for (ActionId act = 0; act < a.actions().size(); ++act) {
        const std::pair<StateId, StateId> key{a.next(x, l, act), b.next(y, l, act)};
        if (seen.try_emplace(key, visits.size()).second) {
          visits.push_back({key.first, key.second, i, {l, act}});
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace shieldkit::automata
