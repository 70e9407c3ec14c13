#pragma once

// Deterministic safety word automata over (label x action) letters, the
// pattern builders used for the shipped specifications, and the products
// and checks that operate on them.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shieldkit/alphabet.hpp"

namespace shieldkit::automata {

enum class Role { Specification, Abstraction };

/// How a letter (l, a) lines up with the environment's time steps.
///
/// SameStep: l is the label of the state in which a is chosen.
/// ActionThenOutcome: l is the label observed after a has been executed.
enum class LetterTiming { SameStep, ActionThenOutcome };

struct Letter {
  LabelId label = 0;
  ActionId action = 0;
  friend bool operator==(const Letter&, const Letter&) = default;
};
using Word = std::vector<Letter>;

enum class Direction : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };
inline constexpr std::uint8_t direction_bit(Direction d) {
  return static_cast<std::uint8_t>(1u << static_cast<unsigned>(d));
}

/// Raw transition table used to construct an automaton.
/// `delta` is laid out as [state][label][action].
struct AutomatonTable {
  Alphabet labels;
  Alphabet actions;
  std::size_t num_states = 0;
  StateId initial = 0;
  std::vector<bool> safe;
  std::vector<StateId> delta;
  Role role = Role::Specification;
  LetterTiming timing = LetterTiming::SameStep;
  std::vector<std::string> state_names;  // optional; empty means generated names
};

/// Immutable deterministic safety automaton.
///
/// Construction canonicalizes the table: all unsafe states collapse into a
/// single absorbing fail state that is numbered after every safe state. Safe
/// states keep their relative order, so a table whose unsafe states are
/// already at the end keeps its numbering.
class SafetyAutomaton {
 public:
  static SafetyAutomaton from_table(AutomatonTable table);

  const Alphabet& labels() const noexcept { return labels_; }
  const Alphabet& actions() const noexcept { return actions_; }
  std::size_t num_states() const noexcept { return safe_.size(); }
  std::size_t num_safe_states() const noexcept;
  StateId initial() const noexcept { return initial_; }
  Role role() const noexcept { return role_; }
  LetterTiming timing() const noexcept { return timing_; }

  bool is_safe(StateId s) const { return safe_.at(s); }
  std::optional<StateId> fail_state() const noexcept { return fail_; }
  const std::string& state_name(StateId s) const { return names_.at(s); }

  StateId next(StateId s, LabelId l, ActionId a) const {
    return delta_[(static_cast<std::size_t>(s) * labels_.size() + l) * actions_.size() + a];
  }

  StateId run(std::span<const Letter> word) const;
  StateId run_from(StateId start, std::span<const Letter> word) const;
  /// Index of the first letter after which the run is unsafe.
  std::optional<std::size_t> first_violation(std::span<const Letter> word) const;
  bool accepts(std::span<const Letter> word) const { return !first_violation(word); }

  /// Letters that reach an unsafe state straight from the initial state.
  std::vector<Letter> immediate_violations() const;

  SafetyAutomaton with_role(Role role) const;
  SafetyAutomaton with_timing(LetterTiming timing) const;
  /// Copy of the table this automaton was built from (post-canonicalization).
  AutomatonTable table() const;

 private:
  SafetyAutomaton() = default;

  Alphabet labels_;
  Alphabet actions_;
  StateId initial_ = 0;
  std::vector<bool> safe_;
  std::vector<StateId> delta_;
  std::optional<StateId> fail_;
  Role role_ = Role::Specification;
  LetterTiming timing_ = LetterTiming::SameStep;
  std::vector<std::string> names_;
};

// Pattern builders. All of them return reachable automata with at most one
// fail state and role Specification, timing SameStep.

SafetyAutomaton accept_all(const Alphabet& labels, const Alphabet& actions);

/// Fails as soon as a label in `bad` is read.
SafetyAutomaton build_invariance(const Alphabet& labels, const Alphabet& actions,
                                 std::span<const LabelId> bad);

/// Once the executed action switches between `watched` and any other action,
/// the new mode has to persist for `hold` consecutive steps (the switching
/// step included). The automaton starts in a settled mode: not-watched unless
/// `start_in_watched` is set.
SafetyAutomaton build_min_hold(const Alphabet& labels, const Alphabet& actions,
                               ActionId watched, unsigned hold, bool start_in_watched = false);

/// Fails once a label from `sticky` has been read more than `max_consecutive`
/// times in a row. Any other label resets the counter.
SafetyAutomaton build_bounded_stay(const Alphabet& labels, const Alphabet& actions,
                                   std::span<const LabelId> sticky, unsigned max_consecutive);
SafetyAutomaton build_bounded_stay(const Alphabet& labels, const Alphabet& actions,
                                   LabelId sticky, unsigned max_consecutive);

/// Fails when the chosen move points into a direction flagged as blocked by
/// the current label. `blocked` holds one direction_bit() mask per label;
/// `move` names the direction of each action (nullopt for non-moves).
SafetyAutomaton build_collision(const Alphabet& labels, std::span<const std::uint8_t> blocked,
                                const Alphabet& actions,
                                std::span<const std::optional<Direction>> move);

/// Synchronous product; language is the intersection.
SafetyAutomaton conjoin(const SafetyAutomaton& a, const SafetyAutomaton& b);

SafetyAutomaton prune_unreachable(const SafetyAutomaton& m);

/// Safe states from which every infinite path eventually leaves the safe set.
std::vector<StateId> validate_abstraction(const SafetyAutomaton& m);

/// Marks the offenders reported by validate_abstraction() as unsafe.
SafetyAutomaton demote_offenders(const SafetyAutomaton& m);

/// Shortest word accepted by exactly one of the two automata, if any.
std::optional<Word> find_distinguishing_word(const SafetyAutomaton& a, const SafetyAutomaton& b);

inline bool language_equivalent(const SafetyAutomaton& a, const SafetyAutomaton& b) {
  return !find_distinguishing_word(a, b).has_value();
}

std::string to_string(Role role);
std::string to_string(LetterTiming timing);

}  // namespace shieldkit::automata
