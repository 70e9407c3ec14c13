#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "shieldkit/alphabet.hpp"
#include "shieldkit/automata.hpp"

namespace shieldkit::game {

/// Who commits first in a round. EnvironmentFirst: the environment picks a
/// label, then the system picks an action with knowledge of it.
/// SystemFirst: the system commits to an action, then the environment picks
/// the label that results from it.
enum class TurnOrder { EnvironmentFirst, SystemFirst };

TurnOrder turn_order_for(automata::LetterTiming timing);
std::string to_string(TurnOrder order);

struct StateOrigin {
  enum class Kind : std::uint8_t { Product, Fail, Paradise };
  Kind kind = Kind::Product;
  StateId spec_state = kNoState;  // valid for Product
  StateId abs_state = kNoState;   // valid for Product
};

/// State counts under the two conventions used when reporting game sizes.
struct SizeReport {
  std::size_t raw_pairs = 0;          // |Q| * |Q_M| before any merging
  std::size_t merged_full = 0;        // |F| * |F_M| + one fail + one paradise state
  std::size_t merged_reachable = 0;   // states reachable from the initial state after merging
};

/// Product safety game with merged fail and paradise states.
///
/// The fail state always exists (index 0); the paradise state exists only
/// when some play can leave the abstraction's safe set.
class SafetyGame {
 public:
  struct Table {
    Alphabet labels;
    Alphabet actions;
    TurnOrder order = TurnOrder::EnvironmentFirst;
    std::vector<StateOrigin> origins;
    std::vector<bool> safe;
    std::vector<StateId> delta;  // [state][label][action]
    StateId initial = 0;
    SizeReport sizes;
    std::vector<std::string> state_names;  // optional
  };

  /// Direct construction, used for generated test games. Validates totality.
  static SafetyGame from_table(Table table);

  const Alphabet& labels() const noexcept { return labels_; }
  const Alphabet& actions() const noexcept { return actions_; }
  TurnOrder order() const noexcept { return order_; }
  std::size_t num_states() const noexcept { return safe_.size(); }
  StateId initial() const noexcept { return initial_; }
  bool is_safe(StateId g) const { return safe_.at(g); }
  const StateOrigin& origin(StateId g) const { return origins_.at(g); }
  StateId fail_state() const noexcept { return 0; }
  std::optional<StateId> paradise_state() const noexcept { return paradise_; }
  const SizeReport& sizes() const noexcept { return sizes_; }

  StateId next(StateId g, LabelId l, ActionId a) const {
    return delta_[(static_cast<std::size_t>(g) * labels_.size() + l) * actions_.size() + a];
  }

  /// Product state for (spec, abstraction) pair, if it was reached.
  std::optional<StateId> find(StateId spec_state, StateId abs_state) const;

  /// Readable name such as "(q_d,q3)", "fail" or "paradise".
  const std::string& state_name(StateId g) const { return names_.at(g); }

 private:
  SafetyGame() = default;

  Alphabet labels_;
  Alphabet actions_;
  TurnOrder order_ = TurnOrder::EnvironmentFirst;
  std::vector<StateOrigin> origins_;
  std::vector<bool> safe_;
  std::vector<StateId> delta_;
  StateId initial_ = 0;
  std::optional<StateId> paradise_;
  SizeReport sizes_;
  std::vector<std::string> names_;
  std::unordered_map<std::uint64_t, StateId> index_;
};

/// Product of specification and abstraction; pairs whose abstraction
/// component is unsafe collapse into paradise, remaining pairs whose
/// specification component is unsafe collapse into fail. Only states
/// reachable from the initial pair are materialized.
SafetyGame build_safety_game(const automata::SafetyAutomaton& spec,
                             const automata::SafetyAutomaton& abs);

struct WinningRegion {
  std::vector<bool> member;
  bool realizable = false;
  /// Round in which a state left the region (0 for states never safe,
  /// kNotPeeled for members). Used to explain unrealizability.
  std::vector<std::uint32_t> peel_round;

  static constexpr std::uint32_t kNotPeeled = static_cast<std::uint32_t>(-1);

  bool contains(StateId g) const { return member.at(g); }
  std::size_t size() const;
};

/// Greatest fixed point of the controllable-predecessor operator, computed
/// with a worklist over reverse edges.
WinningRegion solve(const SafetyGame& game);

/// Actions that keep the play inside `region` at a decision point. For
/// EnvironmentFirst games the label is the environment's move; SystemFirst
/// games ignore it (the action must be safe for every label).
std::vector<ActionId> winning_actions(const SafetyGame& game, const WinningRegion& region,
                                      StateId g, LabelId l);

/// States violating the closure property of a winning region.
std::vector<StateId> closure_violations(const SafetyGame& game, const std::vector<bool>& region);
/// Safe states outside the region for which the system still has a way to stay in it.
std::vector<StateId> maximality_violations(const SafetyGame& game, const std::vector<bool>& region);

/// Human-readable principal line of play showing how the environment wins
/// from the initial state. Empty when the game is realizable.
std::string explain_unrealizable(const SafetyGame& game, const WinningRegion& region);

std::string to_json(const SafetyGame& game, const WinningRegion* region = nullptr);
/// Graphviz rendering; throws ConstructionError for games above `max_states`.
std::string to_dot(const SafetyGame& game, const WinningRegion* region = nullptr,
                   std::size_t max_states = 1000);

}  // namespace shieldkit::game
