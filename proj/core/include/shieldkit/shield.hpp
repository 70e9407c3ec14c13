#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shieldkit/alphabet.hpp"
#include "shieldkit/game.hpp"

namespace shieldkit::shield {

/// Set of actions as a bitmask; shields support up to 64 actions.
using ActionSet = std::uint64_t;
inline constexpr std::size_t kMaxActions = 64;
inline constexpr ActionId kNoAction = static_cast<ActionId>(-1);

inline constexpr ActionSet action_bit(ActionId a) { return ActionSet{1} << a; }
inline constexpr bool contains(ActionSet s, ActionId a) { return (s >> a) & 1u; }
inline std::size_t count(ActionSet s) { return static_cast<std::size_t>(std::popcount(s)); }
std::vector<ActionId> to_list(ActionSet s);
ActionSet full_set(std::size_t num_actions);

enum class Placement { Preemptive, Postposed };
std::string to_string(Placement p);

/// Preference-ordered, duplicate-free, nonempty list of actions.
class Ranking {
 public:
  Ranking(std::vector<ActionId> order, std::size_t num_actions);

  const std::vector<ActionId>& actions() const noexcept { return order_; }
  std::size_t size() const noexcept { return order_.size(); }
  ActionId operator[](std::size_t i) const { return order_[i]; }

 private:
  std::vector<ActionId> order_;
};

struct PostposedResult {
  ActionId action = kNoAction;
  bool overridden = false;
  StateId next = kNoState;
};

/// How the post-posed substitute is chosen when the whole ranking is unsafe.
struct FallbackPolicy {
  enum class Kind { LowestIndex, ConfiguredPerState };
  Kind kind = Kind::LowestIndex;
  /// (game state, label) -> preferred substitute. Entries that are not
  /// winning fall back to the lowest index.
  std::map<std::pair<StateId, LabelId>, ActionId> preferred;
};

/// Finite-state shield, read as a Mealy machine: in state s, after observing
/// label l, the allowed actions are menu(s, l) and the chosen action a moves
/// the shield to next(s, l, a).
///
/// For environment-first games a shield state is a winning game state. For
/// system-first games it is a winning game state plus the action committed
/// in the previous step, whose outcome is the next observed label; the very
/// first label is then not used to advance.
class Shield {
 public:
  struct StateInfo {
    StateId game_state = kNoState;
    ActionId pending = kNoAction;
    bool paradise = false;
    std::string name;
  };

  struct Table {
    Placement placement = Placement::Preemptive;
    game::TurnOrder order = game::TurnOrder::EnvironmentFirst;
    Alphabet labels;
    Alphabet actions;
    std::vector<StateInfo> states;
    StateId initial = 0;
    std::vector<ActionSet> menu;       // [state][label]
    std::vector<StateId> next;         // [state][label][action], kNoState outside the menu
    std::vector<ActionId> substitute;  // [state][label]
  };

  /// Validates the table: nonempty menus, successors for every allowed
  /// action, substitutes inside the menu.
  static Shield from_table(Table table);

  Placement placement() const noexcept { return t_.placement; }
  game::TurnOrder order() const noexcept { return t_.order; }
  const Alphabet& labels() const noexcept { return t_.labels; }
  const Alphabet& actions() const noexcept { return t_.actions; }
  std::size_t num_states() const noexcept { return t_.states.size(); }
  StateId initial() const noexcept { return t_.initial; }
  const StateInfo& info(StateId s) const { return t_.states.at(s); }
  bool is_paradise(StateId s) const { return t_.states.at(s).paradise; }
  const Table& table() const noexcept { return t_; }

  ActionSet menu(StateId s, LabelId l) const { return t_.menu[s * t_.labels.size() + l]; }
  StateId next(StateId s, LabelId l, ActionId a) const {
    return t_.next[(static_cast<std::size_t>(s) * t_.labels.size() + l) * t_.actions.size() + a];
  }
  ActionId substitute(StateId s, LabelId l) const { return t_.substitute[s * t_.labels.size() + l]; }

  /// State a learner observes once label l has been read in state s. For
  /// environment-first shields this is s. For system-first shields it is
  /// the successor under the lowest allowed action, which carries the game
  /// state reached by l regardless of the action still to be chosen.
  StateId decision_state(StateId s, LabelId l) const;

  /// True when every menu allows every action.
  bool trivial() const;
  /// True when the shield has at most one state besides paradise, so a
  /// learner can ignore the shield state.
  bool single_state_certified() const;

  /// Copy with one menu entry replaced. Successors for added actions are
  /// left undefined; used to plant defects in tests.
  Shield with_menu(StateId s, LabelId l, ActionSet menu) const;

 private:
  Shield() = default;
  Table t_;
};

/// Builds a shield from a solved game. Throws UnrealizableError when the
/// initial state is not winning; the diagnostic shows the environment's line of play.
Shield extract_preemptive(const game::SafetyGame& game, const game::WinningRegion& region);
Shield extract_postposed(const game::SafetyGame& game, const game::WinningRegion& region,
                         const FallbackPolicy& fallback = {});

/// Menu offered to the learner.
ActionSet preemptive_step(const Shield& shield, StateId s, LabelId l);
/// Successor after the learner picked `chosen`; throws ContractViolation for
/// actions outside the menu.
StateId advance(const Shield& shield, StateId s, LabelId l, ActionId chosen);
/// Executes the first safe action of the ranking, or the fixed substitute.
PostposedResult postposed_step(const Shield& shield, StateId s, LabelId l, const Ranking& ranking);

std::string to_json(const Shield& shield);
Shield from_json(const std::string& text);
void save(const Shield& shield, const std::filesystem::path& path);
Shield load(const std::filesystem::path& path);

}  // namespace shieldkit::shield
