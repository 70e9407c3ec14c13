#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shieldkit/automata.hpp"
#include "shieldkit/shield.hpp"

namespace shieldkit::shield {

struct VerifyOptions {
  enum class Mode { Exhaustive, Randomized };
  Mode mode = Mode::Exhaustive;
  /// Exhaustive mode stops after this many joint states and flags the result partial.
  std::size_t max_states = 2'000'000;
  /// The interference oracle is skipped (and the result flagged partial)
  /// when |spec| * |abstraction| exceeds this.
  std::size_t max_oracle_states = 4'000'000;
  std::size_t walks = 1000;
  std::size_t walk_length = 1000;
  std::uint64_t seed = 1;
};

/// One decision of a counterexample run. In system-first runs the last step
/// only shows the label that reveals the failure and has no action.
struct TraceStep {
  StateId shield_state = kNoState;  // kNoState once the shield left its own state set
  LabelId label = 0;
  ActionId action = 0;
};

struct Counterexample {
  std::vector<TraceStep> trace;
  std::string reason;
};

/// A decision point (shield state, label) together with one action.
struct MenuEntry {
  StateId shield_state = kNoState;
  LabelId label = 0;
  ActionId action = 0;
  StateId spec_state = kNoState;
  StateId abs_state = kNoState;
};

struct VerificationReport {
  bool partial = false;
  bool oracle_checked = false;
  std::size_t joint_states = 0;
  std::size_t decisions_checked = 0;
  /// Reachable runs on which the abstraction stays safe but the specification fails.
  std::vector<Counterexample> violations;
  /// Allowed actions after which the environment can force a violation.
  std::vector<MenuEntry> unsafe_allowances;
  /// Blocked actions the oracle cannot justify.
  std::vector<MenuEntry> over_restrictions;
  /// Allowed actions without a successor shield state.
  std::vector<MenuEntry> missing_successors;

  bool clean() const {
    return violations.empty() && unsafe_allowances.empty() && over_restrictions.empty() &&
           missing_successors.empty();
  }
};

/// Checks a shield against the specification and abstraction it is meant to
/// enforce, without consulting the game or its solver.
///
/// Correctness: explores shield x specification x abstraction and reports
/// every reachable specification failure that happens while the
/// abstraction is still satisfied. Minimal interference: for each reached
/// decision, an action is blocked iff the environment can force a
/// specification failure after it (backward induction on
/// specification x abstraction).
VerificationReport verify_shield(const Shield& shield, const automata::SafetyAutomaton& spec,
                                 const automata::SafetyAutomaton& abs, const VerifyOptions& options = {});

std::string to_json(const VerificationReport& report, const Shield& shield);

}  // namespace shieldkit::shield
