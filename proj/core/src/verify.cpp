#include "shieldkit/verify.hpp"

#include <deque>
#include <unordered_map>

#include <json.hpp>

#include "shieldkit/errors.hpp"
#include "shieldkit/rng.hpp"

namespace shieldkit::shield {

namespace {

constexpr std::size_t kMaxReported = 100;

using automata::SafetyAutomaton;

// Positions of specification x abstraction from which the environment can
// force the specification into its unsafe states while the abstraction
// stays safe. Plain backward induction, one full sweep per round.
class Attractor {
 public:
  Attractor(const SafetyAutomaton& spec, const SafetyAutomaton& abs, bool env_first)
      : spec_(spec), abs_(abs), env_first_(env_first), nm_(abs.num_states()) {
    const std::size_t nq = spec.num_states();
    const std::size_t nl = spec.labels().size();
    const std::size_t na = spec.actions().size();
    in_.assign(nq * nm_, false);
    for (StateId q = 0; q < nq; ++q)
      for (StateId m = 0; m < nm_; ++m) in_[q * nm_ + m] = !spec.is_safe(q) && abs.is_safe(m);
    bool changed = true;
    while (changed) {
      changed = false;
      for (StateId q = 0; q < nq; ++q) {
        if (!spec.is_safe(q)) continue;
        for (StateId m = 0; m < nm_; ++m) {
          if (in_[q * nm_ + m] || !abs.is_safe(m)) continue;
          bool forced;
          if (env_first_) {
            forced = false;
            for (LabelId l = 0; l < nl && !forced; ++l) {
              bool all = true;
              for (ActionId a = 0; a < na && all; ++a) all = lost_after(q, m, l, a);
              forced = all;
            }
          } else {
            forced = true;
            for (ActionId a = 0; a < na && forced; ++a) forced = action_loses(q, m, a);
          }
          if (forced) {
            in_[q * nm_ + m] = true;
            changed = true;
          }
        }
      }
    }
  }

  bool lost_after(StateId q, StateId m, LabelId l, ActionId a) const {
    return in_[spec_.next(q, l, a) * nm_ + abs_.next(m, l, a)];
  }

  // System-first: committing to a lets some label lead into the attractor.
  bool action_loses(StateId q, StateId m, ActionId a) const {
    for (LabelId l = 0; l < spec_.labels().size(); ++l)
      if (lost_after(q, m, l, a)) return true;
    return false;
  }

  // Whether choosing a at decision (q, m, l) hands the environment a win.
  bool blocks_justified(StateId q, StateId m, LabelId l, ActionId a) const {
    return env_first_ ? lost_after(q, m, l, a) : action_loses(q, m, a);
  }

 private:
  const SafetyAutomaton& spec_;
  const SafetyAutomaton& abs_;
  bool env_first_;
  std::size_t nm_;
  std::vector<bool> in_;
};

struct Node {
  StateId shield = kNoState;  // kNoState: the shield has no state for this run any more
  StateId q = 0;
  StateId m = 0;
  ActionId pending = kNoAction;
  std::size_t parent = static_cast<std::size_t>(-1);
  LabelId label = 0;
  ActionId action = 0;

  std::uint64_t key(std::size_t nq, std::size_t nm, std::size_t na) const {
    const std::uint64_t sh = shield == kNoState ? 0 : static_cast<std::uint64_t>(shield) + 1;
    const std::uint64_t p = pending == kNoAction ? 0 : static_cast<std::uint64_t>(pending) + 1;
    return ((sh * nq + q) * nm + m) * (na + 1) + p;
  }
};

class Checker {
 public:
  Checker(const Shield& shield, const SafetyAutomaton& spec, const SafetyAutomaton& abs,
          const VerifyOptions& options, VerificationReport& report)
      : shield_(shield), spec_(spec), abs_(abs), opt_(options), report_(report),
        env_first_(shield.order() == game::TurnOrder::EnvironmentFirst) {
    if (!(shield.labels() == spec.labels()) || !(shield.actions() == spec.actions()) ||
        !(spec.labels() == abs.labels()) || !(spec.actions() == abs.actions())) {
      throw AlphabetMismatch("verify: shield, specification and abstraction alphabets differ");
    }
    if (spec.timing() != abs.timing() || game::turn_order_for(spec.timing()) != shield.order()) {
      throw AlphabetMismatch("verify: letter timing does not match the shield's turn order");
    }
    if (spec.num_states() * abs.num_states() <= opt_.max_oracle_states) {
      oracle_.emplace(spec, abs, env_first_);
      report_.oracle_checked = true;
    } else {
      report_.partial = true;
    }
  }

  void exhaustive() {
    std::unordered_map<std::uint64_t, std::size_t> seen;
    Node root{shield_.initial(), spec_.initial(), abs_.initial(), kNoAction};
    nodes_.push_back(root);
    seen.emplace(root.key(spec_.num_states(), abs_.num_states(), na()), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      for (LabelId l = 0; l < nl(); ++l) {
        for_each_successor(i, l, [&](Node child) {
          const auto k = child.key(spec_.num_states(), abs_.num_states(), na());
          if (seen.count(k)) return;
          if (nodes_.size() >= opt_.max_states) {
            report_.partial = true;
            return;
          }
          seen.emplace(k, nodes_.size());
          nodes_.push_back(child);
        });
      }
    }
    report_.joint_states = nodes_.size();
  }

  void randomized() {
    std::unordered_map<std::uint64_t, bool> checked;
    for (std::size_t w = 0; w < opt_.walks; ++w) {
      Rng rng(Rng::derive(opt_.seed, w));
      nodes_.clear();
      nodes_.push_back({shield_.initial(), spec_.initial(), abs_.initial(), kNoAction});
      for (std::size_t step = 0; step < opt_.walk_length; ++step) {
        const std::size_t cur = nodes_.size() - 1;
        std::vector<Node> options;
        std::vector<LabelId> conforming;
        for (LabelId l = 0; l < nl(); ++l) {
          std::size_t before = options.size();
          for_each_successor(cur, l, [&](Node child) { options.push_back(child); }, &checked);
          if (options.size() > before) conforming.push_back(l);
        }
        if (options.empty()) break;
        // Environment picks a label, then the system picks among its successors.
        const LabelId l = conforming[rng.below(conforming.size())];
        std::vector<Node> with_label;
        for (const Node& n : options)
          if (n.label == l) with_label.push_back(n);
        nodes_.push_back(with_label[rng.below(with_label.size())]);
        ++report_.joint_states;
      }
    }
  }

 private:
  std::size_t nl() const { return spec_.labels().size(); }
  std::size_t na() const { return spec_.actions().size(); }

  std::vector<TraceStep> trace_to(std::size_t i, LabelId l, ActionId a) const {
    std::vector<TraceStep> out;
    for (std::size_t k = i; k != 0 && k != static_cast<std::size_t>(-1); k = nodes_[k].parent) {
      const Node& child = nodes_[k];
      out.push_back({nodes_[child.parent].shield, child.label, child.action});
    }
    std::reverse(out.begin(), out.end());
    out.push_back({nodes_[i].shield, l, a});
    return out;
  }

  void record_violation(std::size_t i, LabelId l, ActionId a, std::string reason) {
    if (report_.violations.size() < kMaxReported) {
      report_.violations.push_back({trace_to(i, l, a), std::move(reason)});
    }
  }

  template <typename Fn>
  void for_each_successor(std::size_t i, LabelId l, Fn&& emit,
                          std::unordered_map<std::uint64_t, bool>* checked = nullptr) {
    const Node cur = nodes_[i];
    StateId q = cur.q;
    StateId m = cur.m;
    if (!env_first_ && cur.pending != kNoAction) {
      m = abs_.next(cur.m, l, cur.pending);
      if (!abs_.is_safe(m)) return;
      q = spec_.next(cur.q, l, cur.pending);
      if (!spec_.is_safe(q)) {
        // The previous action is what failed; report the run up to it.
        record_violation(i, l, kNoAction, "specification fails on the outcome of the last action");
        return;
      }
    }
    const ActionSet menu = cur.shield == kNoState ? full_set(na()) : shield_.menu(cur.shield, l);
    if (cur.shield != kNoState && oracle_) {
      const std::uint64_t decision = (static_cast<std::uint64_t>(cur.shield) * nl() + l) *
                                         (spec_.num_states() * abs_.num_states()) +
                                     static_cast<std::uint64_t>(q) * abs_.num_states() + m;
      if (!checked || checked->emplace(decision, true).second) {
        ++report_.decisions_checked;
        for (ActionId a = 0; a < na(); ++a) {
          const bool bad = oracle_->blocks_justified(q, m, l, a);
          const MenuEntry entry{cur.shield, l, a, q, m};
          if (contains(menu, a) && bad) {
            if (report_.unsafe_allowances.size() < kMaxReported) report_.unsafe_allowances.push_back(entry);
          } else if (!contains(menu, a) && !bad) {
            if (report_.over_restrictions.size() < kMaxReported) report_.over_restrictions.push_back(entry);
          }
        }
      }
    }
    for (ActionId a : to_list(menu)) {
      Node child;
      child.parent = i;
      child.label = l;
      child.action = a;
      if (env_first_) {
        child.m = abs_.next(m, l, a);
        if (!abs_.is_safe(child.m)) continue;
        child.q = spec_.next(q, l, a);
        if (!spec_.is_safe(child.q)) {
          record_violation(i, l, a, "specification fails on an allowed action");
          continue;
        }
      } else {
        child.q = q;
        child.m = m;
        child.pending = a;
      }
      if (cur.shield == kNoState) {
        child.shield = kNoState;
      } else {
        child.shield = shield_.next(cur.shield, l, a);
        if (child.shield == kNoState && report_.missing_successors.size() < kMaxReported) {
          report_.missing_successors.push_back({cur.shield, l, a, q, m});
        }
      }
      emit(child);
    }
  }

  const Shield& shield_;
  const SafetyAutomaton& spec_;
  const SafetyAutomaton& abs_;
  const VerifyOptions& opt_;
  VerificationReport& report_;
  bool env_first_;
  std::optional<Attractor> oracle_;
  std::vector<Node> nodes_;
};

}  // namespace

VerificationReport verify_shield(const Shield& shield, const automata::SafetyAutomaton& spec,
                                 const automata::SafetyAutomaton& abs, const VerifyOptions& options) {
  VerificationReport report;
  Checker checker(shield, spec, abs, options, report);
  if (options.mode == VerifyOptions::Mode::Exhaustive) {
    checker.exhaustive();
  } else {
    checker.randomized();
  }
  return report;
}

std::string to_json(const VerificationReport& r, const Shield& shield) {
  using nlohmann::json;
  auto entry = [&](const MenuEntry& e) {
    return json{{"shield_state", shield.info(e.shield_state).name},
                {"label", shield.labels().name(e.label)},
                {"action", shield.actions().name(e.action)}};
  };
  json j;
  j["clean"] = r.clean();
  j["partial"] = r.partial;
  j["oracle_checked"] = r.oracle_checked;
  j["joint_states"] = r.joint_states;
  j["decisions_checked"] = r.decisions_checked;
  json v = json::array();
  for (const auto& c : r.violations) {
    json trace = json::array();
    for (const auto& s : c.trace) {
      trace.push_back({s.shield_state == kNoState ? json(nullptr) : json(shield.info(s.shield_state).name),
                       shield.labels().name(s.label),
                       s.action == kNoAction ? json(nullptr) : json(shield.actions().name(s.action))});
    }
    v.push_back({{"reason", c.reason}, {"trace", std::move(trace)}});
  }
  j["violations"] = std::move(v);
  for (const auto& [key, list] : {std::pair{"unsafe_allowances", &r.unsafe_allowances},
                                  std::pair{"over_restrictions", &r.over_restrictions},
                                  std::pair{"missing_successors", &r.missing_successors}}) {
    json arr = json::array();
    for (const auto& e : *list) arr.push_back(entry(e));
    j[key] = std::move(arr);
  }
  return j.dump(2);
}

}  // namespace shieldkit::shield
