#pragma once

#include <filesystem>
#include <string>

#include "shieldkit/automata.hpp"

namespace shieldkit::automata {

// JSON schema:
//   { "role": "specification" | "abstraction",
//     "timing": "same_step" | "action_then_outcome",   (optional, default same_step)
//     "labels": [names], "actions": [names],
//     "states": N, "initial": i, "safe": [indices],
//     "transitions": [[from, label, action, to], ...] }
// Every (state, label, action) triple must appear exactly once.

std::string to_json(const SafetyAutomaton& m);
SafetyAutomaton from_json(const std::string& text);

void save(const SafetyAutomaton& m, const std::filesystem::path& path);
SafetyAutomaton load(const std::filesystem::path& path);

}  // namespace shieldkit::automata
