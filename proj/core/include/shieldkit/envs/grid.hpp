#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shieldkit/envs/environment.hpp"

namespace shieldkit::envs {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Grid map. Text format, one row per line:
///   '#' wall, '.' free, 'B' bomb, '1'..'9' ordered target regions,
///   'R' robot start, 'O' first cell of the opponent's cycle.
/// The opponent's cycle comes from a side file with one "x y" pair per
/// line (blank lines and '#' comments ignored), each cell adjacent to the
/// next and the last adjacent to the first.
struct GridMap {
  int width = 0;
  int height = 0;
  std::vector<char> wall;  // row-major
  std::vector<char> bomb;
  std::vector<int> target;  // 0 none, k for region k
  int num_targets = 0;
  Cell start;
  std::vector<Cell> cycle;  // empty: no opponent

  int index(Cell c) const { return c.y * width + c.x; }
  Cell cell(int i) const { return {i % width, i / width}; }
  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool free(Cell c) const { return inside(c) && !wall[index(c)]; }
  bool has_bombs() const;
  bool has_opponent() const { return !cycle.empty(); }
  std::size_t phases() const { return cycle.empty() ? 1 : cycle.size(); }
};

GridMap parse_map(const std::string& text, const std::string& cycle_text = {});
/// Reads `path`; when the map places an opponent the cycle is read from
/// `cycle_path`, or from `path` with extension ".cycle" if not given.
GridMap load_map(const std::filesystem::path& path, const std::optional<std::filesystem::path>& cycle_path = {});

/// Bundled maps, identical to data/maps/*.map.
GridMap default_map_9x9();
GridMap default_map_15x9();

class GridWorld final : public Environment {
 public:
  struct Config {
    std::size_t horizon = 200;
    double target_bonus = 1.0;
    double completion_bonus = 10.0;
    double violation_penalty = -10.0;
    double step_cost = 0.0;
    unsigned bomb_limit = 2;  // consecutive steps allowed on bombs
  };

  struct State {
    Cell robot;
    std::size_t phase = 0;
    unsigned on_bomb = 0;  // consecutive observations on a bomb, current one included
    int progress = 0;      // targets reached so far
  };

  explicit GridWorld(GridMap map, std::string name = "grid");
  GridWorld(GridMap map, Config config, std::string name = "grid");

  std::string name() const override { return name_; }
  const Alphabet& labels() const override { return labels_; }
  const Alphabet& actions() const override { return actions_; }
  std::size_t num_states() const override;
  EnvState initial_state() const override;
  LabelId label(EnvState s) const override;
  Transition step(EnvState s, ActionId a, Rng& rng) const override;
  std::vector<Outcome> outcomes(EnvState s, ActionId a) const override;
  std::size_t horizon() const override { return config_.horizon; }
  std::string describe(EnvState s) const override;

  automata::SafetyAutomaton specification() const override;
  automata::SafetyAutomaton abstraction() const override;

  EnvState encode(const State& s) const;
  State decode(EnvState s) const;
  const GridMap& map() const noexcept { return map_; }
  const Config& config() const noexcept { return config_; }

  /// Blocked-direction mask for the robot at `c` while the opponent is at phase `phase`.
  std::uint8_t blocked(Cell c, std::size_t phase) const;
  LabelId label_at(Cell c, std::size_t phase) const;
  /// Reachable (cell, phase) pairs of the abstraction, fail state excluded.
  std::size_t abstraction_size() const;

 private:
  Transition move(const State& s, ActionId a) const;

  GridMap map_;
  Config config_;
  std::string name_;
  Alphabet labels_;
  Alphabet actions_;
};

/// Labels are blocked-direction masks ("N-S-" style), with a "+bomb" twin
/// for each when `with_bomb` is set.
Alphabet grid_labels(bool with_bomb);
Alphabet grid_actions();

}  // namespace shieldkit::envs
