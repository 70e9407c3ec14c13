#include "shieldkit/envs/grid.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "shieldkit/errors.hpp"

namespace shieldkit::envs {

using automata::Direction;
using automata::SafetyAutomaton;

namespace {

constexpr std::array<Cell, 4> kStep = {Cell{0, -1}, Cell{1, 0}, Cell{0, 1}, Cell{-1, 0}};

Cell shifted(Cell c, ActionId a) { return {c.x + kStep[a].x, c.y + kStep[a].y}; }

bool adjacent(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

constexpr const char* kMap9x9 =
    "#########\n"
    "#R.B#..1#\n"
    "#..B#.BB#\n"
    "#.......#\n"
    "#BB.##..#\n"
    "#...#...#\n"
    "#.2.#BB.#\n"
    "#......3#\n"
    "#########\n";

constexpr const char* kMap15x9 =
    "###############\n"
    "#R............#\n"
    "#......1......#\n"
    "#...O.........#\n"
    "#....#####....#\n"
    "#.............#\n"
    "#......2......#\n"
    "#.............#\n"
    "###############\n";

constexpr const char* kCycle15x9 =
    "# opponent circles the central wall clockwise, one cell per step\n"
    "4 3\n5 3\n6 3\n7 3\n8 3\n9 3\n10 3\n"
    "10 4\n"
    "10 5\n9 5\n8 5\n7 5\n6 5\n5 5\n4 5\n"
    "4 4\n";

}  // namespace

bool GridMap::has_bombs() const { return std::find(bomb.begin(), bomb.end(), 1) != bomb.end(); }

GridMap parse_map(const std::string& text, const std::string& cycle_text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw SchemaError("map: empty");
  GridMap m;
  m.height = static_cast<int>(rows.size());
  m.width = static_cast<int>(rows[0].size());
  m.wall.assign(static_cast<std::size_t>(m.width * m.height), 0);
  m.bomb.assign(m.wall.size(), 0);
  m.target.assign(m.wall.size(), 0);
  std::optional<Cell> start;
  std::optional<Cell> anchor;
  for (int y = 0; y < m.height; ++y) {
    if (static_cast<int>(rows[y].size()) != m.width) {
      throw SchemaError("map: row " + std::to_string(y) + " has a different width");
    }
    for (int x = 0; x < m.width; ++x) {
      const char ch = rows[y][x];
      const int i = m.index({x, y});
      switch (ch) {
        case '#': m.wall[i] = 1; break;
        case '.': break;
        case 'B': m.bomb[i] = 1; break;
        case 'R':
          if (start) throw SchemaError("map: more than one robot start");
          start = Cell{x, y};
          break;
        case 'O':
          if (anchor) throw SchemaError("map: more than one opponent anchor");
          anchor = Cell{x, y};
          break;
        default:
          if (ch >= '1' && ch <= '9') {
            m.target[i] = ch - '0';
            m.num_targets = std::max(m.num_targets, ch - '0');
          } else {
            throw SchemaError(std::string("map: unknown cell character '") + ch + "'");
          }
      }
    }
  }
  if (!start) throw SchemaError("map: no robot start 'R'");
  m.start = *start;
  for (int k = 1; k <= m.num_targets; ++k) {
    if (std::find(m.target.begin(), m.target.end(), k) == m.target.end()) {
      throw SchemaError("map: target regions must be numbered 1..n without gaps");
    }
  }
  if (anchor) {
    std::istringstream cin(cycle_text);
    while (std::getline(cin, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      Cell c;
      if (!(fields >> c.x)) continue;
      if (!(fields >> c.y)) throw SchemaError("map: cycle line needs 'x y'");
      if (!m.free(c)) throw SchemaError("map: opponent cycle leaves the free cells");
      m.cycle.push_back(c);
    }
    if (m.cycle.size() < 2) throw SchemaError("map: opponent cycle needs at least two cells");
    if (!(m.cycle.front() == *anchor)) throw SchemaError("map: opponent cycle must start at 'O'");
    for (std::size_t i = 0; i < m.cycle.size(); ++i) {
      if (!adjacent(m.cycle[i], m.cycle[(i + 1) % m.cycle.size()])) {
        throw SchemaError("map: opponent cycle moves more than one cell at step " + std::to_string(i));
      }
    }
    if (m.cycle.front() == m.start || m.cycle[1] == m.start) {
      throw SchemaError("map: robot starts on the opponent's path");
    }
  } else if (!cycle_text.empty()) {
    throw SchemaError("map: cycle given but no opponent anchor 'O'");
  }
  return m;
}

GridMap load_map(const std::filesystem::path& path, const std::optional<std::filesystem::path>& cycle_path) {
  const std::string text = read_file(path);
  if (text.find('O') == std::string::npos) return parse_map(text);
  std::filesystem::path cp = cycle_path ? *cycle_path : std::filesystem::path(path).replace_extension(".cycle");
  return parse_map(text, read_file(cp));
}

GridMap default_map_9x9() { return parse_map(kMap9x9); }
GridMap default_map_15x9() { return parse_map(kMap15x9, kCycle15x9); }

Alphabet grid_labels(bool with_bomb) {
  std::vector<std::string> names;
  const char letters[4] = {'N', 'E', 'S', 'W'};
  for (int b = 0; b < (with_bomb ? 2 : 1); ++b) {
    for (int mask = 0; mask < 16; ++mask) {
      std::string n;
      for (int d = 0; d < 4; ++d) n += (mask >> d) & 1 ? letters[d] : '-';
      if (b) n += "+bomb";
      names.push_back(n);
    }
  }
  return Alphabet(std::move(names));
}

Alphabet grid_actions() { return Alphabet({"north", "east", "south", "west"}); }

GridWorld::GridWorld(GridMap map, std::string name) : GridWorld(std::move(map), Config{}, std::move(name)) {}

GridWorld::GridWorld(GridMap map, Config config, std::string name)
    : map_(std::move(map)), config_(config), name_(std::move(name)),
      labels_(grid_labels(map_.has_bombs())), actions_(grid_actions()) {
  if (config_.bomb_limit == 0) throw ConstructionError("grid: bomb limit must be positive");
  if (!(config_.violation_penalty < 0)) throw ConstructionError("grid: violation penalty must be negative");
  if (map_.bomb[map_.index(map_.start)]) throw ConstructionError("grid: robot must not start on a bomb");
}

std::size_t GridWorld::num_states() const {
  return static_cast<std::size_t>(map_.width * map_.height) * map_.phases() * (config_.bomb_limit + 1) *
         static_cast<std::size_t>(map_.num_targets + 1);
}

EnvState GridWorld::encode(const State& s) const {
  std::size_t i = static_cast<std::size_t>(map_.index(s.robot));
  i = i * map_.phases() + s.phase;
  i = i * (config_.bomb_limit + 1) + s.on_bomb;
  i = i * static_cast<std::size_t>(map_.num_targets + 1) + static_cast<std::size_t>(s.progress);
  return static_cast<EnvState>(i);
}

GridWorld::State GridWorld::decode(EnvState e) const {
  std::size_t i = e;
  State s;
  s.progress = static_cast<int>(i % static_cast<std::size_t>(map_.num_targets + 1));
  i /= static_cast<std::size_t>(map_.num_targets + 1);
  s.on_bomb = static_cast<unsigned>(i % (config_.bomb_limit + 1));
  i /= config_.bomb_limit + 1;
  s.phase = i % map_.phases();
  s.robot = map_.cell(static_cast<int>(i / map_.phases()));
  return s;
}

EnvState GridWorld::initial_state() const { return encode({map_.start, 0, 0, 0}); }

std::uint8_t GridWorld::blocked(Cell c, std::size_t phase) const {
  std::uint8_t mask = 0;
  for (ActionId a = 0; a < 4; ++a) {
    const Cell to = shifted(c, a);
    bool hit = !map_.free(to);
    if (!hit && map_.has_opponent()) {
      const Cell now = map_.cycle[phase];
      const Cell then = map_.cycle[(phase + 1) % map_.cycle.size()];
      hit = to == then || (to == now && then == c);
    }
    if (hit) mask |= static_cast<std::uint8_t>(1u << a);
  }
  return mask;
}

LabelId GridWorld::label_at(Cell c, std::size_t phase) const {
  LabelId l = blocked(c, phase);
  if (map_.has_bombs() && map_.bomb[map_.index(c)]) l += 16;
  return l;
}

LabelId GridWorld::label(EnvState e) const {
  const State s = decode(e);
  return label_at(s.robot, s.phase);
}

Transition GridWorld::move(const State& s, ActionId a) const {
  State to = s;
  to.phase = (s.phase + 1) % map_.phases();
  Transition t;
  t.reward = config_.step_cost;
  if (blocked(s.robot, s.phase) & (1u << a)) {
    t.violation = true;
  } else {
    to.robot = shifted(s.robot, a);
    to.on_bomb = map_.bomb[map_.index(to.robot)] ? s.on_bomb + 1 : 0;
    if (to.on_bomb > config_.bomb_limit) {
      t.violation = true;
      to.on_bomb = config_.bomb_limit;
    }
  }
  if (t.violation) {
    t.reward = config_.violation_penalty;
    t.terminal = true;
  } else if (map_.target[map_.index(to.robot)] == s.progress + 1) {
    ++to.progress;
    t.reward += config_.target_bonus;
    if (to.progress == map_.num_targets) {
      t.reward += config_.completion_bonus;
      t.terminal = true;
    }
  }
  t.next = encode(to);
  return t;
}

Transition GridWorld::step(EnvState e, ActionId a, Rng&) const { return move(decode(e), a); }

std::vector<Outcome> GridWorld::outcomes(EnvState e, ActionId a) const { return {{1.0, move(decode(e), a)}}; }

std::string GridWorld::describe(EnvState e) const {
  const State s = decode(e);
  std::string out = "robot=(" + std::to_string(s.robot.x) + "," + std::to_string(s.robot.y) + ")";
  if (map_.has_opponent()) {
    const Cell o = map_.cycle[s.phase];
    out += " opponent=(" + std::to_string(o.x) + "," + std::to_string(o.y) + ")";
  }
  if (map_.has_bombs()) out += " on_bomb=" + std::to_string(s.on_bomb);
  return out + " progress=" + std::to_string(s.progress);
}

SafetyAutomaton GridWorld::specification() const {
  std::vector<std::uint8_t> masks(labels_.size());
  for (LabelId l = 0; l < labels_.size(); ++l) masks[l] = static_cast<std::uint8_t>(l & 15u);
  const std::array<std::optional<Direction>, 4> moves = {Direction::North, Direction::East, Direction::South,
                                                         Direction::West};
  auto spec = automata::build_collision(labels_, masks, actions_, moves);
  if (map_.has_bombs()) {
    std::vector<LabelId> on_bomb;
    for (LabelId l = 16; l < 32; ++l) on_bomb.push_back(l);
    spec = automata::conjoin(spec, automata::build_bounded_stay(labels_, actions_, on_bomb, config_.bomb_limit));
  }
  return spec;
}

SafetyAutomaton GridWorld::abstraction() const {
  const std::size_t phases = map_.phases();
  const std::size_t cells = static_cast<std::size_t>(map_.width * map_.height);
  const std::size_t n = cells * phases + 1;
  const StateId fail = static_cast<StateId>(n - 1);
  const std::size_t nl = labels_.size();
  automata::AutomatonTable t;
  t.labels = labels_;
  t.actions = actions_;
  t.num_states = n;
  t.role = automata::Role::Abstraction;
  t.timing = automata::LetterTiming::SameStep;
  t.initial = static_cast<StateId>(static_cast<std::size_t>(map_.index(map_.start)) * phases);
  t.safe.assign(n, false);
  t.delta.assign(n * nl * 4, fail);
  t.state_names.assign(n, "fail");
  for (std::size_t ci = 0; ci < cells; ++ci) {
    const Cell c = map_.cell(static_cast<int>(ci));
    if (!map_.free(c)) continue;
    for (std::size_t p = 0; p < phases; ++p) {
      const auto s = static_cast<StateId>(ci * phases + p);
      t.safe[s] = true;
      t.state_names[s] = "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
      if (map_.has_opponent()) t.state_names[s] += "@" + std::to_string(p);
      const LabelId expected = label_at(c, p);
      const std::uint8_t mask = blocked(c, p);
      const std::size_t np = (p + 1) % phases;
      for (ActionId a = 0; a < 4; ++a) {
        const Cell to = (mask & (1u << a)) ? c : shifted(c, a);
        t.delta[(s * nl + expected) * 4 + a] = static_cast<StateId>(static_cast<std::size_t>(map_.index(to)) * phases + np);
      }
    }
  }
  return automata::prune_unreachable(SafetyAutomaton::from_table(std::move(t)));
}

std::size_t GridWorld::abstraction_size() const { return abstraction().num_safe_states(); }

}  // namespace shieldkit::envs
