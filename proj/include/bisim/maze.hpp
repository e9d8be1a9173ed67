#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "bisim/errors.hpp"
#include "bisim/mdp.hpp"

namespace bisim {

/// Point-mass position in a 2-D maze.
struct MazeState {
    double x = 0.0;
    double y = 0.0;
};

/// Grid-walled continuous maze. The wall grid doubles as the coverage binning:
/// one bin per free cell of edge `cell_size`. Bounds are
/// [0, cols*cell_size] x [0, rows*cell_size]; the border rows/columns are
/// always walls. Action components are clipped to +-a_max with
/// a_max = 0.1 * width.
struct MazeSpec {
    std::string name;
    int rows = 0;
    int cols = 0;
    double cell_size = 0.05;
    int max_episode_steps = 50;
    std::vector<std::uint8_t> wall; // row-major rows x cols, 1 = wall
    int start_row = 0;
    int start_col = 0;

    double width() const { return cols * cell_size; }
    double height() const { return rows * cell_size; }
    double a_max() const { return 0.1 * width(); }

    bool wall_at(int row, int col) const {
        if (row < 0 || row >= rows || col < 0 || col >= cols) return true;
        return wall[static_cast<std::size_t>(row) * cols + col] != 0;
    }

    int cell_row(double y) const { return static_cast<int>(std::floor(y / cell_size)); }
    int cell_col(double x) const { return static_cast<int>(std::floor(x / cell_size)); }

    bool blocked(double x, double y) const {
        if (!(x >= 0.0 && x < width() && y >= 0.0 && y < height())) return true;
        return wall_at(cell_row(y), cell_col(x));
    }

    int cell_index(double x, double y) const { return cell_row(y) * cols + cell_col(x); }

    int free_cell_count() const {
        int n = 0;
        for (std::uint8_t w : wall) n += (w == 0);
        return n;
    }

    MazeState start_state() const {
        return {(start_col + 0.5) * cell_size, (start_row + 0.5) * cell_size};
    }

    std::vector<double> cell_center(int row, int col) const {
        return {(col + 0.5) * cell_size, (row + 0.5) * cell_size};
    }
};

/// Parses the plain-text grid format: '#' wall, '.' free, 'S' start (exactly
/// one), one row per line. Throws parse_error with line/column context.
inline MazeSpec parse_layout(const std::string& text, const std::string& name,
                             double cell_size = 0.05, int max_episode_steps = 50) {
    MazeSpec spec;
    spec.name = name;
    spec.cell_size = cell_size;
    spec.max_episode_steps = max_episode_steps;
    std::istringstream is(text);
    std::string line;
    int start_count = 0;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (spec.cols == 0) spec.cols = static_cast<int>(line.size());
        if (static_cast<int>(line.size()) != spec.cols)
            throw parse_error("layout '" + name + "': line " + std::to_string(line_no) +
                              " has length " + std::to_string(line.size()) + ", expected " +
                              std::to_string(spec.cols));
        for (int c = 0; c < spec.cols; ++c) {
            const char ch = line[c];
            if (ch == '#') {
                spec.wall.push_back(1);
            } else if (ch == '.' || ch == 'S') {
                spec.wall.push_back(0);
                if (ch == 'S') {
                    ++start_count;
                    spec.start_row = spec.rows;
                    spec.start_col = c;
                }
            } else {
                throw parse_error("layout '" + name + "': invalid character '" +
                                  std::string(1, ch) + "' at line " + std::to_string(line_no) +
                                  ", column " + std::to_string(c + 1));
            }
        }
        ++spec.rows;
    }
    if (spec.rows < 3 || spec.cols < 3)
        throw parse_error("layout '" + name + "': grid must be at least 3x3");
    if (start_count != 1)
        throw parse_error("layout '" + name + "': expected exactly one 'S', found " +
                          std::to_string(start_count));
    for (int c = 0; c < spec.cols; ++c)
        if (!spec.wall_at(0, c) || !spec.wall_at(spec.rows - 1, c))
            throw parse_error("layout '" + name + "': top/bottom border must be walls");
    for (int r = 0; r < spec.rows; ++r)
        if (!spec.wall_at(r, 0) || !spec.wall_at(r, spec.cols - 1))
            throw parse_error("layout '" + name + "': left/right border must be walls");
    return spec;
}

inline std::string render_layout(const MazeSpec& spec) {
    std::string out;
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            if (r == spec.start_row && c == spec.start_col)
                out += 'S';
            else
                out += spec.wall_at(r, c) ? '#' : '.';
        }
        out += '\n';
    }
    return out;
}

/// Axis-separated collision resolution: each axis moves independently (x
/// first) and a component whose swept segment crosses any wall cell is zeroed.
/// The sweep substep is half a cell, so thin walls cannot be tunneled through.
inline MazeState maze_step(const MazeSpec& spec, const MazeState& state, double ax, double ay) {
    if (spec.blocked(state.x, state.y))
        throw std::invalid_argument("maze_step: state outside bounds or inside a wall");
    const double amax = spec.a_max();
    ax = std::clamp(ax, -amax, amax);
    ay = std::clamp(ay, -amax, amax);
    MazeState next = state;
    const double sub = spec.cell_size * 0.5;
    {
        const int n_sub = std::max(1, static_cast<int>(std::ceil(std::abs(ax) / sub)));
        bool clear = true;
        for (int k = 1; k <= n_sub; ++k) {
            const double xt = state.x + ax * static_cast<double>(k) / n_sub;
            if (spec.blocked(xt, next.y)) {
                clear = false;
                break;
            }
        }
        if (clear) next.x = state.x + ax;
    }
    {
        const int n_sub = std::max(1, static_cast<int>(std::ceil(std::abs(ay) / sub)));
        bool clear = true;
        for (int k = 1; k <= n_sub; ++k) {
            const double yt = state.y + ay * static_cast<double>(k) / n_sub;
            if (spec.blocked(next.x, yt)) {
                clear = false;
                break;
            }
        }
        if (clear) next.y = state.y + ay;
    }
    return next;
}

/// Episode wrapper: reward-free, done after max_episode_steps.
class MazeEnv {
public:
    explicit MazeEnv(const MazeSpec& spec) : spec_(spec) {}

    MazeState reset() {
        state_ = spec_.start_state();
        t_ = 0;
        return state_;
    }

    struct StepResult {
        MazeState state;
        double reward = 0.0;
        bool done = false;
    };

    StepResult step(double ax, double ay) {
        state_ = maze_step(spec_, state_, ax, ay);
        ++t_;
        return {state_, 0.0, t_ >= spec_.max_episode_steps};
    }

    const MazeState& state() const { return state_; }
    const MazeSpec& spec() const { return spec_; }

private:
    const MazeSpec& spec_;
    MazeState state_{};
    int t_ = 0;
};

/// Visited-bin tracker over the free cells of a maze.
class CoverageTracker {
public:
    explicit CoverageTracker(const MazeSpec& spec)
        : rows_(spec.rows), cols_(spec.cols), cell_size_(spec.cell_size),
          visited_(static_cast<std::size_t>(spec.rows) * spec.cols, 0),
          total_free_(spec.free_cell_count()) {}

    void update(const MazeState& state) {
        const int r = static_cast<int>(std::floor(state.y / cell_size_));
        const int c = static_cast<int>(std::floor(state.x / cell_size_));
        if (r < 0 || r >= rows_ || c < 0 || c >= cols_) return;
        std::uint8_t& v = visited_[static_cast<std::size_t>(r) * cols_ + c];
        if (!v) {
            v = 1;
            ++visited_count_;
        }
    }

    int visited_count() const { return visited_count_; }
    int total_free() const { return total_free_; }
    double ratio() const {
        return total_free_ > 0 ? static_cast<double>(visited_count_) / total_free_ : 0.0;
    }
    bool visited(int row, int col) const {
        return visited_[static_cast<std::size_t>(row) * cols_ + col] != 0;
    }

    /// Grid snapshot: '#' wall, '*' visited bin, '.' unvisited free bin.
    std::string render(const MazeSpec& spec) const {
        std::string out;
        for (int r = 0; r < rows_; ++r) {
            for (int c = 0; c < cols_; ++c) {
                if (spec.wall_at(r, c))
                    out += '#';
                else
                    out += visited(r, c) ? '*' : '.';
            }
            out += '\n';
        }
        return out;
    }

private:
    int rows_;
    int cols_;
    double cell_size_;
    std::vector<std::uint8_t> visited_;
    int total_free_ = 0;
    int visited_count_ = 0;
};

/// Free-cell flood fill from (row, col); returns the reached free-cell count.
/// Used to check chamber connectivity.
inline int flood_fill_count(const MazeSpec& spec, int row, int col,
                            int extra_wall_row = -1, int extra_wall_col = -1) {
    auto is_wall = [&](int r, int c) {
        if (r == extra_wall_row && c == extra_wall_col) return true;
        return spec.wall_at(r, c);
    };
    if (is_wall(row, col)) return 0;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(spec.rows) * spec.cols, 0);
    std::vector<std::pair<int, int>> stack{{row, col}};
    seen[static_cast<std::size_t>(row) * spec.cols + col] = 1;
    int count = 0;
    while (!stack.empty()) {
        const auto [r, c] = stack.back();
        stack.pop_back();
        ++count;
        const int dr[4] = {-1, 1, 0, 0};
        const int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int nr = r + dr[k], nc = c + dc[k];
            if (nr < 0 || nr >= spec.rows || nc < 0 || nc >= spec.cols) continue;
            std::uint8_t& s = seen[static_cast<std::size_t>(nr) * spec.cols + nc];
            if (!s && !is_wall(nr, nc)) {
                s = 1;
                stack.emplace_back(nr, nc);
            }
        }
    }
    return count;
}

namespace layouts {

inline const char* square_a() {
    return "################\n"
           "#S.............#\n"
           "#..............#\n"
           "#..............#\n"
           "#..............#\n"
           "#...########...#\n"
           "#..............#\n"
           "#..............#\n"
           "#..........#...#\n"
           "#..........#...#\n"
           "#..........#...#\n"
           "#..######..#...#\n"
           "#..........#...#\n"
           "#..............#\n"
           "#..............#\n"
           "################\n";
}

inline const char* corridor2() {
    return "################\n"
           "#S.........#####\n"
           "#..........#####\n"
           "#########..#####\n"
           "#########..#####\n"
           "#########..#####\n"
           "#########..#####\n"
           "#########......#\n"
           "#########......#\n"
           "################\n";
}

/// Branching tree of chambers: a root room at the bottom, a mid chamber with
/// a side pod, and a top canopy chamber, joined by single-cell corner doors.
inline const char* square_tree() {
    return "#########################\n"
           "#########################\n"
           "#######.................#\n"
           "#######.................#\n"
           "#######.................#\n"
           "#######.................#\n"
           "#######.................#\n"
           "########.################\n"
           "#.....#.................#\n"
           "#.....#.................#\n"
           "#.......................#\n"
           "#.....#.................#\n"
           "#.....#.................#\n"
           "#.....#.................#\n"
           "################.########\n"
           "#######...........#######\n"
           "#######...........#######\n"
           "#######...........#######\n"
           "#######...........#######\n"
           "#######.....S.....#######\n"
           "#########################\n";
}

inline const char* square_bottleneck() {
    return "#######################\n"
           "#..........#..........#\n"
           "#.....................#\n"
           "#..........#..........#\n"
           "#..........#..........#\n"
           "#..........#..........#\n"
           "#..........#..........#\n"
           "#..........#..........#\n"
           "#..........#..........#\n"
           "#..........#..........#\n"
           "#..........#..........#\n"
           "#S.........#..........#\n"
           "#######################\n";
}

/// Row/column of the single passage cell of square_bottleneck; walling it
/// disconnects the two chambers.
inline std::pair<int, int> bottleneck_gap() { return {2, 11}; }

} // namespace layouts

/// Built-in maze layouts: an open square with internal walls, a corridor with
/// two turns, a branching tree and a two-chamber bottleneck.
inline std::vector<MazeSpec> builtin_layouts() {
    std::vector<MazeSpec> out;
    out.push_back(parse_layout(layouts::square_a(), "square_a", 0.05));
    out.push_back(parse_layout(layouts::corridor2(), "corridor2", 0.05));
    out.push_back(parse_layout(layouts::square_tree(), "square_tree", 0.1));
    out.push_back(parse_layout(layouts::square_bottleneck(), "square_bottleneck", 0.1));
    return out;
}

inline MazeSpec layout_by_name(const std::string& name) {
    for (MazeSpec& spec : builtin_layouts())
        if (spec.name == name) return spec;
    throw std::invalid_argument("unknown layout '" + name + "'");
}

/// n-state chain with left/right actions: moving off the left end stays put,
/// the right end is absorbing and is the only rewarding state. goal_reward = 0
/// yields a fully reward-free instance.
inline TabularMdp sparse_chain_mdp(int n, double goal_reward, double gamma = 0.99) {
    if (n < 2) throw std::invalid_argument("sparse_chain_mdp: n must be >= 2");
    const int m = 2; // 0 = left, 1 = right
    std::vector<double> tr(static_cast<std::size_t>(n) * m * n, 0.0);
    std::vector<double> rew(static_cast<std::size_t>(n) * m, 0.0);
    for (int s = 0; s < n; ++s) {
        const int left = std::max(0, s - 1);
        const int right = std::min(n - 1, s + 1);
        const int to_left = (s == n - 1) ? s : left;   // terminal state absorbs
        const int to_right = (s == n - 1) ? s : right;
        tr[(static_cast<std::size_t>(s) * m + 0) * n + to_left] = 1.0;
        tr[(static_cast<std::size_t>(s) * m + 1) * n + to_right] = 1.0;
        if (s == n - 1) {
            rew[static_cast<std::size_t>(s) * m + 0] = goal_reward;
            rew[static_cast<std::size_t>(s) * m + 1] = goal_reward;
        }
    }
    return TabularMdp(n, m, std::move(tr), std::move(rew), gamma);
}

} // namespace bisim
