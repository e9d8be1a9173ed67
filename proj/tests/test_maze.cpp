#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "bisim/maze.hpp"
#include "bisim/metric_ops.hpp"
#include "bisim/rng.hpp"

using namespace bisim;

namespace {

/// 5x5 oracle layout: wall at (row 1, col 2) splits the top row.
const char* oracle_grid() {
    return "#####\n"
           "#.#.#\n"
           "#...#\n"
           "#S..#\n"
           "#####\n";
}

int count_free_chars(const std::string& text) {
    int n = 0;
    for (char c : text) n += (c == '.' || c == 'S');
    return n;
}

} // namespace

TEST_CASE("maze_step: zero action and free-space kinematics") {
    MazeSpec spec = parse_layout(oracle_grid(), "oracle", 0.1);
    MazeState p{0.25, 0.25};
    MazeState still = maze_step(spec, p, 0.0, 0.0);
    CHECK(still.x == 0.25);
    CHECK(still.y == 0.25);

    MazeState moved = maze_step(spec, p, 0.03, 0.04);
    CHECK(moved.x == doctest::Approx(0.28).epsilon(1e-15));
    CHECK(moved.y == doctest::Approx(0.29).epsilon(1e-15));
}

TEST_CASE("maze_step: eight-direction collision oracle") {
    MazeSpec spec = parse_layout(oracle_grid(), "oracle", 0.1);
    CHECK(spec.a_max() == doctest::Approx(0.05));
    const double m = 0.05;            // axis magnitude
    const double d = 0.05 / std::sqrt(2.0); // diagonal component

    // center cell (row 2, col 2): every direction is open
    {
        MazeState p{0.25, 0.25};
        const double dirs[8][2] = {{m, 0}, {d, d}, {0, m}, {-d, d},
                                   {-m, 0}, {-d, -d}, {0, -m}, {d, -d}};
        for (const auto& a : dirs) {
            MazeState q = maze_step(spec, p, a[0], a[1]);
            CHECK(q.x == doctest::Approx(p.x + a[0]));
            CHECK(q.y == doctest::Approx(p.y + a[1]));
        }
    }

    // just below the wall at (row 1, col 2): upward moves block the y axis,
    // sideways stays free
    {
        MazeState p{0.25, 0.22};
        MazeState north = maze_step(spec, p, 0.0, -m);
        CHECK(north.x == 0.25);
        CHECK(north.y == 0.22);
        MazeState ne = maze_step(spec, p, d, -d);
        CHECK(ne.x == doctest::Approx(0.25 + d));
        CHECK(ne.y == 0.22);
        MazeState nw = maze_step(spec, p, -d, -d);
        CHECK(nw.x == doctest::Approx(0.25 - d));
        CHECK(nw.y == 0.22);
    }

    // inside the top-left pocket (row 1, col 1): east is walled, south open
    {
        MazeState p{0.15, 0.15};
        MazeState east = maze_step(spec, p, m, 0.0);
        CHECK(east.x == 0.15);
        MazeState se = maze_step(spec, p, d, d);
        CHECK(se.x == doctest::Approx(0.15 + d));
        CHECK(se.y == doctest::Approx(0.15 + d));
        MazeState west = maze_step(spec, p, -m, 0.0);
        CHECK(west.x == 0.15); // border wall
    }

    CHECK_THROWS_AS(maze_step(spec, MazeState{0.25, 0.15}, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(maze_step(spec, MazeState{-0.01, 0.2}, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("maze_step: long moves cannot tunnel through thin walls") {
    // 30-wide corridor, wall column at col 3; a_max = 0.3 spans three cells
    std::string grid = "##############################\n"
                       "#S.#.........................#\n"
                       "##############################\n";
    MazeSpec spec = parse_layout(grid, "thin", 0.1);
    CHECK(spec.a_max() == doctest::Approx(0.3));
    MazeState p{0.15, 0.15};
    MazeState q = maze_step(spec, p, 0.3, 0.0); // target lands beyond the wall
    CHECK(q.x == 0.15);
    CHECK(q.y == 0.15);
}

TEST_CASE("maze actions are clipped to a_max") {
    MazeSpec spec = parse_layout(oracle_grid(), "oracle", 0.1);
    MazeState p{0.25, 0.25};
    MazeState q = maze_step(spec, p, 10.0, -10.0);
    CHECK(q.x == doctest::Approx(0.30));
    CHECK(q.y == doctest::Approx(0.20));
}

TEST_CASE("collision soundness fuzz: random walks never enter walls") {
    for (const MazeSpec& spec : builtin_layouts()) {
        Rng rng(splitmix64(42 + spec.rows));
        MazeEnv env(spec);
        MazeState s = env.reset();
        for (int t = 0; t < 100000; ++t) {
            const double ax = rng.uniform(-spec.a_max(), spec.a_max());
            const double ay = rng.uniform(-spec.a_max(), spec.a_max());
            const MazeEnv::StepResult r = env.step(ax, ay);
            s = r.state;
            REQUIRE_FALSE(spec.blocked(s.x, s.y));
            if (r.done) s = env.reset();
        }
    }
}

TEST_CASE("trajectories are bit-reproducible under identical seeds") {
    const MazeSpec spec = layout_by_name("square_a");
    for (int rep = 0; rep < 2; ++rep) {
        static std::vector<double> first;
        Rng rng(2718);
        MazeEnv env(spec);
        MazeState s = env.reset();
        std::vector<double> track;
        for (int t = 0; t < 2000; ++t) {
            const MazeEnv::StepResult r =
                env.step(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
            s = r.state;
            track.push_back(s.x);
            track.push_back(s.y);
            if (r.done) s = env.reset();
        }
        if (rep == 0)
            first = track;
        else
            CHECK(first == track);
    }
}

TEST_CASE("coverage tracker: fresh, full, scripted L-walk, monotone") {
    // 10x8 bordered grid: 48 interior bins
    std::string grid = "##########\n"
                       "#S.......#\n"
                       "#........#\n"
                       "#........#\n"
                       "#........#\n"
                       "#........#\n"
                       "#........#\n"
                       "##########\n";
    MazeSpec spec = parse_layout(grid, "open48", 0.1);
    REQUIRE(spec.free_cell_count() == 48);

    CoverageTracker fresh(spec);
    CHECK(fresh.ratio() == 0.0);

    // L-shaped walk through 12 bins: 8 across the top row, 4 down the last column
    CoverageTracker walk(spec);
    for (int c = 1; c <= 8; ++c)
        walk.update({(c + 0.5) * 0.1, 1.5 * 0.1});
    for (int r = 2; r <= 5; ++r)
        walk.update({8.5 * 0.1, (r + 0.5) * 0.1});
    CHECK(walk.visited_count() == 12);
    CHECK(walk.ratio() == doctest::Approx(0.25));

    // revisits never decrease the ratio
    double prev = walk.ratio();
    walk.update({1.5 * 0.1, 1.5 * 0.1});
    CHECK(walk.ratio() >= prev);

    CoverageTracker full(spec);
    for (int r = 1; r <= 6; ++r)
        for (int c = 1; c <= 8; ++c) full.update({(c + 0.5) * 0.1, (r + 0.5) * 0.1});
    CHECK(full.ratio() == doctest::Approx(1.0));

    const std::string snap = walk.render(spec);
    CHECK(snap.find('*') != std::string::npos);
    CHECK(snap.find('#') != std::string::npos);
}

TEST_CASE("builtin layouts: count, starts, free-bin accounting, connectivity") {
    const std::vector<MazeSpec> all = builtin_layouts();
    REQUIRE(all.size() >= 4);
    for (const MazeSpec& spec : all) {
        CHECK_FALSE(spec.wall_at(spec.start_row, spec.start_col));
        // every free cell reachable from the start
        CHECK(flood_fill_count(spec, spec.start_row, spec.start_col) == spec.free_cell_count());
    }
    // free-bin count equals the hand-count of '.'/'S' characters
    CHECK(layout_by_name("corridor2").free_cell_count() ==
          count_free_chars(layouts::corridor2()));
    CHECK(layout_by_name("square_a").free_cell_count() == count_free_chars(layouts::square_a()));
    CHECK(layout_by_name("square_tree").free_cell_count() ==
          count_free_chars(layouts::square_tree()));
    CHECK(layout_by_name("square_bottleneck").free_cell_count() ==
          count_free_chars(layouts::square_bottleneck()));

    // paper-style bin sizes
    CHECK(layout_by_name("square_bottleneck").cell_size == doctest::Approx(0.1));
    CHECK(layout_by_name("square_tree").cell_size == doctest::Approx(0.1));
    CHECK(layout_by_name("square_a").cell_size == doctest::Approx(0.05));

    CHECK_THROWS_AS(layout_by_name("nope"), std::invalid_argument);
}

TEST_CASE("bottleneck gap is the unique crossing between the chambers") {
    const MazeSpec spec = layout_by_name("square_bottleneck");
    const auto [gr, gc] = layouts::bottleneck_gap();
    CHECK_FALSE(spec.wall_at(gr, gc));
    const int full = flood_fill_count(spec, spec.start_row, spec.start_col);
    CHECK(full == spec.free_cell_count());
    const int blocked = flood_fill_count(spec, spec.start_row, spec.start_col, gr, gc);
    CHECK(blocked < full - 1); // an entire chamber disappears
}

TEST_CASE("layout parser diagnostics") {
    CHECK_THROWS_WITH_AS(parse_layout("###\n#x#\n###\n", "bad", 0.1),
                         doctest::Contains("line 2"), parse_error);
    CHECK_THROWS_AS(parse_layout("###\n#.#\n###\n", "no-start", 0.1), parse_error);
    CHECK_THROWS_AS(parse_layout("###\n#SS\n###\n", "two-starts", 0.1), parse_error);
    CHECK_THROWS_AS(parse_layout("###\n#S#\n##\n###\n", "ragged", 0.1), parse_error);
    CHECK_THROWS_AS(parse_layout(".##\n#S#\n###\n", "open-border", 0.1), parse_error);
    // render -> parse round trip
    const MazeSpec spec = layout_by_name("square_tree");
    const MazeSpec back = parse_layout(render_layout(spec), spec.name, spec.cell_size);
    CHECK(back.wall == spec.wall);
    CHECK(back.start_row == spec.start_row);
    CHECK(back.start_col == spec.start_col);
}

TEST_CASE("reward-free chain: classic metric collapses, predictive floor survives") {
    const TabularMdp chain = sparse_chain_mdp(5, 0.0);
    const Policy pi = Policy::uniform(5, 2);
    const double c_T = 0.5;

    OperatorConfig classic{1.0, c_T, OperatorMode::classic};
    const FixedPointResult collapsed = fixed_point(
        [&](const MetricMatrix& d) { return apply_classic_operator(chain, pi, d, classic); },
        MetricMatrix::zeros(5), c_T, 1e-12);
    CHECK(diameter(collapsed.metric) <= 1e-9);

    const GaussianRewardModel model = exact_reward_model(chain, 0.1);
    const EmpiricalTransitionModel trans = EmpiricalTransitionModel::exact(chain);
    OperatorConfig predictive{1.0, c_T, OperatorMode::predictive};
    const FixedPointResult floored = fixed_point(
        [&](const MetricMatrix& d) {
            return apply_predictive_operator(chain, pi, model, trans, d, predictive);
        },
        MetricMatrix::zeros(5), c_T, 1e-12);
    CHECK(diameter(floored.metric) > 0.05);
}

TEST_CASE("episode wrapper terminates after max_episode_steps") {
    const MazeSpec spec = layout_by_name("corridor2");
    CHECK(spec.max_episode_steps == 50);
    MazeEnv env(spec);
    env.reset();
    int steps = 0;
    bool done = false;
    while (!done) {
        done = env.step(0.0, 0.0).done;
        ++steps;
    }
    CHECK(steps == 50);
}
