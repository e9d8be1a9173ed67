// Short shaped-vs-unshaped comparison on the bottleneck maze: trains one seed
// each way and prints the coverage curves plus the shaped run's visit map.

#include <cstdio>

#include "bisim/agent.hpp"
#include "bisim/maze.hpp"

int main() {
    using namespace bisim;
    const MazeSpec spec = layout_by_name("square_bottleneck");
    AgentConfig cfg;
    cfg.total_steps = 20000;
    cfg.seed = 1;

    ShapingConfig shaping;
    shaping.gamma = cfg.gamma;
    const RunResult shaped = train(spec, cfg, shaping);
    const RunResult control = train(spec, cfg, std::nullopt);

    std::printf("step    shaped  unshaped\n");
    for (std::size_t i = 0; i < shaped.curve.size(); i += 4)
        std::printf("%6ld  %.4f  %.4f\n", shaped.curve[i].step, shaped.curve[i].coverage,
                    control.curve[i].coverage);
    std::printf("final   %.4f  %.4f\n", shaped.final_coverage, control.final_coverage);
    std::printf("\nshaped visit map ('*' = visited bin):\n%s", shaped.coverage_grid.c_str());
    return 0;
}
