#include "doctest.h"

#include "mebm/trainer.hpp"

#include <cmath>

using namespace mebm;

TEST_CASE("8-gaussians, K=10, 5000 iterations: no divergence, small final gap") {
    const Dataset data = synth_2d("eight_gaussians", 8000, 1);
    double total = 0.0;
    const std::uint64_t seeds[] = {1, 2, 3};
    for (std::uint64_t seed : seeds) {
        TrainConfig c;
        c.seed = seed;
        c.epochs = 1;
        c.iters_per_epoch = 5000;
        c.sgld.steps = 10;
        TrainState s = init_state(c, data);
        REQUIRE_NOTHROW(run_training(s, c, data, c.total_iterations()));
        REQUIRE(s.history.size() == 5000);
        double gap = 0.0;
        for (std::size_t i = s.history.size() - c.divergence_window; i < s.history.size(); ++i)
            gap += std::abs(s.history[i].energy_gap());
        gap /= static_cast<double>(c.divergence_window);
        CAPTURE(seed);
        CAPTURE(gap);
        CHECK(std::isfinite(gap));
        total += gap;
    }
    CHECK(total / 3.0 < 2.0);
}
