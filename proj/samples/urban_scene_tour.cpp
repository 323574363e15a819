// Walks the urban pieces without training: build the default scene, sample a
// dataset, and show how teacher and ground truth disagree behind buildings.
#include <iostream>

#include <cdrlab/scenarios.hpp>

using namespace cdrlab;

int main() {
    const UrbanScene scene = default_urban_scene();
    UrbanCounts counts;
    counts.train = 2000;
    counts.test = 500;
    const UrbanWorld world = urban_generate(scene, counts, 42);

    std::size_t los = world.train.count(1);
    std::cout << "train rows: " << world.train.size() << " (" << los << " LOS, "
              << world.train.size() - los << " NLOS)\n";

    const auto oracle = make_urban_oracle(scene);
    double worst = 0.0;
    Covariate worst_x;
    for (const Sample& s : world.train.samples()) {
        const auto [truth, context] = oracle(s.x);
        const Label guess = world.teacher(s.x);
        const double gap = angular_abs_diff(guess.at(0), truth.azimuth);
        if (context == 0 && gap > worst) {
            worst = gap;
            worst_x = s.x;
        }
    }
    std::cout << "largest NLOS azimuth error of the direct-path teacher: " << worst
              << " rad at (" << worst_x[0] << ", " << worst_x[1] << ")\n";
    return 0;
}
