// Minimal end-to-end use of the library on the 1D scenario: generate data,
// train ERM and the context-aware objective, compare test losses per context.
#include <iostream>

#include <cdrlab/scenarios.hpp>
#include <cdrlab/trainer.hpp>

using namespace cdrlab;

int main() {
    ToySpec spec;
    ToyWorld world = toy_generate(spec, 7);

    MlpDescriptor desc;
    desc.input_dim = 1;
    desc.fourier_m = 8;
    desc.fourier_sigma = 6.0;
    desc.hidden = {64, 32};
    desc.input_lo = {-1.0};
    desc.input_hi = {1.0};
    const FourierMlp model(desc);

    TrainConfig cfg;
    cfg.seed = 7;
    cfg.epochs = 100;

    cfg.objective.kind = Method::erm;
    const RunHistory erm =
        train(model, cfg, world.labeled, world.unlabeled, world.teacher, world.test);

    cfg.objective.kind = Method::cdr;
    cfg.objective.curriculum = true;
    const RunHistory cdr =
        train(model, cfg, world.labeled, world.unlabeled, world.teacher, world.test);

    std::cout << "test loss, erm: " << erm.test_loss << " | cdr: " << cdr.test_loss
              << "\n";
    for (int c = 0; c < 2; ++c)
        std::cout << "context " << c << ": erm " << erm.context_test_loss[c]
                  << " | cdr " << cdr.context_test_loss[c] << " (lambda "
                  << cdr.final_lambda[c] << ")\n";
    return 0;
}
