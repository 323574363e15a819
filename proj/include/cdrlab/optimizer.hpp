#pragma once

#include <cmath>
#include <cstdint>

#include "cdrlab/errors.hpp"
#include "cdrlab/model.hpp"

namespace cdrlab {

// First-moment/second-moment state for Adam. Construct once per run with
// the parameter count; beta/epsilon live here so a step only needs gamma.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::int64_t step = 0;

    AdamState(Eigen::Index params, double b1 = 0.9, double b2 = 0.999,
              double epsilon = 1e-8)
        : beta1(b1), beta2(b2), eps(epsilon), m(Eigen::VectorXd::Zero(params)),
          v(Eigen::VectorXd::Zero(params)) {
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            throw Error("Adam betas must lie strictly inside (0,1)");
        if (!(eps > 0.0)) throw Error("Adam epsilon must be positive");
    }
};

/// One Adam update with bias-corrected moments, in place.
inline void adam_step(AdamState& state, Params& theta, const Gradient& grad,
                      double gamma) {
    if (theta.size() != state.m.size() || grad.size() != state.m.size())
        throw Error("Adam state dimension mismatch");
    if (!(gamma > 0.0)) throw Error("learning rate must be positive");
    if (!grad.allFinite()) throw NumericError("non-finite gradient in Adam step");
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v +
              (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    theta -= gamma * ((state.m / c1).array() /
                      ((state.v / c2).array().sqrt() + state.eps))
                         .matrix();
}

/// Plain gradient descent, the reference scheme behind the tuning theory.
inline void gd_step(Params& theta, const Gradient& grad, double gamma) {
    if (theta.size() != grad.size()) throw Error("gradient dimension mismatch");
    if (!(gamma > 0.0)) throw Error("learning rate must be positive");
    if (!grad.allFinite()) throw NumericError("non-finite gradient in GD step");
    theta -= gamma * grad;
}

} // namespace cdrlab
