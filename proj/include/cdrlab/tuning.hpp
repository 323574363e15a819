#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cdrlab/dataset.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/model.hpp"
#include "cdrlab/objectives.hpp"

namespace cdrlab {

// Per-context tuning parameter machinery. The estimator weighs how much the
// pseudo-labeled data helps by the agreement between centered gradients and
// centered pseudo-gradients on the labeled samples:
//
//   lambda_c = cov(grad^f, grad) / [ (1 + n_c/N_c) * var(grad^f) ]
//
// with sample covariances (Bessel 1/(n_c - 1)), clipped into [0,1].

struct LambdaDiagnostics {
    bool degenerate = false;
    std::string reason;      // empty unless degenerate
    double raw = 0.0;        // pre-clip ratio (0 when degenerate)
    double numerator = 0.0;
    double denominator = 0.0;
};

// Raw material for one context: paired per-sample gradient and
// pseudo-gradient lists on the labeled data, plus the unlabeled count.
// Means are recomputed from the lists on demand, never cached.
struct ContextGradientStats {
    std::vector<Gradient> grads;        // d/dtheta loss(theta | x_i, y_i)
    std::vector<Gradient> pseudo_grads; // d/dtheta loss(theta | x_i, f(x_i))
    std::size_t unlabeled_count = 0;    // N_c

    std::size_t labeled_count() const { return grads.size(); }

    void add(Gradient grad, Gradient pseudo_grad) {
        if (!grads.empty() && (grad.size() != grads.front().size() ||
                               pseudo_grad.size() != grads.front().size()))
            throw Error("gradient dimension changed mid-context");
        grads.push_back(std::move(grad));
        pseudo_grads.push_back(std::move(pseudo_grad));
    }

    Gradient grad_mean() const { return mean_of(grads); }
    Gradient pseudo_grad_mean() const { return mean_of(pseudo_grads); }

private:
    static Gradient mean_of(const std::vector<Gradient>& list) {
        if (list.empty()) throw EmptyBatchError("gradient mean of empty list");
        Gradient m = Gradient::Zero(list.front().size());
        for (const auto& g : list) m += g;
        return m / static_cast<double>(list.size());
    }
};

namespace detail {

inline double clip_unit(double v) { return std::clamp(v, 0.0, 1.0); }

inline double finish_lambda(double num, double den_var, std::size_t n_c,
                            std::size_t big_n_c, LambdaDiagnostics* diag) {
    LambdaDiagnostics local;
    LambdaDiagnostics& d = diag ? *diag : local;
    d = LambdaDiagnostics{};
    if (n_c < 2) {
        d.degenerate = true;
        d.reason = "needs at least 2 labeled samples, has " + std::to_string(n_c);
        return 0.0;
    }
    if (big_n_c == 0) {
        d.degenerate = true;
        d.reason = "no unlabeled samples in this context";
        return 0.0;
    }
    const double factor =
        1.0 + static_cast<double>(n_c) / static_cast<double>(big_n_c);
    const double den = factor * den_var;
    d.numerator = num;
    d.denominator = den;
    if (!(den > 0.0)) {
        d.degenerate = true;
        d.reason = "constant pseudo-gradients (zero variance)";
        return 0.0;
    }
    d.raw = num / den;
    return clip_unit(d.raw);
}

} // namespace detail

/// The labeled-data tuning estimate for one context, clipped into [0,1].
/// Degenerate inputs (fewer than 2 labeled samples, no unlabeled mass, or
/// constant pseudo-gradients) give 0 and set diagnostics instead of throwing.
inline double estimate_lambda(const ContextGradientStats& stats,
                              LambdaDiagnostics* diag = nullptr) {
    if (stats.grads.size() != stats.pseudo_grads.size())
        throw Error("gradient and pseudo-gradient lists differ in length");
    const std::size_t n_c = stats.labeled_count();
    if (n_c < 2 || stats.unlabeled_count == 0)
        return detail::finish_lambda(0.0, 0.0, n_c, stats.unlabeled_count, diag);

    const Gradient g_mean = stats.grad_mean();
    const Gradient p_mean = stats.pseudo_grad_mean();
    double num = 0.0, den_var = 0.0;
    for (std::size_t i = 0; i < n_c; ++i) {
        const Gradient gd = stats.grads[i] - g_mean;
        const Gradient pd = stats.pseudo_grads[i] - p_mean;
        num += pd.dot(gd);
        den_var += pd.dot(pd);
    }
    const double bessel = static_cast<double>(n_c - 1);
    return detail::finish_lambda(num / bessel, den_var / bessel, n_c,
                                 stats.unlabeled_count, diag);
}

// Streaming form of the same estimate. Keeps only O(p) state (two running
// gradient sums) plus scalar moments, so contexts of any size fit in memory.
// Uses the expansion cov = (sum_dot - <sum_p, sum_g>/n) / (n-1); agrees with
// estimate_lambda up to floating-point noise.
class LambdaAccumulator {
public:
    /// One labeled sample's gradient pair.
    void add(const Gradient& grad, const Gradient& pseudo_grad) {
        ensure_size(grad.size());
        sum_dot_ += pseudo_grad.dot(grad);
        sum_pseudo_sq_ += pseudo_grad.dot(pseudo_grad);
        sum_g_ += grad;
        sum_p_ += pseudo_grad;
        count_ += 1;
    }

    /// Pre-reduced batch: sums of per-sample scalar moments plus the two
    /// gradient sums over `count` samples (the batched model path).
    void add_moments(double dot_sum, double pseudo_sq_sum, const Gradient& grad_sum,
                     const Gradient& pseudo_grad_sum, std::size_t count) {
        ensure_size(grad_sum.size());
        sum_dot_ += dot_sum;
        sum_pseudo_sq_ += pseudo_sq_sum;
        sum_g_ += grad_sum;
        sum_p_ += pseudo_grad_sum;
        count_ += count;
    }

    std::size_t count() const { return count_; }

    double estimate(std::size_t unlabeled_count,
                    LambdaDiagnostics* diag = nullptr) const {
        if (count_ < 2 || unlabeled_count == 0)
            return detail::finish_lambda(0.0, 0.0, count_, unlabeled_count, diag);
        const double n = static_cast<double>(count_);
        const double bessel = n - 1.0;
        const double num = (sum_dot_ - sum_p_.dot(sum_g_) / n) / bessel;
        // clamp: fp cancellation can leave a tiny negative variance
        const double den_var =
            std::max(0.0, (sum_pseudo_sq_ - sum_p_.dot(sum_p_) / n) / bessel);
        return detail::finish_lambda(num, den_var, count_, unlabeled_count, diag);
    }

private:
    void ensure_size(Eigen::Index p) {
        if (sum_g_.size() == 0) {
            sum_g_ = Gradient::Zero(p);
            sum_p_ = Gradient::Zero(p);
        } else if (sum_g_.size() != p) {
            throw Error("gradient dimension changed mid-accumulation");
        }
    }

    double sum_dot_ = 0.0;
    double sum_pseudo_sq_ = 0.0;
    Gradient sum_g_, sum_p_;
    std::size_t count_ = 0;
};

/// The tuning value at which the context-aware objective collapses to the
/// plain bias-corrected one: 1/(1 + n/N) = N/(n + N).
inline double dr_equivalent_lambda(std::size_t n, std::size_t big_n) {
    if (big_n == 0)
        throw InvalidTuningError("unlabeled count must be positive");
    return static_cast<double>(big_n) / static_cast<double>(n + big_n);
}

/// Context-blind scalar estimate: all contexts pooled into one before the
/// standard estimator runs (K = 1 view of the same data).
inline double estimate_lambda_pooled(const std::vector<ContextGradientStats>& per_context,
                                     LambdaDiagnostics* diag = nullptr) {
    ContextGradientStats pooled;
    for (const auto& stats : per_context) {
        if (stats.grads.size() != stats.pseudo_grads.size())
            throw Error("gradient and pseudo-gradient lists differ in length");
        for (std::size_t i = 0; i < stats.grads.size(); ++i)
            pooled.add(stats.grads[i], stats.pseudo_grads[i]);
        pooled.unlabeled_count += stats.unlabeled_count;
    }
    return estimate_lambda(pooled, diag);
}

/// Gather the per-sample gradient pairs for one context of a labeled set.
template <class Model>
ContextGradientStats collect_context_stats(const Model& model, const Params& theta,
                                           const StratifiedDataset& labeled,
                                           const StratifiedDataset& unlabeled,
                                           const Teacher& teacher, int context) {
    ContextGradientStats stats;
    stats.unlabeled_count = unlabeled.count(context);
    for (std::size_t i : labeled.context_indices(context)) {
        const Sample& s = labeled.sample(i);
        if (!s.y) throw Error("tuning statistics need labeled samples");
        stats.add(model.loss_and_grad(theta, s.x, *s.y).second,
                  model.loss_and_grad(theta, s.x, teacher(s.x)).second);
    }
    return stats;
}

/// Per-context tuning vector for a whole split, one estimate per context.
/// Works for any model exposing loss_and_grad; the training loop has a
/// batched equivalent that matches this up to floating-point noise.
template <class Model>
TuningVector estimate_tuning_vector(const Model& model, const Params& theta,
                                    const StratifiedDataset& labeled,
                                    const StratifiedDataset& unlabeled,
                                    const Teacher& teacher,
                                    std::vector<LambdaDiagnostics>* diags = nullptr) {
    TuningVector lambda(static_cast<std::size_t>(labeled.contexts()));
    if (diags) diags->assign(lambda.size(), {});
    for (int c = 0; c < labeled.contexts(); ++c) {
        const auto stats =
            collect_context_stats(model, theta, labeled, unlabeled, teacher, c);
        lambda[static_cast<std::size_t>(c)] =
            estimate_lambda(stats, diags ? &(*diags)[static_cast<std::size_t>(c)] : nullptr);
    }
    return lambda;
}

// ---- population oracle (finite support), exact expectations -------------

struct PopulationPoint {
    Covariate x;
    Label y;
    double prob = 0.0;
};

/// One context's conditional distribution as an explicit finite support.
using FinitePopulation = std::vector<PopulationPoint>;

/// The variance-optimal tuning value computed exactly on a finite-support
/// population: population cross-covariance of pseudo-gradients with
/// gradients over (1 + n_c/N_c) times the population pseudo-gradient
/// variance. Returned unclipped; zero variance gives 0.
template <class Model>
double lambda_star_population(const Model& model, const FinitePopulation& pop,
                              const Params& theta, const Teacher& teacher,
                              std::size_t n_c, std::size_t big_n_c) {
    if (pop.empty()) throw Error("population support is empty");
    if (big_n_c == 0) throw InvalidTuningError("unlabeled count must be positive");
    double mass = 0.0;
    for (const auto& pt : pop) mass += pt.prob;
    if (std::abs(mass - 1.0) > 1e-9)
        throw Error("population probabilities sum to " + std::to_string(mass));

    std::vector<Gradient> grads, pseudo;
    grads.reserve(pop.size());
    pseudo.reserve(pop.size());
    for (const auto& pt : pop) {
        grads.push_back(model.loss_and_grad(theta, pt.x, pt.y).second);
        pseudo.push_back(model.loss_and_grad(theta, pt.x, teacher(pt.x)).second);
    }
    Gradient g_mean = Gradient::Zero(grads.front().size());
    Gradient p_mean = Gradient::Zero(grads.front().size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        g_mean += pop[i].prob * grads[i];
        p_mean += pop[i].prob * pseudo[i];
    }
    double cross = 0.0, var = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const Gradient gd = grads[i] - g_mean;
        const Gradient pd = pseudo[i] - p_mean;
        cross += pop[i].prob * pd.dot(gd);
        var += pop[i].prob * pd.dot(pd);
    }
    if (!(var > 0.0)) return 0.0;
    const double factor =
        1.0 + static_cast<double>(n_c) / static_cast<double>(big_n_c);
    return cross / (factor * var);
}

} // namespace cdrlab
