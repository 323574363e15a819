#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cdrlab/dataset.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/model.hpp"
#include "cdrlab/objectives.hpp"
#include "cdrlab/optimizer.hpp"
#include "cdrlab/rng.hpp"
#include "cdrlab/run_history.hpp"
#include "cdrlab/scenarios.hpp"
#include "cdrlab/tuning.hpp"

namespace cdrlab {

enum class LambdaCadence { per_epoch, per_step };
enum class OptimizerKind { adam, gd };

struct TrainConfig {
    ObjectiveSpec objective;
    int epochs = 100;
    double gamma = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    std::size_t minibatch = 0; // 0 = full batch
    LambdaCadence cadence = LambdaCadence::per_epoch;
    OptimizerKind optimizer = OptimizerKind::adam;
    bool measure_time = false; // wall_ms stays 0 when off, keeping outputs
                               // byte-stable across machines
};

inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.epochs < 1)
        throw ConfigError("epochs must be >= 1, got " + std::to_string(cfg.epochs));
    if (!(cfg.gamma > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) ||
        !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0))
        throw ConfigError("Adam betas must lie strictly inside (0,1)");
    if (!(cfg.eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (cfg.objective.curriculum && cfg.objective.kind != Method::cdr &&
        cfg.objective.kind != Method::tdr)
        throw ConfigError("curriculum applies only to tuned methods (cdr, tdr)");
}

struct Evaluation {
    double global = 0.0;
    std::vector<double> per_context; // 0 for contexts absent from the test set
    std::vector<std::size_t> counts;
};

/// Mean test loss, globally and per context. Test samples must be labeled.
template <class Model>
Evaluation evaluate(const Model& model, const Params& theta,
                    const StratifiedDataset& test) {
    if (test.empty()) throw EmptyBatchError("evaluate: empty test set");
    const int contexts = test.contexts();
    Evaluation ev;
    ev.per_context.assign(static_cast<std::size_t>(contexts), 0.0);
    ev.counts.assign(static_cast<std::size_t>(contexts), 0);
    double total = 0.0;
    std::size_t rows_total = 0;
    for (int c = 0; c < contexts; ++c) {
        const auto& idx = test.context_indices(c);
        ev.counts[static_cast<std::size_t>(c)] = idx.size();
        if (idx.empty()) continue;
        std::vector<const Covariate*> xs;
        xs.reserve(idx.size());
        Eigen::MatrixXd targets(static_cast<Eigen::Index>(idx.size()), 2);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const Sample& s = test.sample(idx[i]);
            if (!s.y) throw Error("evaluate: test sample without a label");
            xs.push_back(&s.x);
            targets(static_cast<Eigen::Index>(i), 0) = s.y->at(0);
            targets(static_cast<Eigen::Index>(i), 1) = s.y->at(1);
        }
        const Eigen::MatrixXd out =
            model.forward_features(theta, model.compile_features(xs));
        if (!out.allFinite()) throw NumericError("non-finite prediction on test set");
        // sum of (1 - cos) over both angle columns
        const double sum = static_cast<double>(out.size()) -
                           (out - targets).array().cos().sum();
        ev.per_context[static_cast<std::size_t>(c)] =
            sum / static_cast<double>(idx.size());
        total += sum;
        rows_total += idx.size();
    }
    ev.global = total / static_cast<double>(rows_total);
    return ev;
}

namespace detail {

// Precompiled matrices for one context: labeled features with both target
// sets, unlabeled features with pseudo targets. Unused pieces stay empty.
struct ContextMatrices {
    Eigen::MatrixXd lab_feat;
    Eigen::MatrixXd lab_true;
    Eigen::MatrixXd lab_pseudo;
    Eigen::MatrixXd unl_feat;
    Eigen::MatrixXd unl_pseudo;
};

template <class Model>
Eigen::MatrixXd context_features(const Model& model, const StratifiedDataset& ds,
                                 int c) {
    const auto& idx = ds.context_indices(c);
    std::vector<const Covariate*> xs;
    xs.reserve(idx.size());
    for (std::size_t i : idx) xs.push_back(&ds.sample(i).x);
    return model.compile_features(xs);
}

inline Eigen::MatrixXd context_true_targets(const StratifiedDataset& ds, int c) {
    const auto& idx = ds.context_indices(c);
    Eigen::MatrixXd t(static_cast<Eigen::Index>(idx.size()), 2);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Sample& s = ds.sample(idx[i]);
        if (!s.y) throw Error("training met an unlabeled sample in the labeled set");
        t(static_cast<Eigen::Index>(i), 0) = s.y->at(0);
        t(static_cast<Eigen::Index>(i), 1) = s.y->at(1);
    }
    return t;
}

inline Eigen::MatrixXd context_pseudo_targets(const StratifiedDataset& ds,
                                              const Teacher& teacher, int c) {
    const auto& idx = ds.context_indices(c);
    Eigen::MatrixXd t(static_cast<Eigen::Index>(idx.size()), 2);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Label y = teacher(ds.sample(idx[i]).x);
        t(static_cast<Eigen::Index>(i), 0) = y.at(0);
        t(static_cast<Eigen::Index>(i), 1) = y.at(1);
    }
    return t;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& src,
                                 const std::vector<std::size_t>& order,
                                 std::size_t lo, std::size_t hi) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(hi - lo), src.cols());
    for (std::size_t i = lo; i < hi; ++i)
        out.row(static_cast<Eigen::Index>(i - lo)) =
            src.row(static_cast<Eigen::Index>(order[i]));
    return out;
}

// One mean-loss term of the objective. Which terms exist is structural
// (method and data shape); only the coefficient changes across epochs, so
// shuffle streams and step chunking stay stable while lambda moves.
struct ActiveComponent {
    const Eigen::MatrixXd* features = nullptr;
    const Eigen::MatrixXd* targets = nullptr;
    int context = 0;
    int kind = 0; // 0 = pseudo on unlabeled, 1 = true labeled, 2 = pseudo on labeled
    std::uint64_t perm_tag = 0; // stable shuffle stream id
    std::vector<std::size_t> order;

    double coeff(const std::vector<ComponentCoeffs>& coeffs) const {
        const auto& k = coeffs[static_cast<std::size_t>(context)];
        return kind == 0 ? k.pseudo_unlabeled : kind == 1 ? k.labeled : k.pseudo_labeled;
    }
};

} // namespace detail

/// Run the full optimization loop for any of the five methods and return
/// the per-epoch history plus final parameters and test metrics. Everything
/// is deterministic in (config, datasets): reruns give identical results.
template <class Model>
RunHistory train(const Model& model, const TrainConfig& cfg,
                 const StratifiedDataset& labeled, const StratifiedDataset& unlabeled,
                 const Teacher& teacher, const StratifiedDataset& test) {
    validate_train_config(cfg);
    const Method method = cfg.objective.kind;
    const int contexts = labeled.contexts();
    if (unlabeled.contexts() != contexts || test.contexts() != contexts)
        throw Error("labeled, unlabeled, and test sets disagree on context count");

    const std::size_t n = labeled.size();
    const std::size_t big_n = unlabeled.size();
    if (method == Method::p_erm && n + big_n == 0)
        throw EmptyBatchError("nothing to train on");

    const bool need_lab_pseudo = method == Method::dr || method == Method::tdr ||
                                 method == Method::cdr;
    const bool need_unl_pseudo = need_lab_pseudo || method == Method::p_erm;
    const bool estimates_lambda =
        (method == Method::tdr || method == Method::cdr) &&
        cfg.objective.tuning == TuningMode::estimated;

    std::vector<detail::ContextMatrices> data(static_cast<std::size_t>(contexts));
    for (int c = 0; c < contexts; ++c) {
        auto& m = data[static_cast<std::size_t>(c)];
        if (labeled.count(c) > 0) {
            m.lab_feat = detail::context_features(model, labeled, c);
            m.lab_true = detail::context_true_targets(labeled, c);
            if (need_lab_pseudo)
                m.lab_pseudo = detail::context_pseudo_targets(labeled, teacher, c);
        }
        if (need_unl_pseudo && unlabeled.count(c) > 0) {
            m.unl_feat = detail::context_features(model, unlabeled, c);
            m.unl_pseudo = detail::context_pseudo_targets(unlabeled, teacher, c);
        }
    }
    const auto lab_counts = context_counts(labeled);
    const auto unl_counts = context_counts(unlabeled);

    // Tuning vector sources. The estimator runs on the full labeled set at
    // the current parameters; the batched moment pass keeps it cheap.
    std::vector<bool> warned(static_cast<std::size_t>(contexts), false);
    auto estimate_now = [&](const Params& theta) -> TuningVector {
        TuningVector lam(static_cast<std::size_t>(contexts), 0.0);
        auto context_moments = [&](int c, LambdaAccumulator& acc) {
            const auto& m = data[static_cast<std::size_t>(c)];
            if (labeled.count(c) == 0) return;
            Gradient gsum = Gradient::Zero(static_cast<Eigen::Index>(model.param_count()));
            Gradient psum = Gradient::Zero(static_cast<Eigen::Index>(model.param_count()));
            const auto mom = model.gram_moments(theta, m.lab_feat, m.lab_true,
                                                m.lab_pseudo, gsum, psum);
            acc.add_moments(mom.dot_sum, mom.pseudo_sq_sum, gsum, psum,
                            labeled.count(c));
        };
        if (method == Method::cdr) {
            for (int c = 0; c < contexts; ++c) {
                LambdaAccumulator acc;
                context_moments(c, acc);
                LambdaDiagnostics diag;
                lam[static_cast<std::size_t>(c)] = acc.estimate(unlabeled.count(c), &diag);
                if (diag.degenerate && !warned[static_cast<std::size_t>(c)]) {
                    std::cerr << "tuning degenerate in context " << c << ": "
                              << diag.reason << "\n";
                    warned[static_cast<std::size_t>(c)] = true;
                }
            }
        } else { // tdr: one pooled scalar for every context
            LambdaAccumulator acc;
            for (int c = 0; c < contexts; ++c) context_moments(c, acc);
            LambdaDiagnostics diag;
            const double pooled = acc.estimate(big_n, &diag);
            if (diag.degenerate && !warned[0]) {
                std::cerr << "pooled tuning degenerate: " << diag.reason << "\n";
                warned[0] = true;
            }
            lam.assign(static_cast<std::size_t>(contexts), pooled);
        }
        return lam;
    };

    TuningVector lambda;
    if (method == Method::dr) {
        lambda.assign(static_cast<std::size_t>(contexts),
                      dr_equivalent_lambda(n, big_n));
    } else if (method == Method::tdr || method == Method::cdr) {
        if (cfg.objective.tuning == TuningMode::fixed) {
            validate_tuning(cfg.objective.fixed_lambda, contexts);
            lambda = cfg.objective.fixed_lambda;
            if (method == Method::tdr)
                for (double v : lambda)
                    if (v != lambda.front())
                        throw InvalidTuningError(
                            "tdr uses a single shared value; fixed vector differs "
                            "across contexts");
        } else {
            lambda.assign(static_cast<std::size_t>(contexts), 0.0); // set per epoch
        }
    }

    auto coefficients = [&](double alpha) -> std::vector<ComponentCoeffs> {
        if (method == Method::erm)
            return cdr_coefficients(lab_counts, unl_counts,
                                    TuningVector(static_cast<std::size_t>(contexts), 0.0),
                                    1.0);
        if (method == Method::p_erm) {
            std::vector<ComponentCoeffs> coeffs(static_cast<std::size_t>(contexts));
            const double denom = static_cast<double>(n + big_n);
            for (int c = 0; c < contexts; ++c) {
                auto& k = coeffs[static_cast<std::size_t>(c)];
                k.labeled = static_cast<double>(labeled.count(c)) / denom;
                k.pseudo_unlabeled = static_cast<double>(unlabeled.count(c)) / denom;
            }
            return coeffs;
        }
        return cdr_coefficients(lab_counts, unl_counts, lambda, alpha);
    };

    Params theta = model.init_params(cfg.seed);
    AdamState adam(theta.size(), cfg.beta1, cfg.beta2, cfg.eps);
    Gradient grad = Gradient::Zero(theta.size());

    RunHistory hist;
    hist.method = method_name(method);
    hist.seed = cfg.seed;
    hist.contexts = contexts;
    hist.labeled_count = n;
    hist.unlabeled_count = big_n;
    hist.epochs.reserve(static_cast<std::size_t>(cfg.epochs));

    Rng perm_base(Rng::splitmix(cfg.seed) ^ 0x7E41A17B00372D1FULL);

    // The term list is fixed for the whole run; coefficients vary by epoch.
    std::vector<detail::ActiveComponent> active;
    for (int c = 0; c < contexts; ++c) {
        auto& m = data[static_cast<std::size_t>(c)];
        const auto cu = static_cast<std::uint64_t>(c);
        if (need_unl_pseudo && m.unl_feat.rows() > 0)
            active.push_back({&m.unl_feat, &m.unl_pseudo, c, 0, 3 * cu + 0, {}});
        if (m.lab_feat.rows() > 0)
            active.push_back({&m.lab_feat, &m.lab_true, c, 1, 3 * cu + 1, {}});
        if (need_lab_pseudo && m.lab_feat.rows() > 0)
            active.push_back({&m.lab_feat, &m.lab_pseudo, c, 2, 3 * cu + 2, {}});
    }
    std::size_t max_rows = 0;
    for (const auto& a : active)
        max_rows = std::max(max_rows, static_cast<std::size_t>(a.features->rows()));
    const std::size_t steps = (cfg.minibatch == 0 || max_rows == 0)
                                  ? 1
                                  : (max_rows + cfg.minibatch - 1) / cfg.minibatch;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto tick = std::chrono::steady_clock::now();
        const double alpha =
            cfg.objective.curriculum ? curriculum_alpha(epoch, cfg.epochs) : 1.0;
        try {
            if (estimates_lambda && cfg.cadence == LambdaCadence::per_epoch)
                lambda = estimate_now(theta);
            auto coeffs = coefficients(alpha);

            if (steps > 1) {
                Rng epoch_rng = perm_base.fork(static_cast<std::uint64_t>(epoch));
                for (auto& a : active) {
                    a.order.resize(static_cast<std::size_t>(a.features->rows()));
                    std::iota(a.order.begin(), a.order.end(), std::size_t{0});
                    Rng comp_rng = epoch_rng.fork(a.perm_tag);
                    comp_rng.shuffle(a.order);
                }
            }

            double epoch_value = 0.0;
            for (std::size_t s = 0; s < steps; ++s) {
                if (estimates_lambda && cfg.cadence == LambdaCadence::per_step) {
                    lambda = estimate_now(theta);
                    coeffs = coefficients(alpha);
                }
                double value = 0.0;
                grad.setZero();
                for (const auto& a : active) {
                    const double coeff = a.coeff(coeffs);
                    if (coeff == 0.0) continue;
                    if (steps == 1) {
                        model.accumulate_batch(theta, *a.features, *a.targets,
                                               coeff, value, grad);
                        continue;
                    }
                    const std::size_t rows = a.order.size();
                    const std::size_t lo = s * rows / steps;
                    const std::size_t hi = (s + 1) * rows / steps;
                    if (lo == hi) continue; // this term sat the step out
                    const Eigen::MatrixXd feat =
                        detail::take_rows(*a.features, a.order, lo, hi);
                    const Eigen::MatrixXd targ =
                        detail::take_rows(*a.targets, a.order, lo, hi);
                    model.accumulate_batch(theta, feat, targ, coeff, value, grad);
                }
                if (!std::isfinite(value) || !grad.allFinite())
                    throw NumericError("non-finite objective or gradient");
                if (cfg.optimizer == OptimizerKind::adam)
                    adam_step(adam, theta, grad, cfg.gamma);
                else
                    gd_step(theta, grad, cfg.gamma);
                epoch_value += value;
            }

            EpochRecord rec;
            rec.epoch = epoch;
            rec.objective_value = epoch_value / static_cast<double>(steps);
            rec.alpha = alpha;
            rec.lambda = lambda; // empty for erm / p-erm
            if (cfg.measure_time)
                rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - tick)
                                  .count();
            hist.epochs.push_back(std::move(rec));
        } catch (const NumericError& err) {
            throw NumericError("epoch " + std::to_string(epoch) + ": " + err.what());
        }
    }

    const Evaluation ev = evaluate(model, theta, test);
    hist.test_loss = ev.global;
    hist.context_test_loss = ev.per_context;
    hist.context_test_count = ev.counts;
    hist.final_lambda = lambda;
    hist.final_theta = std::move(theta);
    return hist;
}

// ---- loss maps --------------------------------------------------------------

struct GridSpec {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
    std::size_t nx = 200, ny = 200;
};

inline GridSpec full_scene_grid(const UrbanScene& scene, std::size_t nx = 200,
                                std::size_t ny = 200) {
    return {scene.bounds.xmin, scene.bounds.ymin, scene.bounds.xmax,
            scene.bounds.ymax, nx, ny};
}

struct LossMapCell {
    double x = 0.0;
    double y = 0.0;
    bool free_space = false;
    double loss = 0.0; // meaningful only when free_space
};

/// Pointwise loss against the scene's ground truth on a regular grid of
/// cell centers, scanning west-to-east then south-to-north. Cells whose
/// center falls inside a building are marked not-free and carry no loss.
template <class Model>
std::vector<LossMapCell> loss_map(const Model& model, const Params& theta,
                                  const UrbanScene& scene, const GridSpec& grid) {
    if (grid.nx == 0 || grid.ny == 0)
        throw InvalidGridError("grid resolution must be positive");
    if (!(grid.xmin < grid.xmax && grid.ymin < grid.ymax))
        throw InvalidGridError("grid region is degenerate");
    const double tol = 1e-9;
    if (grid.xmin < scene.bounds.xmin - tol || grid.xmax > scene.bounds.xmax + tol ||
        grid.ymin < scene.bounds.ymin - tol || grid.ymax > scene.bounds.ymax + tol)
        throw InvalidGridError("grid region leaves the scene bounds");

    const double dx = (grid.xmax - grid.xmin) / static_cast<double>(grid.nx);
    const double dy = (grid.ymax - grid.ymin) / static_cast<double>(grid.ny);
    std::vector<LossMapCell> cells;
    cells.reserve(grid.nx * grid.ny);
    std::vector<Covariate> free_points;
    std::vector<std::size_t> free_index;
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            LossMapCell cell;
            cell.x = grid.xmin + (static_cast<double>(i) + 0.5) * dx;
            cell.y = grid.ymin + (static_cast<double>(j) + 0.5) * dy;
            cell.free_space = true;
            for (const Rect& b : scene.buildings)
                if (b.contains_interior({cell.x, cell.y})) {
                    cell.free_space = false;
                    break;
                }
            if (cell.free_space) {
                free_points.push_back({cell.x, cell.y});
                free_index.push_back(cells.size());
            }
            cells.push_back(cell);
        }
    }
    if (free_points.empty()) return cells;

    std::vector<const Covariate*> xs;
    xs.reserve(free_points.size());
    for (const auto& p : free_points) xs.push_back(&p);
    const Eigen::MatrixXd out =
        model.forward_features(theta, model.compile_features(xs));
    if (!out.allFinite()) throw NumericError("non-finite prediction in loss map");
    for (std::size_t k = 0; k < free_points.size(); ++k) {
        const AngleTarget truth =
            ground_truth_aod(scene, {free_points[k][0], free_points[k][1]});
        const AngleTarget pred{out(static_cast<Eigen::Index>(k), 0),
                               out(static_cast<Eigen::Index>(k), 1)};
        cells[free_index[k]].loss = angular_loss(pred, truth);
    }
    return cells;
}

} // namespace cdrlab
