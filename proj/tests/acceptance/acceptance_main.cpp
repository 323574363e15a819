// Acceptance gate: one line per criterion, PASS/FAIL with the measured
// quantities, nonzero exit if anything failed. Runs everything even after a
// failure so a red build still shows the full picture.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdrlab/config.hpp"
#include "cdrlab/dataset.hpp"
#include "cdrlab/experiment.hpp"
#include "cdrlab/geometry.hpp"
#include "cdrlab/model.hpp"
#include "cdrlab/objectives.hpp"
#include "cdrlab/rng.hpp"
#include "cdrlab/run_history.hpp"
#include "cdrlab/scenarios.hpp"
#include "cdrlab/tuning.hpp"

#include "support/test_models.hpp"

namespace {

using namespace cdrlab;
using cdrlab::testing::ScalarSqModel;
using cdrlab::testing::lab;
using cdrlab::testing::scalar_theta;
using cdrlab::testing::unl;
namespace fs = std::filesystem;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(4) << v;
    return s.str();
}

void check(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "cdrlab_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(static_cast<bool>(in), "cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double median(std::vector<double> v) {
    check(!v.empty(), "median of empty sample");
    std::sort(v.begin(), v.end());
    return quantile_type7(v, 0.5);
}

// ---------------------------------------------------------------- criterion 1

std::string criterion_gradients() {
    MlpDescriptor desc;
    desc.input_dim = 2;
    desc.fourier_m = 4;
    desc.fourier_sigma = 10.0;
    desc.hidden = {10, 7};
    desc.output_dim = 2;
    desc.input_lo = {0.0, 0.0};
    desc.input_hi = {1.0, 1.0};
    const FourierMlp model(desc);

    Rng rng(20260821);
    const double h = 1e-6;
    double worst = 0.0;
    for (int instance = 0; instance < 20; ++instance) {
        Params theta = model.init_params(rng.next_u64());
        // init leaves biases at zero; jitter everything so no block is special
        for (Eigen::Index i = 0; i < theta.size(); ++i)
            theta[i] += rng.next_double(-0.05, 0.05);
        const Covariate x{rng.next_double(0.0, 1.0), rng.next_double(0.0, 1.0)};
        const Label y{rng.next_double(-std::numbers::pi, std::numbers::pi),
                      rng.next_double(0.0, std::numbers::pi)};

        const auto [value, grad] = model.loss_and_grad(theta, x, y);
        const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Params tp = theta, tm = theta;
            tp[i] += h;
            tm[i] -= h;
            const double fd = (model.loss(tp, x, y) - model.loss(tm, x, y)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - grad[i]) / scale);
        }
        (void)value;
    }
    check(worst < 1e-5, "max relative gradient error " + fmt(worst) + " >= 1e-5");
    return "max relative error " + fmt(worst) + " over 20 random (theta, x, y), limit 1e-5";
}

// ---------------------------------------------------------------- criterion 2

std::string criterion_dr_identity() {
    MlpDescriptor desc;
    desc.input_dim = 1;
    desc.fourier_m = 2;
    desc.fourier_sigma = 4.0;
    desc.hidden = {5};
    desc.output_dim = 2;
    desc.input_lo = {0.0};
    desc.input_hi = {1.0};
    const FourierMlp model(desc);

    Rng rng(77007);
    double worst_value = 0.0, worst_grad = 0.0;
    for (int instance = 0; instance < 100; ++instance) {
        const int contexts = 1 + static_cast<int>(rng.next_below(3));
        StratifiedDataset labeled(contexts, 1, 2), unlabeled(contexts, 1, 2);
        std::size_t n = 0, big_n = 0;
        for (int c = 0; c < contexts; ++c) {
            // identity needs every context populated on both sides
            const auto nc = 1 + rng.next_below(4);
            const auto bnc = 1 + rng.next_below(4);
            for (std::uint64_t i = 0; i < nc; ++i)
                labeled.add(lab({rng.next_double(0.0, 1.0)}, c,
                                {rng.next_double(-std::numbers::pi, std::numbers::pi),
                                 rng.next_double(0.0, std::numbers::pi)}));
            for (std::uint64_t i = 0; i < bnc; ++i)
                unlabeled.add(unl({rng.next_double(0.0, 1.0)}, c));
            n += nc;
            big_n += bnc;
        }
        const double a0 = rng.next_double(-2.0, 2.0), a1 = rng.next_double(-2.0, 2.0);
        const double e0 = rng.next_double(-2.0, 2.0), e1 = rng.next_double(-2.0, 2.0);
        Teacher teacher = [=](const Covariate& x) {
            return Label{a0 + a1 * x[0], e0 + e1 * x[0]};
        };
        const Params theta = model.init_params(rng.next_u64());

        const TuningVector lambda(static_cast<std::size_t>(contexts),
                                  dr_equivalent_lambda(n, big_n));
        const auto [dv, dg] = dr_objective(model, theta, labeled, unlabeled, teacher);
        const auto [cv, cg] =
            cdr_objective(model, theta, labeled, unlabeled, teacher, lambda, 1.0);
        worst_value = std::max(worst_value, std::abs(dv - cv));
        worst_grad = std::max(worst_grad, (dg - cg).cwiseAbs().maxCoeff());
    }
    check(worst_value < 1e-12,
          "objective values diverge by " + fmt(worst_value) + " >= 1e-12");
    check(worst_grad < 1e-12,
          "gradient coordinates diverge by " + fmt(worst_grad) + " >= 1e-12");
    return "100 random instances, |value diff| <= " + fmt(worst_value) +
           ", |grad diff| <= " + fmt(worst_grad) + ", limit 1e-12";
}

// ---------------------------------------------------------------- criterion 3

struct MixturePopulation {
    std::vector<FinitePopulation> by_context;
    std::vector<double> context_probs;
};

Sample draw_point(const MixturePopulation& pop, bool labeled, Rng& rng) {
    const double uc = rng.next_double();
    int c = 0;
    double acc = 0.0;
    for (std::size_t k = 0; k < pop.context_probs.size(); ++k) {
        acc += pop.context_probs[k];
        if (uc < acc) {
            c = static_cast<int>(k);
            break;
        }
        c = static_cast<int>(k);
    }
    const auto& support = pop.by_context[static_cast<std::size_t>(c)];
    const double up = rng.next_double();
    acc = 0.0;
    const PopulationPoint* pick = &support.back();
    for (const auto& pt : support) {
        acc += pt.prob;
        if (up < acc) {
            pick = &pt;
            break;
        }
    }
    return labeled ? lab(pick->x, c, pick->y) : unl(pick->x, c);
}

std::string criterion_unbiasedness() {
    ScalarSqModel model;
    MixturePopulation pop;
    pop.context_probs = {0.4, 0.6};
    pop.by_context.push_back(
        {{{0.0, 0.0}, {0.0}, 0.5}, {{1.0, 0.0}, {1.0}, 0.3}, {{2.0, 0.0}, {2.0}, 0.2}});
    pop.by_context.push_back(
        {{{0.5, 1.0}, {0.5}, 0.25}, {{1.5, 1.0}, {1.5}, 0.5}, {{2.5, 1.0}, {2.5}, 0.25}});
    Teacher corrupted = [](const Covariate& x) {
        return Label{x[0] + (x[1] > 0.5 ? 2.0 : 0.0)};
    };

    const Params theta = scalar_theta(0.7);
    const double target = cdrlab::testing::population_loss(
        model, theta, pop.by_context, pop.context_probs);

    const int reps = 2000;
    const std::size_t n = 12, big_n = 24;
    const std::vector<double> lambda_values{0.0, 0.5, 1.0};
    std::vector<std::vector<double>> cdr_draws(lambda_values.size());
    std::vector<double> p_erm_draws;
    Rng base(424299);
    for (int rep = 0; rep < reps; ++rep) {
        Rng rng = base.fork(static_cast<std::uint64_t>(rep));
        StratifiedDataset labeled(2, 2, 1), unlabeled(2, 2, 1);
        for (std::size_t i = 0; i < n; ++i) labeled.add(draw_point(pop, true, rng));
        for (std::size_t i = 0; i < big_n; ++i)
            unlabeled.add(draw_point(pop, false, rng));
        for (std::size_t k = 0; k < lambda_values.size(); ++k) {
            const TuningVector lambda{lambda_values[k], lambda_values[k]};
            cdr_draws[k].push_back(
                cdr_objective(model, theta, labeled, unlabeled, corrupted, lambda, 1.0)
                    .first);
        }
        p_erm_draws.push_back(
            p_erm_objective(model, theta, labeled, unlabeled, corrupted).first);
    }

    auto mean_and_se = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size() - 1);
        return std::pair<double, double>{mean,
                                         std::sqrt(var / static_cast<double>(v.size()))};
    };

    double worst_z = 0.0;
    for (std::size_t k = 0; k < lambda_values.size(); ++k) {
        const auto [mean, se] = mean_and_se(cdr_draws[k]);
        const double z = std::abs(mean - target) / se;
        worst_z = std::max(worst_z, z);
        check(z <= 3.0, "context-tuned mean drifts " + fmt(z) +
                            " standard errors from the population loss at lambda = " +
                            fmt(lambda_values[k]));
    }
    const auto [pm, pse] = mean_and_se(p_erm_draws);
    const double pz = std::abs(pm - target) / pse;
    check(pz > 3.0, "pooled pseudo-label mean sits only " + fmt(pz) +
                        " standard errors from the population loss; the corrupted "
                        "teacher should push it far outside 3");
    return "2000 resamples: tuned objective within " + fmt(worst_z) +
           " SE at lambda in {0, 0.5, 1}; corrupted pooled objective off by " +
           fmt(pz) + " SE";
}

// ---------------------------------------------------------------- criterion 4

std::string criterion_lambda_oracles() {
    // worked two-sample example
    ContextGradientStats stats;
    stats.unlabeled_count = 2;
    Gradient g(1), p(1);
    g[0] = 0.0;
    p[0] = -1.0;
    stats.add(g, p);
    g[0] = -2.0;
    p[0] = -3.0;
    stats.add(g, p);
    const double worked = estimate_lambda(stats);
    check(worked == 0.5, "worked example returned " + fmt(worked) + ", expected 0.5");

    // exhaustive enumeration of a finite support reproduces the population value
    ScalarSqModel model;
    FinitePopulation pop{{{0.0}, {0.0}, 0.25}, {{1.0}, {1.0}, 0.5}, {{2.0}, {2.0}, 0.25}};
    Teacher f = [](const Covariate& x) { return Label{2.0 * x[0] + 0.3}; };
    const Params theta = scalar_theta(0.9);
    const std::size_t n_c = 8, big_n_c = 16;
    ContextGradientStats enumerated;
    enumerated.unlabeled_count = big_n_c;
    for (const auto& pt : pop) {
        const auto copies = static_cast<std::size_t>(std::llround(pt.prob * 8.0));
        for (std::size_t i = 0; i < copies; ++i)
            enumerated.add(model.loss_and_grad(theta, pt.x, pt.y).second,
                           model.loss_and_grad(theta, pt.x, f(pt.x)).second);
    }
    check(enumerated.labeled_count() == n_c, "enumeration produced the wrong count");
    const double star = lambda_star_population(model, pop, theta, f, n_c, big_n_c);
    check(star > 0.0 && star < 1.0, "population value degenerate: " + fmt(star));
    const double est = estimate_lambda(enumerated);
    check(std::abs(est - star) < 1e-10, "enumerated estimate " + fmt(est) +
                                            " misses population value " + fmt(star));

    // a truth-telling teacher drives the raw estimate to the pooled reference
    ContextGradientStats perfect;
    perfect.unlabeled_count = 13;
    for (int i = 0; i < 7; ++i) {
        const Covariate x{static_cast<double>(i)};
        const Label y{static_cast<double>(i)};
        const Gradient grad = model.loss_and_grad(scalar_theta(0.4), x, y).second;
        perfect.add(grad, grad);
    }
    LambdaDiagnostics diag;
    estimate_lambda(perfect, &diag);
    const double reference = dr_equivalent_lambda(7, 13);
    check(std::abs(diag.raw - reference) < 1e-12,
          "perfect-teacher raw estimate " + fmt(diag.raw) + " misses " + fmt(reference));

    return "worked example 0.5 exact; enumeration within " + fmt(std::abs(est - star)) +
           " of population value " + fmt(star) + "; perfect teacher within " +
           fmt(std::abs(diag.raw - reference)) + " of " + fmt(reference);
}

// ---------------------------------------------------------------- criterion 5

std::map<Method, std::vector<double>> collect_context_losses(const SweepResult& res,
                                                             double rho,
                                                             std::size_t context) {
    std::map<Method, std::vector<double>> out;
    for (const SweepRow& r : res.rows) {
        if (std::abs(r.rho - rho) > 1e-12 || !r.ok) continue;
        check(context < r.context_loss.size(), "run lacks per-context losses");
        out[r.method].push_back(r.context_loss[context]);
    }
    return out;
}

std::string criterion_toy_ordering() {
    const std::string out = scratch_dir("toy_ordering");
    const Config c = Config::from_string("scenario = toy\nout = " + out + "\n",
                                         "<acceptance>");
    const ExperimentConfig cfg = load_experiment_config(c);
    const SweepResult res = run_sweep(cfg);
    for (const SweepRow& r : res.rows)
        check(r.ok, std::string(method_name(r.method)) + " seed " +
                        format_u64(r.seed) + " failed: " + r.message);

    const auto region_a = collect_context_losses(res, 1.0, 0);
    const auto region_b = collect_context_losses(res, 1.0, 1);
    const double cdr_b = median(region_b.at(Method::cdr));
    const double dr_b = median(region_b.at(Method::dr));
    const double p_erm_b = median(region_b.at(Method::p_erm));
    const double cdr_a = median(region_a.at(Method::cdr));
    const double erm_a = median(region_a.at(Method::erm));

    check(cdr_b <= 0.9 * dr_b, "region B: cdr median " + fmt(cdr_b) +
                                   " not 10% below dr median " + fmt(dr_b));
    check(cdr_b <= 0.9 * p_erm_b, "region B: cdr median " + fmt(cdr_b) +
                                      " not 10% below p-erm median " + fmt(p_erm_b));
    check(cdr_a <= erm_a, "region A: cdr median " + fmt(cdr_a) +
                              " above erm median " + fmt(erm_a));
    return "10 seeds, region B medians cdr/dr/p-erm = " + fmt(cdr_b) + "/" + fmt(dr_b) +
           "/" + fmt(p_erm_b) + "; region A cdr/erm = " + fmt(cdr_a) + "/" + fmt(erm_a);
}

// ---------------------------------------------------------- criteria 6 and 7

struct UrbanArtifacts {
    SweepResult sweep;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    int epochs = 0;
};

std::optional<UrbanArtifacts> urban_artifacts;

std::map<Method, std::vector<double>> collect_global_losses(const SweepResult& res,
                                                            double rho) {
    std::map<Method, std::vector<double>> out;
    for (const SweepRow& r : res.rows) {
        if (std::abs(r.rho - rho) > 1e-12 || !r.ok) continue;
        out[r.method].push_back(r.test_loss);
    }
    return out;
}

std::string criterion_urban_ordering() {
    const std::string out = scratch_dir("urban_ordering");
    const Config c = Config::from_string("scenario = urban\n"
                                         "urban.train = 16000\n"
                                         "urban.test = 3000\n"
                                         "rhos = 0.005, 0.01\n"
                                         "out = " + out + "\n",
                                         "<acceptance>");
    const ExperimentConfig cfg = load_experiment_config(c);
    const SweepResult res = run_sweep(cfg);
    for (const SweepRow& r : res.rows)
        check(r.ok, std::string(method_name(r.method)) + " rho " + format_double(r.rho) +
                        " seed " + format_u64(r.seed) + " failed: " + r.message);
    urban_artifacts = UrbanArtifacts{res, out, cfg.seeds, cfg.epochs};

    std::ostringstream detail;
    for (double rho : {0.005, 0.01}) {
        const auto global = collect_global_losses(res, rho);
        const double cdr = median(global.at(Method::cdr));
        const double dr = median(global.at(Method::dr));
        const double p_erm = median(global.at(Method::p_erm));
        check(cdr < dr, "rho " + fmt(rho) + ": cdr median " + fmt(cdr) +
                            " not below dr median " + fmt(dr));
        check(cdr < p_erm, "rho " + fmt(rho) + ": cdr median " + fmt(cdr) +
                               " not below p-erm median " + fmt(p_erm));
        if (rho == 0.005)
            check(cdr <= 0.9 * dr, "rho 0.005: cdr median " + fmt(cdr) +
                                       " not 10% below dr median " + fmt(dr));
        detail << "rho " << fmt(rho) << " medians cdr/dr/p-erm = " << fmt(cdr) << "/"
               << fmt(dr) << "/" << fmt(p_erm) << "; ";
    }

    // per-context pattern at the tightest label budget; context 1 carries line
    // of sight, context 0 is shadowed
    const auto los = collect_context_losses(res, 0.005, 1);
    const auto nlos = collect_context_losses(res, 0.005, 0);
    const double erm_los = median(los.at(Method::erm));
    const double p_erm_los = median(los.at(Method::p_erm));
    const double dr_los = median(los.at(Method::dr));
    const double erm_nlos = median(nlos.at(Method::erm));
    const double p_erm_nlos = median(nlos.at(Method::p_erm));
    const double dr_nlos = median(nlos.at(Method::dr));
    check(p_erm_los < erm_los, "los: p-erm median " + fmt(p_erm_los) +
                                   " not below erm median " + fmt(erm_los));
    check(dr_los < erm_los,
          "los: dr median " + fmt(dr_los) + " not below erm median " + fmt(erm_los));
    check(erm_nlos < p_erm_nlos, "nlos: erm median " + fmt(erm_nlos) +
                                     " not below p-erm median " + fmt(p_erm_nlos));
    check(erm_nlos < dr_nlos,
          "nlos: erm median " + fmt(erm_nlos) + " not below dr median " + fmt(dr_nlos));
    for (const auto& [name, per_context] :
         {std::pair{"los", &los}, std::pair{"nlos", &nlos}}) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [method, losses] : *per_context)
            best = std::min(best, median(losses));
        const double cdr = median(per_context->at(Method::cdr));
        check(cdr <= 1.1 * best, std::string(name) + ": cdr median " + fmt(cdr) +
                                     " more than 10% above the best method " +
                                     fmt(best));
        detail << name << " best/cdr = " << fmt(best) << "/" << fmt(cdr) << "; ";
    }
    std::string text = detail.str();
    text.resize(text.size() - 2);
    return text;
}

std::string criterion_lambda_trajectories() {
    check(urban_artifacts.has_value(),
          "urban sweep artifacts unavailable (criterion 6 did not complete)");
    const UrbanArtifacts& art = *urban_artifacts;

    std::vector<double> final_los, final_nlos;
    for (const SweepRow& r : art.sweep.rows) {
        if (r.method != Method::cdr || std::abs(r.rho - 0.005) > 1e-12 || !r.ok)
            continue;
        check(r.final_lambda.size() == 2, "cdr run lacks a two-context tuning vector");
        final_nlos.push_back(r.final_lambda[0]);
        final_los.push_back(r.final_lambda[1]);
    }
    check(final_los.size() == art.seeds.size(), "missing cdr runs at rho 0.005");
    const double med_los = median(final_los);
    const double med_nlos = median(final_nlos);
    check(med_los > 0.8, "median final los tuning value " + fmt(med_los) + " <= 0.8");
    check(med_nlos < 0.2,
          "median final nlos tuning value " + fmt(med_nlos) + " >= 0.2");

    // pooled method: per-seed median over the final quarter of training
    std::vector<double> tdr_tails;
    for (const std::uint64_t seed : art.seeds) {
        const fs::path hist_path = fs::path(art.out_dir) /
                                   (run_basename(Method::tdr, 0.005, seed) +
                                    ".history.json");
        const RunHistory h = read_history(hist_path.string());
        std::vector<double> tail;
        for (const EpochRecord& rec : h.epochs) {
            if (rec.epoch <= 3 * art.epochs / 4) continue;
            check(!rec.lambda.empty(), "pooled run recorded no tuning value");
            tail.push_back(rec.lambda.front());
        }
        tdr_tails.push_back(median(tail));
    }
    const double med_tdr = median(tdr_tails);
    check(med_tdr < 0.2, "pooled tuning value still " + fmt(med_tdr) +
                             " over the final quarter of training");
    return "median final tuning values: los " + fmt(med_los) + " (> 0.8), nlos " +
           fmt(med_nlos) + " (< 0.2); pooled final-quarter median " + fmt(med_tdr) +
           " (< 0.2)";
}

// ---------------------------------------------------------------- criterion 8

bool march_occluded(const UrbanScene& scene, Vec2 a, Vec2 b) {
    const Vec2 d = b - a;
    const double len = std::sqrt(d.dot(d));
    const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.01)));
    for (int i = 1; i < steps; ++i) {
        const Vec2 p = a + d * (static_cast<double>(i) / steps);
        for (const Rect& building : scene.buildings)
            if (building.contains_interior(p)) return true;
    }
    return false;
}

std::string criterion_geometry() {
    const UrbanScene scene = default_urban_scene();
    Rng rng(88008);

    int checked = 0;
    while (checked < 1000) {
        const Vec2 p{rng.next_double(scene.bounds.xmin, scene.bounds.xmax),
                     rng.next_double(scene.bounds.ymin, scene.bounds.ymax)};
        bool inside = false;
        for (const Rect& building : scene.buildings)
            inside = inside || building.contains_interior(p);
        if (inside) continue;
        ++checked;
        const bool fast = los_check(scene, p);
        const bool slow = !march_occluded(scene, scene.bs, p);
        check(fast == slow, "visibility disagrees with the centimeter march at (" +
                                fmt(p.x) + ", " + fmt(p.y) + ")");
    }

    int valid = 0;
    double worst_angle = 0.0;
    std::vector<Vec2> devices;
    for (int i = 0; i < 400; ++i)
        devices.push_back({rng.next_double(scene.bounds.xmin, scene.bounds.xmax),
                           rng.next_double(scene.bounds.ymin, scene.bounds.ymax)});
    for (const Rect& building : scene.buildings) {
        for (const WallSegment& wall : rect_walls(building)) {
            const Vec2 u = wall.b - wall.a;
            for (const Vec2& device : devices) {
                const auto [ok, point] = reflection_point(scene.bs, device, wall);
                if (!ok) continue;
                ++valid;
                const Vec2 inc = point - scene.bs;
                const Vec2 ref = device - point;
                const double in_angle = std::atan2(std::abs(inc.cross(u)), inc.dot(u));
                const double out_angle = std::atan2(std::abs(ref.cross(u)), ref.dot(u));
                worst_angle = std::max(worst_angle, std::abs(in_angle - out_angle));
            }
        }
    }
    check(valid >= 1000, "only " + std::to_string(valid) + " feasible reflections");
    check(worst_angle < 1e-9,
          "specular identity violated by " + fmt(worst_angle) + " rad");
    return "1000 positions agree with the centimeter march; " + std::to_string(valid) +
           " reflections specular within " + fmt(worst_angle) + " rad";
}

// ---------------------------------------------------------------- criterion 9

void compare_dirs(const std::string& a, const std::string& b) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a))
        names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    check(!names.empty(), "no outputs under " + a);
    std::size_t other = 0;
    for ([[maybe_unused]] const auto& entry : fs::directory_iterator(b)) ++other;
    check(other == names.size(), "output sets differ between " + a + " and " + b);
    for (const std::string& name : names)
        check(file_bytes((fs::path(a) / name).string()) ==
                  file_bytes((fs::path(b) / name).string()),
              name + " differs between repeated runs");
}

std::string criterion_determinism() {
    const std::string toy_cfg_body = "scenario = toy\n"
                                     "methods = erm, cdr\n"
                                     "seeds = 1, 2\n"
                                     "toy.labeled = 12\n"
                                     "toy.unlabeled = 80\n"
                                     "toy.test = 60\n"
                                     "train.epochs = 2\n"
                                     "train.erm_epochs = 3\n"
                                     "train.minibatch = 16\n"
                                     "model.fourier_m = 4\n"
                                     "model.hidden = 16, 8\n";
    const std::string toy_a = scratch_dir("repeat_toy_a");
    const std::string toy_b = scratch_dir("repeat_toy_b");
    run_sweep(load_experiment_config(
        Config::from_string(toy_cfg_body + "out = " + toy_a + "\n", "<acceptance>")));
    run_sweep(load_experiment_config(
        Config::from_string(toy_cfg_body + "out = " + toy_b + "\n", "<acceptance>")));
    compare_dirs(toy_a, toy_b);

    const std::string urban_cfg_body = "scenario = urban\n"
                                       "urban.train = 400\n"
                                       "urban.test = 120\n"
                                       "rhos = 0.25\n"
                                       "seeds = 7\n"
                                       "train.epochs = 3\n"
                                       "train.minibatch = 32\n"
                                       "model.fourier_m = 4\n"
                                       "model.hidden = 12\n";
    const std::string urb_a = scratch_dir("repeat_urban_a");
    const std::string urb_b = scratch_dir("repeat_urban_b");
    const ExperimentConfig ua = load_experiment_config(
        Config::from_string(urban_cfg_body + "out = " + urb_a + "\n", "<acceptance>"));
    const ExperimentConfig ub = load_experiment_config(
        Config::from_string(urban_cfg_body + "out = " + urb_b + "\n", "<acceptance>"));
    const SweepRow ra =
        run_single(ua, build_urban_world(ua), Method::cdr, 0.25, 7, urb_a);
    const SweepRow rb =
        run_single(ub, build_urban_world(ub), Method::cdr, 0.25, 7, urb_b);
    check(ra.ok && rb.ok, "urban repeat runs failed: " + ra.message + rb.message);
    check(ra.test_loss == rb.test_loss, "urban test losses differ between reruns");
    compare_dirs(urb_a, urb_b);

    return "toy sweep (results, summary, histories, checkpoints) and urban run "
           "byte-identical across reruns";
}

// ------------------------------------------------------------------- runner

struct Criterion {
    int number;
    std::string name;
    std::function<std::string()> run;
    double budget_seconds; // 0: no budget of its own
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "analytic gradients match central differences", criterion_gradients, 10},
        {2, "tuned objective reproduces the doubly-robust baseline",
         criterion_dr_identity, 30},
        {3, "resampled objective is unbiased, pooled pseudo-labels are not",
         criterion_unbiasedness, 120},
        {4, "tuning estimator oracles", criterion_lambda_oracles, 10},
        {5, "toy per-context ordering", criterion_toy_ordering, 300},
        {6, "urban ordering across label budgets", criterion_urban_ordering, 1800},
        {7, "tuning trajectories separate los from nlos",
         criterion_lambda_trajectories, 0},
        {8, "geometry oracles", criterion_geometry, 30},
        {9, "byte-identical reruns", criterion_determinism, 0},
    };

    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = c.run();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        if (ok && c.budget_seconds > 0.0 && seconds > c.budget_seconds) {
            ok = false;
            detail += " (exceeded " + fmt(c.budget_seconds) + " s budget)";
        }
        if (!ok) ++failed;
        std::ostringstream line;
        line << (ok ? "PASS" : "FAIL") << " criterion " << c.number << ": " << c.name
             << " -- " << detail << " [" << fmt(seconds) << " s]";
        std::cout << line.str() << std::endl;
    }

    std::cout << (failed == 0 ? "acceptance: all 9 criteria passed"
                              : "acceptance: " + std::to_string(failed) +
                                    " of 9 criteria FAILED")
              << std::endl;
    return failed == 0 ? 0 : 1;
}
