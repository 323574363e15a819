#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "cdrlab/config.hpp"
#include "cdrlab/csv.hpp"
#include "cdrlab/dataset.hpp"
#include "cdrlab/dataset_io.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/model.hpp"
#include "cdrlab/objectives.hpp"
#include "cdrlab/rng.hpp"
#include "cdrlab/run_history.hpp"
#include "cdrlab/scenarios.hpp"
#include "cdrlab/trainer.hpp"
#include "cdrlab/tuning.hpp"

namespace cdrlab {

// Everything an experiment sweep needs, resolved from a flat config file.
// Scenario-dependent defaults are applied at load time so a saved config in
// the output directory fully describes the run.
struct ExperimentConfig {
    std::string scenario = "toy"; // toy | urban | imported
    std::vector<Method> methods = {Method::erm, Method::p_erm, Method::dr,
                                   Method::tdr, Method::cdr};
    std::vector<double> rhos;
    std::vector<std::uint64_t> seeds;

    int epochs = 100;
    int erm_epochs = 1000;
    double gamma = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t minibatch = 256;
    LambdaCadence cadence = LambdaCadence::per_epoch;
    bool curriculum = true; // applies to tdr/cdr only
    bool measure_time = false;

    int fourier_m = 20;
    double fourier_sigma = 20.0;
    std::vector<int> hidden = {128, 64};
    bool normalize = true;

    ToySpec toy;
    std::string urban_scene_file; // empty: built-in scene
    UrbanCounts urban;
    std::uint64_t data_seed = 424242;

    std::string imported_train;
    std::string imported_test;
    std::string imported_scene;

    std::string out_dir = "out";
    std::size_t workers = 1;
};

namespace detail {

inline void require_positive(double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError(key + ": must be positive");
}

inline void require_at_least(std::int64_t v, std::int64_t lo, const std::string& key) {
    if (v < lo)
        throw ConfigError(key + ": must be at least " + std::to_string(lo));
}

} // namespace detail

/// scenario_override pins the scenario regardless of config defaults (used
/// by the `toy` and `urban` subcommands); an explicit conflicting scenario
/// key in the config is an error rather than silently ignored.
inline ExperimentConfig load_experiment_config(const Config& c,
                                               const std::string& scenario_override = "") {
    ExperimentConfig e;

    e.scenario = c.get_string("scenario",
                              scenario_override.empty() ? "toy" : scenario_override);
    if (!scenario_override.empty() && e.scenario != scenario_override)
        throw ConfigError("scenario: config requests '" + e.scenario +
                          "' but this subcommand runs " + scenario_override);
    if (e.scenario != "toy" && e.scenario != "urban" && e.scenario != "imported")
        throw ConfigError("scenario: expected toy, urban, or imported, got '" +
                          e.scenario + "'");

    std::set<Method> methods;
    for (const auto& name :
         c.get_string_list("methods", {"erm", "p-erm", "dr", "tdr", "cdr"})) {
        try {
            methods.insert(parse_method(name));
        } catch (const Error&) {
            throw ConfigError("methods: unknown method '" + name + "'");
        }
    }
    e.methods.assign(methods.begin(), methods.end());

    const std::vector<double> default_rhos =
        e.scenario == "toy" ? std::vector<double>{1.0}
                            : std::vector<double>{0.005, 0.01, 0.02, 0.05, 0.1};
    e.rhos = c.get_double_list("rhos", default_rhos);
    for (double r : e.rhos)
        if (!(r > 0.0) || r > 1.0)
            throw ConfigError("rhos: values must lie in (0,1], got " +
                              format_double(r));
    if (std::set<double>(e.rhos.begin(), e.rhos.end()).size() != e.rhos.size())
        throw ConfigError("rhos: duplicate values");

    std::vector<std::uint64_t> default_seeds;
    for (std::uint64_t s = 1; s <= 10; ++s) default_seeds.push_back(s);
    e.seeds = c.get_u64_list("seeds", default_seeds);
    if (std::set<std::uint64_t>(e.seeds.begin(), e.seeds.end()).size() != e.seeds.size())
        throw ConfigError("seeds: duplicate values");

    e.epochs = static_cast<int>(c.get_int("train.epochs", 100));
    detail::require_at_least(e.epochs, 1, "train.epochs");
    e.erm_epochs = static_cast<int>(c.get_int("train.erm_epochs", 1000));
    detail::require_at_least(e.erm_epochs, 1, "train.erm_epochs");
    e.gamma = c.get_double("train.gamma", 5e-4);
    detail::require_positive(e.gamma, "train.gamma");
    e.beta1 = c.get_double("train.beta1", 0.9);
    e.beta2 = c.get_double("train.beta2", 0.999);
    if (!(e.beta1 > 0.0 && e.beta1 < 1.0) || !(e.beta2 > 0.0 && e.beta2 < 1.0))
        throw ConfigError("train.beta1/train.beta2: must lie in (0,1)");
    e.eps = c.get_double("train.eps", 1e-8);
    detail::require_positive(e.eps, "train.eps");
    const auto mb = c.get_int("train.minibatch", 256);
    detail::require_at_least(mb, 0, "train.minibatch");
    e.minibatch = static_cast<std::size_t>(mb);
    const std::string cadence = c.get_string("train.lambda_cadence", "epoch");
    if (cadence == "epoch") e.cadence = LambdaCadence::per_epoch;
    else if (cadence == "step") e.cadence = LambdaCadence::per_step;
    else throw ConfigError("train.lambda_cadence: expected epoch or step, got '" +
                           cadence + "'");
    e.curriculum = c.get_bool("train.curriculum", true);
    e.measure_time = c.get_bool("train.measure_time", false);

    const bool toy_scenario = e.scenario == "toy";
    e.fourier_m = static_cast<int>(c.get_int("model.fourier_m", toy_scenario ? 8 : 20));
    detail::require_at_least(e.fourier_m, 1, "model.fourier_m");
    e.fourier_sigma = c.get_double("model.fourier_sigma", toy_scenario ? 6.0 : 20.0);
    detail::require_positive(e.fourier_sigma, "model.fourier_sigma");
    e.hidden = c.get_int_list("model.hidden", toy_scenario ? std::vector<int>{64, 32}
                                                           : std::vector<int>{128, 64});
    for (int h : e.hidden) detail::require_at_least(h, 1, "model.hidden");
    e.normalize = c.get_bool("model.normalize", true);

    if (toy_scenario) {
        e.toy.labeled = static_cast<std::size_t>(c.get_int("toy.labeled", 40));
        e.toy.unlabeled = static_cast<std::size_t>(c.get_int("toy.unlabeled", 2000));
        e.toy.test = static_cast<std::size_t>(c.get_int("toy.test", 2000));
        detail::require_at_least(static_cast<std::int64_t>(e.toy.test), 1, "toy.test");
        e.toy.boundary = c.get_double("toy.boundary", e.toy.boundary);
        e.toy.target = c.get_string("toy.target", e.toy.target);
        if (e.toy.target != "sine" && e.toy.target != "ramp")
            throw ConfigError("toy.target: expected sine or ramp, got '" +
                              e.toy.target + "'");
        e.toy.corruption = c.get_double("toy.corruption", e.toy.corruption);
        e.toy.noise = c.get_double("toy.noise", e.toy.noise);
        if (e.toy.noise < 0.0) throw ConfigError("toy.noise: must be nonnegative");
        e.data_seed = static_cast<std::uint64_t>(c.get_int("data.seed", 424242));
    } else if (e.scenario == "urban") {
        e.urban_scene_file = c.get_string("urban.scene", "");
        e.urban.train = static_cast<std::size_t>(c.get_int("urban.train", 30000));
        e.urban.test = static_cast<std::size_t>(c.get_int("urban.test", 5975));
        detail::require_at_least(static_cast<std::int64_t>(e.urban.train), 1, "urban.train");
        detail::require_at_least(static_cast<std::int64_t>(e.urban.test), 1, "urban.test");
        e.data_seed = static_cast<std::uint64_t>(c.get_int("data.seed", 424242));
    } else {
        e.imported_train = c.get_string("imported.train", "");
        e.imported_test = c.get_string("imported.test", "");
        e.imported_scene = c.get_string("imported.scene", "");
        if (e.imported_train.empty())
            throw ConfigError("imported.train: required for scenario imported");
        if (e.imported_test.empty())
            throw ConfigError("imported.test: required for scenario imported");
        if (e.imported_scene.empty())
            throw ConfigError("imported.scene: required for scenario imported "
                              "(the teacher is derived from the scene)");
    }

    e.out_dir = c.get_string("out", "out");
    const auto workers = c.get_int("workers", 1);
    detail::require_at_least(workers, 1, "workers");
    e.workers = static_cast<std::size_t>(workers);

    c.reject_unknown_keys();
    return e;
}

// A scenario instantiated as data plus teacher. Pre-split worlds (toy,
// imported files that already carry unlabeled rows) fix the labeled set
// themselves; otherwise run_single splits `train` by rho.
struct World {
    std::string scenario;
    int contexts = 0;
    bool pre_split = false;
    StratifiedDataset train{1, 0, 0};
    StratifiedDataset labeled{1, 0, 0};
    StratifiedDataset unlabeled{1, 0, 0};
    StratifiedDataset test{1, 0, 0};
    Teacher teacher;
    std::optional<UrbanScene> scene;
};

inline std::uint64_t toy_data_seed(std::uint64_t data_seed, std::uint64_t run_seed) {
    return Rng::splitmix(data_seed ^ Rng::splitmix(run_seed));
}

inline std::uint64_t split_seed(std::uint64_t run_seed, double rho) {
    const auto scaled = static_cast<std::uint64_t>(std::llround(rho * 1e9));
    return Rng::splitmix(run_seed ^ Rng::splitmix(scaled + 0x5EEDULL));
}

/// Toy data is regenerated per run seed so that seeds vary both the data
/// draw and the parameter initialization.
inline World build_toy_world(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    ToyWorld tw = toy_generate(cfg.toy, toy_data_seed(cfg.data_seed, run_seed));
    World w;
    w.scenario = "toy";
    w.contexts = tw.test.contexts();
    w.pre_split = true;
    w.labeled = std::move(tw.labeled);
    w.unlabeled = std::move(tw.unlabeled);
    w.test = std::move(tw.test);
    w.teacher = std::move(tw.teacher);
    return w;
}

inline World build_urban_world(const ExperimentConfig& cfg) {
    const UrbanScene scene = cfg.urban_scene_file.empty()
                                 ? default_urban_scene()
                                 : read_scene_file(cfg.urban_scene_file);
    UrbanWorld uw = urban_generate(scene, cfg.urban, cfg.data_seed);
    World w;
    w.scenario = "urban";
    w.contexts = uw.train.contexts();
    w.train = std::move(uw.train);
    w.test = std::move(uw.test);
    w.teacher = std::move(uw.teacher);
    w.scene = scene;
    return w;
}

inline World build_imported_world(const ExperimentConfig& cfg) {
    StratifiedDataset train = read_dataset_csv(cfg.imported_train);
    StratifiedDataset test = read_dataset_csv(cfg.imported_test, train.contexts());
    if (test.labeled_count() != test.size())
        throw Error("imported test set has unlabeled rows: " + cfg.imported_test);
    const UrbanScene scene = read_scene_file(cfg.imported_scene);

    World w;
    w.scenario = "imported";
    w.contexts = train.contexts();
    w.teacher = make_urban_teacher(scene);
    w.scene = scene;
    w.test = std::move(test);

    // A file that already contains unlabeled rows defines its own split and
    // the rho grid is ignored for it.
    if (train.labeled_count() < train.size()) {
        w.pre_split = true;
        StratifiedDataset lab(train.contexts(), train.dim(), train.label_dim());
        StratifiedDataset unl(train.contexts(), train.dim(), train.label_dim());
        for (const Sample& s : train.samples())
            (s.labeled() ? lab : unl).add(s);
        w.labeled = std::move(lab);
        w.unlabeled = std::move(unl);
    } else {
        w.train = std::move(train);
    }
    return w;
}

inline MlpDescriptor resolve_model(const ExperimentConfig& cfg, const World& world) {
    const StratifiedDataset& ref = world.pre_split ? world.labeled : world.train;
    MlpDescriptor d;
    d.input_dim = static_cast<int>(ref.dim());
    d.output_dim = static_cast<int>(ref.label_dim());
    d.fourier_m = cfg.fourier_m;
    d.fourier_sigma = cfg.fourier_sigma;
    d.hidden = cfg.hidden;
    if (cfg.normalize) {
        if (world.scene) {
            d.input_lo = {world.scene->bounds.xmin, world.scene->bounds.ymin};
            d.input_hi = {world.scene->bounds.xmax, world.scene->bounds.ymax};
        } else if (world.scenario == "toy") {
            d.input_lo = {-1.0};
            d.input_hi = {1.0};
        } else {
            // Per-dimension data range of the training covariates.
            d.input_lo.assign(ref.dim(), 0.0);
            d.input_hi.assign(ref.dim(), 1.0);
            bool first = true;
            for (const StratifiedDataset* ds :
                 {&world.train, &world.labeled, &world.unlabeled})
                for (const Sample& s : ds->samples()) {
                    for (std::size_t i = 0; i < s.x.size(); ++i) {
                        if (first || s.x[i] < d.input_lo[i]) d.input_lo[i] = s.x[i];
                        if (first || s.x[i] > d.input_hi[i]) d.input_hi[i] = s.x[i];
                    }
                    first = false;
                }
        }
    }
    return d;
}

struct SweepRow {
    Method method = Method::erm;
    double rho = 1.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string message;
    double test_loss = 0.0;
    std::vector<double> context_loss;
    std::vector<double> final_lambda; // empty for erm/p-erm
    double wall_ms = 0.0;
    std::string history_file;
};

struct SweepResult {
    int contexts = 0;
    std::vector<SweepRow> rows;
};

inline std::string run_basename(Method method, double rho, std::uint64_t seed) {
    return std::string(method_name(method)) + "_rho" + format_double(rho) +
           "_seed" + format_u64(seed);
}

inline SweepRow run_single(const ExperimentConfig& cfg, const World& world,
                           Method method, double rho, std::uint64_t seed,
                           const std::string& out_dir) {
    SweepRow row;
    row.method = method;
    row.rho = rho;
    row.seed = seed;
    try {
        StratifiedDataset labeled{1, 0, 0};
        StratifiedDataset unlabeled{1, 0, 0};
        if (world.pre_split) {
            labeled = world.labeled;
            unlabeled = world.unlabeled;
        } else {
            LabeledSplit split =
                split_labeled_unlabeled(world.train, rho, split_seed(seed, rho));
            labeled = std::move(split.labeled);
            unlabeled = std::move(split.unlabeled);
        }

        const FourierMlp model(resolve_model(cfg, world));

        TrainConfig tc;
        tc.objective.kind = method;
        tc.objective.tuning = TuningMode::estimated;
        tc.objective.curriculum =
            cfg.curriculum && (method == Method::cdr || method == Method::tdr);
        tc.epochs = method == Method::erm ? cfg.erm_epochs : cfg.epochs;
        tc.gamma = cfg.gamma;
        tc.beta1 = cfg.beta1;
        tc.beta2 = cfg.beta2;
        tc.eps = cfg.eps;
        tc.seed = seed;
        tc.minibatch = cfg.minibatch;
        tc.cadence = cfg.cadence;
        tc.measure_time = cfg.measure_time;

        RunHistory hist = train(model, tc, labeled, unlabeled, world.teacher, world.test);
        hist.scenario = world.scenario;
        hist.rho = rho;

        const std::string base = run_basename(method, rho, seed);
        hist.checkpoint = base + ".ckpt";
        if (world.scene) hist.scene_file = "scene.txt";

        const std::filesystem::path dir(out_dir);
        model.save_checkpoint((dir / hist.checkpoint).string(), hist.final_theta);
        row.history_file = base + ".history.json";
        write_history((dir / row.history_file).string(), hist);

        row.ok = true;
        row.test_loss = hist.test_loss;
        row.context_loss = hist.context_test_loss;
        row.final_lambda = hist.final_lambda;
        for (const EpochRecord& rec : hist.epochs) row.wall_ms += rec.wall_ms;
    } catch (const std::exception& e) {
        row.ok = false;
        row.message = e.what();
    }
    return row;
}

/// Type-7 quantile (linear interpolation of order statistics) on sorted values.
inline double quantile_type7(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error("quantile of empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline void write_results_csv(const std::string& path, const SweepResult& result) {
    CsvWriter w(path);
    std::vector<std::string> header{"method", "rho",       "seed",   "status",
                                    "message", "test_loss", "wall_ms"};
    for (int c = 0; c < result.contexts; ++c)
        header.push_back("loss_c" + std::to_string(c));
    for (int c = 0; c < result.contexts; ++c)
        header.push_back("lambda_c" + std::to_string(c));
    header.push_back("history");
    w.row(header);

    for (const SweepRow& r : result.rows) {
        std::vector<std::string> cells{method_name(r.method), format_double(r.rho),
                                       format_u64(r.seed), r.ok ? "ok" : "failed",
                                       r.ok ? "" : r.message};
        if (r.ok) {
            cells.push_back(format_double(r.test_loss));
            cells.push_back(format_double(r.wall_ms));
            for (int c = 0; c < result.contexts; ++c)
                cells.push_back(static_cast<std::size_t>(c) < r.context_loss.size()
                                    ? format_double(r.context_loss[static_cast<std::size_t>(c)])
                                    : "");
            for (int c = 0; c < result.contexts; ++c)
                cells.push_back(static_cast<std::size_t>(c) < r.final_lambda.size()
                                    ? format_double(r.final_lambda[static_cast<std::size_t>(c)])
                                    : "");
        } else {
            cells.insert(cells.end(),
                         static_cast<std::size_t>(2 + 2 * result.contexts), "");
        }
        cells.push_back(r.history_file);
        w.row(cells);
    }
}

inline void write_summary_csv(const std::string& path, const ExperimentConfig& cfg,
                              const SweepResult& result) {
    CsvWriter w(path);
    w.row({"method", "rho", "runs", "failed", "test_loss_median", "test_loss_q1",
           "test_loss_q3"});
    for (Method m : cfg.methods) {
        for (double rho : cfg.rhos) {
            std::vector<double> losses;
            std::size_t runs = 0, failed = 0;
            for (const SweepRow& r : result.rows) {
                if (r.method != m || r.rho != rho) continue;
                ++runs;
                if (r.ok) losses.push_back(r.test_loss);
                else ++failed;
            }
            if (runs == 0) continue;
            std::sort(losses.begin(), losses.end());
            std::vector<std::string> cells{method_name(m), format_double(rho),
                                           format_u64(runs), format_u64(failed)};
            if (losses.empty()) {
                cells.insert(cells.end(), 3, "");
            } else {
                cells.push_back(format_double(quantile_type7(losses, 0.5)));
                cells.push_back(format_double(quantile_type7(losses, 0.25)));
                cells.push_back(format_double(quantile_type7(losses, 0.75)));
            }
            w.row(cells);
        }
    }
}

/// Runs the full (method, rho, seed) grid. Failures become failed rows; the
/// sweep itself only throws on setup problems (invalid config, unreadable
/// inputs, unwritable output directory).
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);

    // Worlds are immutable once built and shared across worker threads.
    std::map<std::uint64_t, World> toy_worlds;
    World shared_world;
    if (cfg.scenario == "toy") {
        for (std::uint64_t s : cfg.seeds) toy_worlds.emplace(s, build_toy_world(cfg, s));
    } else if (cfg.scenario == "urban") {
        shared_world = build_urban_world(cfg);
    } else {
        shared_world = build_imported_world(cfg);
    }
    if (shared_world.scene)
        write_scene_file((std::filesystem::path(cfg.out_dir) / "scene.txt").string(),
                         *shared_world.scene);

    struct Job {
        Method method;
        double rho;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (Method m : cfg.methods)
        for (double rho : cfg.rhos)
            for (std::uint64_t s : cfg.seeds) jobs.push_back({m, rho, s});

    SweepResult result;
    result.contexts = cfg.scenario == "toy" ? toy_worlds.begin()->second.contexts
                                            : shared_world.contexts;
    result.rows.resize(jobs.size());

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex log_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];
            const World& world = cfg.scenario == "toy" ? toy_worlds.at(job.seed)
                                                       : shared_world;
            result.rows[i] =
                run_single(cfg, world, job.method, job.rho, job.seed, cfg.out_dir);
            const SweepRow& row = result.rows[i];
            const std::size_t finished = done.fetch_add(1) + 1;
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cerr << "[" << finished << "/" << jobs.size() << "] "
                      << method_name(job.method) << " rho=" << format_double(job.rho)
                      << " seed=" << job.seed << ": "
                      << (row.ok ? "ok (test loss " + format_double(row.test_loss) + ")"
                                 : "failed (" + row.message + ")")
                      << "\n";
        }
    };

    const std::size_t threads = std::max<std::size_t>(
        1, std::min(cfg.workers, jobs.size()));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    const std::filesystem::path dir(cfg.out_dir);
    write_results_csv((dir / "results.csv").string(), result);
    write_summary_csv((dir / "summary.csv").string(), cfg, result);
    return result;
}

/// Long-format tuning traces from saved histories. Context-specific methods
/// produce one series per context; scalar methods (tdr, dr) use context -1.
/// Every distinct (seed, n, N) also contributes the constant N/(n+N)
/// reference series under the method name "dr-reference".
inline void export_lambda_traces(const std::vector<std::string>& history_paths,
                                 const std::string& out_csv) {
    if (history_paths.empty()) throw Error("no history files given");
    CsvWriter w(out_csv);
    w.row({"method", "seed", "epoch", "context", "lambda"});
    std::set<std::tuple<std::uint64_t, std::size_t, std::size_t>> reference_done;
    for (const std::string& path : history_paths) {
        const RunHistory h = read_history(path);
        if (h.method != "dr" && h.method != "tdr" && h.method != "cdr")
            throw Error("lambda traces require a tuned method (dr, tdr, cdr); '" +
                        path + "' is a " + h.method + " run");
        const bool per_context = h.method == "cdr";
        for (const EpochRecord& rec : h.epochs) {
            if (rec.lambda.empty())
                throw FileError("epoch record without lambda in " + path);
            if (per_context) {
                for (std::size_t c = 0; c < rec.lambda.size(); ++c)
                    w.row({h.method, format_u64(h.seed), format_u64(rec.epoch),
                           std::to_string(c), format_double(rec.lambda[c])});
            } else {
                w.row({h.method, format_u64(h.seed), format_u64(rec.epoch), "-1",
                       format_double(rec.lambda.front())});
            }
        }
        const auto key = std::make_tuple(h.seed, h.labeled_count, h.unlabeled_count);
        if (h.unlabeled_count > 0 && reference_done.insert(key).second) {
            const double ref = dr_equivalent_lambda(h.labeled_count, h.unlabeled_count);
            for (const EpochRecord& rec : h.epochs)
                w.row({"dr-reference", format_u64(h.seed), format_u64(rec.epoch),
                       "-1", format_double(ref)});
        }
    }
}

/// Evaluates a saved checkpoint on the scene grid and writes x,y,loss rows.
/// Building cells keep their coordinates but leave the loss cell empty.
inline void export_loss_map(const std::string& history_path,
                            const std::string& out_csv, std::size_t nx = 200,
                            std::size_t ny = 200) {
    const RunHistory h = read_history(history_path);
    if (h.scene_file.empty() || h.checkpoint.empty())
        throw Error("loss map requires a run with a saved scene and checkpoint; '" +
                    history_path + "' is a " + h.scenario + " run");
    const std::filesystem::path dir =
        std::filesystem::path(history_path).parent_path();
    auto [desc, theta] = FourierMlp::load_checkpoint((dir / h.checkpoint).string());
    const FourierMlp model(desc);
    const UrbanScene scene = read_scene_file((dir / h.scene_file).string());

    GridSpec grid = full_scene_grid(scene, nx, ny);
    const std::vector<LossMapCell> cells = loss_map(model, theta, scene, grid);

    CsvWriter w(out_csv);
    w.row({"x", "y", "loss"});
    for (const LossMapCell& cell : cells)
        w.row({format_double(cell.x), format_double(cell.y),
               cell.free_space ? format_double(cell.loss) : ""});
}

} // namespace cdrlab
