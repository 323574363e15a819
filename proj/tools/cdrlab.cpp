#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cdrlab/experiment.hpp>

namespace {

struct SweepFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& f) {
    cmd->add_option("--config", f.config, "configuration file (dotted keys)");
    cmd->add_option("--seed", f.seed, "run only this seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--workers", f.workers, "concurrent training runs");
}

/// Precedence for the output directory: --out flag, then CDRLAB_OUT, then
/// the config value (default "out").
void apply_sweep_flags(cdrlab::ExperimentConfig& cfg, const SweepFlags& f) {
    if (f.seed) cfg.seeds = {*f.seed};
    if (const char* env = std::getenv("CDRLAB_OUT"); env && *env) cfg.out_dir = env;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.workers) cfg.workers = *f.workers;
}

/// Single-file exporters land their default output inside CDRLAB_OUT when it
/// is set; an explicit --out path is used verbatim.
std::string default_out_file(const std::string& name) {
    if (const char* env = std::getenv("CDRLAB_OUT"); env && *env) {
        std::filesystem::create_directories(env);
        return (std::filesystem::path(env) / name).string();
    }
    return name;
}

int run_sweep_command(const SweepFlags& f, const std::string& forced_scenario) {
    const cdrlab::Config raw = f.config.empty() ? cdrlab::Config()
                                                : cdrlab::Config::from_file(f.config);
    cdrlab::ExperimentConfig cfg = cdrlab::load_experiment_config(raw, forced_scenario);
    apply_sweep_flags(cfg, f);

    const cdrlab::SweepResult result = cdrlab::run_sweep(cfg);
    std::size_t ok = 0;
    for (const auto& row : result.rows) ok += row.ok ? 1 : 0;
    std::cout << ok << "/" << result.rows.size() << " runs ok; artifacts in "
              << cfg.out_dir << "\n";
    return ok == result.rows.size() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-supervised training lab: context-aware doubly robust "
                 "objectives on synthetic scenarios"};
    app.require_subcommand(1);
    int exit_code = 0;

    SweepFlags toy_flags;
    auto* toy = app.add_subcommand("toy", "run the 1D regression comparison");
    add_sweep_flags(toy, toy_flags);
    toy->callback([&] { exit_code = run_sweep_command(toy_flags, "toy"); });

    SweepFlags urban_flags;
    auto* urban = app.add_subcommand("urban", "run the beamforming comparison");
    add_sweep_flags(urban, urban_flags);
    urban->callback([&] { exit_code = run_sweep_command(urban_flags, "urban"); });

    SweepFlags sweep_flags;
    auto* sweep = app.add_subcommand(
        "sweep", "run the (method, rho, seed) grid from a config file");
    add_sweep_flags(sweep, sweep_flags);
    sweep->callback([&] { exit_code = run_sweep_command(sweep_flags, ""); });

    std::string map_history, map_out;
    std::size_t map_nx = 200, map_ny = 200;
    auto* map = app.add_subcommand("loss-map",
                                   "evaluate a saved run on its scene grid");
    map->add_option("history", map_history, "run history JSON file")->required();
    map->add_option("--out", map_out, "output CSV path");
    map->add_option("--nx", map_nx, "grid columns");
    map->add_option("--ny", map_ny, "grid rows");
    map->callback([&] {
        const std::string out =
            map_out.empty() ? default_out_file("loss_map.csv") : map_out;
        cdrlab::export_loss_map(map_history, out, map_nx, map_ny);
        std::cout << "wrote " << out << "\n";
    });

    std::vector<std::string> trace_histories;
    std::string trace_out;
    auto* traces = app.add_subcommand("lambda-traces",
                                      "export per-epoch tuning values");
    traces->add_option("histories", trace_histories, "run history JSON files")
        ->required();
    traces->add_option("--out", trace_out, "output CSV path");
    traces->callback([&] {
        const std::string out =
            trace_out.empty() ? default_out_file("lambda_traces.csv") : trace_out;
        cdrlab::export_lambda_traces(trace_histories, out);
        std::cout << "wrote " << out << "\n";
    });

    std::uint64_t scene_seed = 0;
    std::string scene_out;
    auto* gen = app.add_subcommand("gen-scene", "generate a random urban scene");
    gen->add_option("--seed", scene_seed, "scene seed");
    gen->add_option("--out", scene_out, "output scene path");
    gen->callback([&] {
        const std::string out =
            scene_out.empty() ? default_out_file("scene.txt") : scene_out;
        cdrlab::write_scene_file(out, cdrlab::random_urban_scene(scene_seed));
        std::cout << "wrote " << out << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
