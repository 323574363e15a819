#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdrlab/errors.hpp"
#include "cdrlab/model.hpp"

namespace cdrlab {

struct EpochRecord {
    int epoch = 0; // 1-based
    double objective_value = 0.0;
    double alpha = 1.0;
    std::vector<double> lambda; // empty for methods without a tuning vector
    std::int64_t wall_ms = 0;   // 0 unless timing was requested (see trainer)
};

// Complete record of one training run. The parameter vector itself is not
// serialized here; it goes to a separate checkpoint file whose relative
// name is recorded in `checkpoint`.
struct RunHistory {
    std::string method;
    std::string scenario; // toy | urban | imported
    double rho = 1.0;
    std::uint64_t seed = 0;
    int contexts = 0;
    std::size_t labeled_count = 0;
    std::size_t unlabeled_count = 0;
    std::string checkpoint;  // relative to the history file's directory
    std::string scene_file;  // relative; empty for non-urban runs

    std::vector<EpochRecord> epochs;

    double test_loss = 0.0;
    std::vector<double> context_test_loss;
    std::vector<std::size_t> context_test_count;
    std::vector<double> final_lambda;

    Params final_theta; // in-memory only
};

inline void write_history(const std::string& path, const RunHistory& h) {
    nlohmann::json j;
    j["format"] = "cdrlab-history v1";
    j["method"] = h.method;
    j["scenario"] = h.scenario;
    j["rho"] = h.rho;
    j["seed"] = h.seed;
    j["contexts"] = h.contexts;
    j["labeled_count"] = h.labeled_count;
    j["unlabeled_count"] = h.unlabeled_count;
    j["checkpoint"] = h.checkpoint;
    j["scene_file"] = h.scene_file;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : h.epochs) {
        nlohmann::json row;
        row["epoch"] = e.epoch;
        row["objective_value"] = e.objective_value;
        row["alpha"] = e.alpha;
        row["lambda"] = e.lambda;
        row["wall_ms"] = e.wall_ms;
        j["epochs"].push_back(std::move(row));
    }
    j["final"] = {{"test_loss", h.test_loss},
                  {"context_test_loss", h.context_test_loss},
                  {"context_test_count", h.context_test_count},
                  {"final_lambda", h.final_lambda}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write history file: " + path);
    out << j.dump(2) << "\n";
}

inline RunHistory read_history(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot read history file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FileError("malformed history file " + path + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "cdrlab-history v1")
            throw FileError("unknown history format in " + path);
        RunHistory h;
        h.method = j.at("method").get<std::string>();
        h.scenario = j.at("scenario").get<std::string>();
        h.rho = j.at("rho").get<double>();
        h.seed = j.at("seed").get<std::uint64_t>();
        h.contexts = j.at("contexts").get<int>();
        h.labeled_count = j.at("labeled_count").get<std::size_t>();
        h.unlabeled_count = j.at("unlabeled_count").get<std::size_t>();
        h.checkpoint = j.at("checkpoint").get<std::string>();
        h.scene_file = j.at("scene_file").get<std::string>();
        for (const auto& row : j.at("epochs")) {
            EpochRecord e;
            e.epoch = row.at("epoch").get<int>();
            e.objective_value = row.at("objective_value").get<double>();
            e.alpha = row.at("alpha").get<double>();
            e.lambda = row.at("lambda").get<std::vector<double>>();
            e.wall_ms = row.at("wall_ms").get<std::int64_t>();
            h.epochs.push_back(std::move(e));
        }
        const auto& fin = j.at("final");
        h.test_loss = fin.at("test_loss").get<double>();
        h.context_test_loss = fin.at("context_test_loss").get<std::vector<double>>();
        h.context_test_count =
            fin.at("context_test_count").get<std::vector<std::size_t>>();
        h.final_lambda = fin.at("final_lambda").get<std::vector<double>>();
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw FileError("history file " + path + " misses fields: " + e.what());
    }
}

} // namespace cdrlab
