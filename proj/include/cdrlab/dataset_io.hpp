#pragma once

#include <string>
#include <vector>

#include "cdrlab/csv.hpp"
#include "cdrlab/dataset.hpp"

namespace cdrlab {

// Delimited-text dataset exchange format. One row per sample, header row
// mandatory:
//
//   x_1,...,x_d,context,labeled_flag,y_1,...,y_m
//
// Unlabeled rows leave every y cell empty. Masked labels are intentionally
// not exported: an exported unlabeled sample is unlabeled, full stop.

inline void write_dataset_csv(const std::string& path, const StratifiedDataset& ds) {
    CsvWriter w(path);
    std::vector<std::string> header;
    for (std::size_t i = 1; i <= ds.dim(); ++i) header.push_back("x_" + std::to_string(i));
    header.push_back("context");
    header.push_back("labeled_flag");
    for (std::size_t i = 1; i <= ds.label_dim(); ++i) header.push_back("y_" + std::to_string(i));
    w.row(header);

    std::vector<std::string> cells;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Sample& s = ds.sample(i);
        cells.clear();
        for (double v : s.x) cells.push_back(format_double(v));
        cells.push_back(std::to_string(s.context));
        cells.push_back(s.labeled() ? "1" : "0");
        for (std::size_t j = 0; j < ds.label_dim(); ++j)
            cells.push_back(s.y ? format_double((*s.y)[j]) : std::string());
        w.row(cells);
    }
}

inline StratifiedDataset read_dataset_csv(const std::string& path, int contexts = -1) {
    const auto rows = read_csv(path);
    if (rows.empty()) throw FileError("dataset file has no header: " + path);

    const auto& header = rows.front();
    std::size_t dim = 0, label_dim = 0;
    std::size_t context_col = header.size(), flag_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h.rfind("x_", 0) == 0) ++dim;
        else if (h == "context") context_col = i;
        else if (h == "labeled_flag") flag_col = i;
        else if (h.rfind("y_", 0) == 0) ++label_dim;
        else throw FileError("unexpected dataset column '" + h + "' in " + path);
    }
    if (context_col != dim || flag_col != dim + 1)
        throw FileError("dataset header must be x_1..x_d,context,labeled_flag,y_1..y_m: " + path);

    std::vector<Sample> samples;
    int max_context = -1;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.size() != header.size())
            throw FileError("row " + std::to_string(r) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()) + ": " + path);
        Sample s;
        s.x.reserve(dim);
        for (std::size_t i = 0; i < dim; ++i) s.x.push_back(parse_double(cells[i]));
        s.context = static_cast<int>(parse_int(cells[context_col]));
        max_context = std::max(max_context, s.context);
        const bool labeled = parse_int(cells[flag_col]) != 0;
        if (labeled) {
            Label y;
            y.reserve(label_dim);
            for (std::size_t i = 0; i < label_dim; ++i)
                y.push_back(parse_double(cells[dim + 2 + i]));
            s.y = std::move(y);
        }
        samples.push_back(std::move(s));
    }
    const int k = contexts > 0 ? contexts : max_context + 1;
    return partition_by_context(std::move(samples), std::max(k, 1));
}

} // namespace cdrlab
