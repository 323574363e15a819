#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdrlab/errors.hpp"
#include "cdrlab/rng.hpp"

namespace cdrlab {

using Covariate = std::vector<double>;
using Label = std::vector<double>;

/// Deterministic map from covariate to pseudo-label. Must be a pure
/// function: repeated evaluation on the same x yields the same label.
using Teacher = std::function<Label(const Covariate&)>;

struct Sample {
    Covariate x;
    int context = 0;
    std::optional<Label> y;        // visible label; absent for unlabeled rows
    std::optional<Label> y_masked; // ground truth retained by synthetic splits,
                                   // never exported, diagnostics only

    bool labeled() const { return y.has_value(); }
};

// Samples bucketed by a discrete context id in [0, K). Insertion order is
// preserved both globally and per context; instances are immutable once
// built and safe to share across threads.
class StratifiedDataset {
public:
    StratifiedDataset() = default;

    StratifiedDataset(int contexts, std::size_t dim, std::size_t label_dim)
        : contexts_(contexts), dim_(dim), label_dim_(label_dim),
          by_context_(static_cast<std::size_t>(contexts)) {}

    int contexts() const { return contexts_; }
    std::size_t dim() const { return dim_; }
    std::size_t label_dim() const { return label_dim_; }

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

    std::size_t count(int context) const {
        return by_context_.at(static_cast<std::size_t>(context)).size();
    }

    std::size_t labeled_count() const {
        std::size_t n = 0;
        for (const auto& s : samples_) n += s.labeled() ? 1 : 0;
        return n;
    }

    const Sample& sample(std::size_t i) const { return samples_[i]; }
    const std::vector<Sample>& samples() const { return samples_; }

    /// Indices (into samples()) of the samples in one context, in insertion order.
    const std::vector<std::size_t>& context_indices(int context) const {
        return by_context_.at(static_cast<std::size_t>(context));
    }

    void add(Sample s) {
        if (s.context < 0 || s.context >= contexts_)
            throw InvalidContextError(
                "sample " + std::to_string(samples_.size()) + " has context " +
                std::to_string(s.context) + ", expected 0.." +
                std::to_string(contexts_ - 1));
        if (dim_ != 0 && s.x.size() != dim_)
            throw Error("sample dimension mismatch: got " +
                        std::to_string(s.x.size()) + ", dataset has " +
                        std::to_string(dim_));
        by_context_[static_cast<std::size_t>(s.context)].push_back(samples_.size());
        samples_.push_back(std::move(s));
    }

    /// Flattened copy in insertion order (inverse of partition_by_context).
    std::vector<Sample> merged() const { return samples_; }

private:
    int contexts_ = 0;
    std::size_t dim_ = 0;
    std::size_t label_dim_ = 0;
    std::vector<Sample> samples_;
    std::vector<std::vector<std::size_t>> by_context_;
};

/// Bucket a flat sample list by context id. Throws InvalidContextError
/// naming the first offending sample if any context id is outside [0, K).
inline StratifiedDataset partition_by_context(std::vector<Sample> samples, int contexts) {
    std::size_t dim = samples.empty() ? 0 : samples.front().x.size();
    std::size_t label_dim = 0;
    for (const auto& s : samples)
        if (s.y) { label_dim = s.y->size(); break; }
    StratifiedDataset ds(contexts, dim, label_dim);
    for (auto& s : samples) ds.add(std::move(s));
    return ds;
}

struct LabeledSplit {
    StratifiedDataset labeled;
    StratifiedDataset unlabeled;
};

// Pooled random split: ceil(rho * size) samples keep their labels, the rest
// have labels moved to y_masked. Selection is uniform without replacement
// and fully determined by the seed; per-context labeled counts are whatever
// the draw produces, including zero.
inline LabeledSplit split_labeled_unlabeled(const StratifiedDataset& ds,
                                            double rho, std::uint64_t seed) {
    if (!(rho >= 0.0 && rho <= 1.0))
        throw Error("labeled ratio must lie in [0,1], got " + std::to_string(rho));
    const std::size_t total = ds.size();
    const auto n = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(total)));

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<bool> keep(total, false);
    for (std::size_t i = 0; i < n && i < total; ++i) keep[order[i]] = true;

    LabeledSplit out{
        StratifiedDataset(ds.contexts(), ds.dim(), ds.label_dim()),
        StratifiedDataset(ds.contexts(), ds.dim(), ds.label_dim())};
    for (std::size_t i = 0; i < total; ++i) {
        Sample s = ds.sample(i);
        if (keep[i]) {
            out.labeled.add(std::move(s));
        } else {
            if (s.y) {
                s.y_masked = std::move(s.y);
                s.y.reset();
            }
            out.unlabeled.add(std::move(s));
        }
    }
    return out;
}

// Lazy (x, f(x)) view over a dataset. Pseudo-labels are recomputed on
// access; purity of the teacher makes repeated evaluation identical.
class PseudoLabeledView {
public:
    PseudoLabeledView(const StratifiedDataset& ds, Teacher teacher)
        : ds_(&ds), teacher_(std::move(teacher)) {}

    const StratifiedDataset& dataset() const { return *ds_; }

    Label pseudo_label(std::size_t i) const { return teacher_(ds_->sample(i).x); }

    std::pair<const Covariate*, Label> at(std::size_t i) const {
        const Sample& s = ds_->sample(i);
        return {&s.x, teacher_(s.x)};
    }

    std::size_t size() const { return ds_->size(); }

private:
    const StratifiedDataset* ds_;
    Teacher teacher_;
};

inline PseudoLabeledView apply_teacher(Teacher f, const StratifiedDataset& ds) {
    return PseudoLabeledView(ds, std::move(f));
}

} // namespace cdrlab
