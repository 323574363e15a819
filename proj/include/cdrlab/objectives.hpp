#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cdrlab/dataset.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/model.hpp"

namespace cdrlab {

// Training objectives. Everything here is a weighted combination of mean
// losses over component datasets (one labeled and up to two pseudo-labeled
// pieces per context), so value and gradient always share coefficients.

enum class Method { erm, p_erm, dr, tdr, cdr };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::erm: return "erm";
        case Method::p_erm: return "p-erm";
        case Method::dr: return "dr";
        case Method::tdr: return "tdr";
        case Method::cdr: return "cdr";
    }
    throw Error("unreachable method");
}

inline Method parse_method(const std::string& name) {
    if (name == "erm") return Method::erm;
    if (name == "p-erm" || name == "perm") return Method::p_erm;
    if (name == "dr") return Method::dr;
    if (name == "tdr") return Method::tdr;
    if (name == "cdr") return Method::cdr;
    throw ConfigError("unknown method '" + name +
                      "' (expected erm, p-erm, dr, tdr, or cdr)");
}

inline bool method_uses_lambda(Method m) {
    return m == Method::dr || m == Method::tdr || m == Method::cdr;
}

using TuningVector = std::vector<double>;

enum class TuningMode { fixed, estimated };

struct ObjectiveSpec {
    Method kind = Method::cdr;
    bool curriculum = false;
    TuningMode tuning = TuningMode::estimated;
    TuningVector fixed_lambda; // used when tuning == fixed
};

/// Throws unless lambda has exactly `contexts` entries, all finite in [0,1].
inline void validate_tuning(const TuningVector& lambda, int contexts) {
    if (static_cast<int>(lambda.size()) != contexts)
        throw InvalidTuningError("tuning vector has " +
                                 std::to_string(lambda.size()) +
                                 " entries, expected " + std::to_string(contexts));
    for (std::size_t c = 0; c < lambda.size(); ++c)
        if (!(lambda[c] >= 0.0 && lambda[c] <= 1.0))
            throw InvalidTuningError("lambda[" + std::to_string(c) +
                                     "] = " + std::to_string(lambda[c]) +
                                     " outside [0,1]");
}

/// Linear pseudo-label schedule alpha_e = e/E, e in 1..E. The final epoch
/// always runs the full bias-corrected objective (alpha_E = 1).
inline double curriculum_alpha(int epoch, int total_epochs) {
    if (total_epochs < 1)
        throw InvalidEpochError("total_epochs must be >= 1, got " +
                                std::to_string(total_epochs));
    if (epoch < 1 || epoch > total_epochs)
        throw InvalidEpochError("epoch " + std::to_string(epoch) +
                                " outside 1.." + std::to_string(total_epochs));
    return static_cast<double>(epoch) / static_cast<double>(total_epochs);
}

// One weighted component: coeff times the mean loss over the samples.
struct ObjectiveTerm {
    double coeff = 0.0;
    std::vector<std::pair<Covariate, Label>> samples;
};

/// Sum of coeff * (mean loss, mean gradient) over the terms. Terms with a
/// zero coefficient or no samples contribute nothing.
template <class Model>
std::pair<double, Gradient> combine_terms(const Model& model, const Params& theta,
                                          const std::vector<ObjectiveTerm>& terms) {
    double value = 0.0;
    Gradient grad = Gradient::Zero(static_cast<Eigen::Index>(model.param_count()));
    for (const auto& term : terms) {
        if (term.coeff == 0.0 || term.samples.empty()) continue;
        auto [v, g] = model.batch_mean_loss_and_grad(theta, term.samples);
        value += term.coeff * v;
        grad += term.coeff * g;
    }
    return {value, std::move(grad)};
}

namespace detail {

inline std::vector<std::pair<Covariate, Label>>
true_labeled(const StratifiedDataset& ds) {
    std::vector<std::pair<Covariate, Label>> out;
    out.reserve(ds.size());
    for (const auto& s : ds.samples()) {
        if (!s.y) throw Error("labeled objective met a sample without a label");
        out.emplace_back(s.x, *s.y);
    }
    return out;
}

inline std::vector<std::pair<Covariate, Label>>
pseudo_labeled(const StratifiedDataset& ds, const Teacher& teacher) {
    std::vector<std::pair<Covariate, Label>> out;
    out.reserve(ds.size());
    for (const auto& s : ds.samples()) out.emplace_back(s.x, teacher(s.x));
    return out;
}

inline std::vector<std::pair<Covariate, Label>>
true_labeled_context(const StratifiedDataset& ds, int c) {
    std::vector<std::pair<Covariate, Label>> out;
    out.reserve(ds.count(c));
    for (std::size_t i : ds.context_indices(c)) {
        const Sample& s = ds.sample(i);
        if (!s.y) throw Error("labeled objective met a sample without a label");
        out.emplace_back(s.x, *s.y);
    }
    return out;
}

inline std::vector<std::pair<Covariate, Label>>
pseudo_labeled_context(const StratifiedDataset& ds, const Teacher& teacher, int c) {
    std::vector<std::pair<Covariate, Label>> out;
    out.reserve(ds.count(c));
    for (std::size_t i : ds.context_indices(c))
        out.emplace_back(ds.sample(i).x, teacher(ds.sample(i).x));
    return out;
}

} // namespace detail

/// Mean loss over the labeled samples and its gradient.
template <class Model>
std::pair<double, Gradient> erm_objective(const Model& model, const Params& theta,
                                          const StratifiedDataset& labeled) {
    if (labeled.empty()) throw EmptyBatchError("erm_objective: no labeled samples");
    std::vector<ObjectiveTerm> terms(1);
    terms[0].coeff = 1.0;
    terms[0].samples = detail::true_labeled(labeled);
    return combine_terms(model, theta, terms);
}

/// Mean loss over the union of the labeled set (true labels) and the
/// unlabeled set carrying teacher pseudo-labels; one flat mean over n + N
/// samples, no reweighting.
template <class Model>
std::pair<double, Gradient> p_erm_objective(const Model& model, const Params& theta,
                                            const StratifiedDataset& labeled,
                                            const StratifiedDataset& unlabeled,
                                            const Teacher& teacher) {
    if (labeled.empty() && unlabeled.empty())
        throw EmptyBatchError("p_erm_objective: both sample sets empty");
    std::vector<ObjectiveTerm> terms(1);
    terms[0].coeff = 1.0;
    terms[0].samples = detail::true_labeled(labeled);
    auto pseudo = detail::pseudo_labeled(unlabeled, teacher);
    terms[0].samples.insert(terms[0].samples.end(),
                            std::make_move_iterator(pseudo.begin()),
                            std::make_move_iterator(pseudo.end()));
    return combine_terms(model, theta, terms);
}

/// Bias-corrected pseudo-label objective:
/// mean over the pseudo-labeled union minus (mean pseudo loss on labeled
/// covariates minus mean true loss on them).
template <class Model>
std::pair<double, Gradient> dr_objective(const Model& model, const Params& theta,
                                         const StratifiedDataset& labeled,
                                         const StratifiedDataset& unlabeled,
                                         const Teacher& teacher) {
    if (labeled.empty())
        throw EmptyBatchError("dr_objective: cannot bias-correct without labeled samples");
    std::vector<ObjectiveTerm> terms(3);
    terms[0].coeff = 1.0; // pseudo-labeled union, one flat mean
    terms[0].samples = detail::pseudo_labeled(labeled, teacher);
    auto pseudo_extra = detail::pseudo_labeled(unlabeled, teacher);
    terms[0].samples.insert(terms[0].samples.end(),
                            std::make_move_iterator(pseudo_extra.begin()),
                            std::make_move_iterator(pseudo_extra.end()));
    terms[1].coeff = -1.0; // pseudo loss on the labeled covariates
    terms[1].samples = detail::pseudo_labeled(labeled, teacher);
    terms[2].coeff = 1.0; // true loss on the labeled covariates
    terms[2].samples = detail::true_labeled(labeled);
    return combine_terms(model, theta, terms);
}

// Per-context coefficients of the context-aware objective at a given
// (lambda, alpha). Zero entries mark dropped terms, so the table is also
// the single place where the N_c = 0 and n_c = 0 degeneracies are decided.
struct ComponentCoeffs {
    double pseudo_unlabeled = 0.0; // scales mean pseudo loss on unlabeled_c
    double labeled = 0.0;          // scales mean true loss on labeled_c
    double pseudo_labeled = 0.0;   // scales mean pseudo loss on labeled_c
};

/// Coefficient table for the context-aware objective:
///   sum_c { lambda_c (N_c/N) Lp~_c + alpha [ (n_c/n) L_c - lambda_c (n_c/n) Lp_c ] }
/// Contexts missing from the unlabeled pool keep only their labeled term.
inline std::vector<ComponentCoeffs> cdr_coefficients(
    const std::vector<std::size_t>& labeled_counts,
    const std::vector<std::size_t>& unlabeled_counts, const TuningVector& lambda,
    double alpha) {
    const int contexts = static_cast<int>(labeled_counts.size());
    if (unlabeled_counts.size() != labeled_counts.size())
        throw Error("context count mismatch between labeled and unlabeled sets");
    validate_tuning(lambda, contexts);
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw Error("alpha = " + std::to_string(alpha) + " outside [0,1]");

    std::size_t n = 0, big_n = 0;
    for (int c = 0; c < contexts; ++c) {
        n += labeled_counts[static_cast<std::size_t>(c)];
        big_n += unlabeled_counts[static_cast<std::size_t>(c)];
    }
    if (n == 0 && alpha > 0.0)
        throw EmptyBatchError("context objective needs labeled samples when alpha > 0");

    std::vector<ComponentCoeffs> coeffs(static_cast<std::size_t>(contexts));
    for (int c = 0; c < contexts; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const double n_c = static_cast<double>(labeled_counts[cc]);
        const double big_n_c = static_cast<double>(unlabeled_counts[cc]);
        if (unlabeled_counts[cc] > 0) {
            coeffs[cc].pseudo_unlabeled = lambda[cc] * big_n_c / static_cast<double>(big_n);
            if (labeled_counts[cc] > 0)
                coeffs[cc].pseudo_labeled =
                    -alpha * lambda[cc] * n_c / static_cast<double>(n);
        }
        if (labeled_counts[cc] > 0)
            coeffs[cc].labeled = alpha * n_c / static_cast<double>(n);
    }
    return coeffs;
}

inline std::vector<std::size_t> context_counts(const StratifiedDataset& ds) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(ds.contexts()));
    for (int c = 0; c < ds.contexts(); ++c)
        counts[static_cast<std::size_t>(c)] = ds.count(c);
    return counts;
}

/// Context-aware bias-corrected objective with per-context tuning vector
/// and pseudo-label weight alpha; alpha = 1 is the plain objective, smaller
/// alpha downweights the labeled-side terms for curriculum training.
template <class Model>
std::pair<double, Gradient> cdr_objective(const Model& model, const Params& theta,
                                          const StratifiedDataset& labeled,
                                          const StratifiedDataset& unlabeled,
                                          const Teacher& teacher,
                                          const TuningVector& lambda, double alpha) {
    if (labeled.contexts() != unlabeled.contexts())
        throw Error("labeled and unlabeled sets disagree on context count");
    const auto coeffs = cdr_coefficients(context_counts(labeled),
                                         context_counts(unlabeled), lambda, alpha);
    std::vector<ObjectiveTerm> terms;
    terms.reserve(3 * coeffs.size());
    for (int c = 0; c < labeled.contexts(); ++c) {
        const auto& k = coeffs[static_cast<std::size_t>(c)];
        if (k.pseudo_unlabeled != 0.0)
            terms.push_back({k.pseudo_unlabeled,
                             detail::pseudo_labeled_context(unlabeled, teacher, c)});
        if (k.labeled != 0.0)
            terms.push_back({k.labeled, detail::true_labeled_context(labeled, c)});
        if (k.pseudo_labeled != 0.0)
            terms.push_back({k.pseudo_labeled,
                             detail::pseudo_labeled_context(labeled, teacher, c)});
    }
    return combine_terms(model, theta, terms);
}

} // namespace cdrlab
