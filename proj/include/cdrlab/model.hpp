#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cdrlab/angles.hpp"
#include "cdrlab/dataset.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/rng.hpp"

namespace cdrlab {

using Params = Eigen::VectorXd;
using Gradient = Eigen::VectorXd;

/// Von Mises log-loss for independent azimuth/elevation means:
/// h(a,b) = 1 - cos(a - b), summed over the two angles. Periodic in every
/// argument, each term in [0, 2].
inline double angular_loss(const AngleTarget& pred, const AngleTarget& target) {
    return (1.0 - std::cos(pred.azimuth - target.azimuth)) +
           (1.0 - std::cos(pred.elevation - target.elevation));
}

// Architecture descriptor. The Fourier frequencies form the deterministic
// geometric ladder sigma^(j/m), j = 0..m-1, and are not trainable. input_lo
// and input_hi define the affine map applied to each raw coordinate before
// the ladder; leaving them empty means coordinates are used as-is.
struct MlpDescriptor {
    int input_dim = 2;
    int fourier_m = 20;
    double fourier_sigma = 20.0;
    std::vector<int> hidden = {128, 64};
    int output_dim = 2;
    std::vector<double> input_lo; // optional, size input_dim
    std::vector<double> input_hi;

    int feature_dim() const { return 2 * fourier_m * input_dim; }

    std::vector<int> layer_sizes() const {
        std::vector<int> sizes{feature_dim()};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(output_dim);
        return sizes;
    }

    std::size_t param_count() const {
        const auto sizes = layer_sizes();
        std::size_t p = 0;
        for (std::size_t l = 1; l < sizes.size(); ++l)
            p += static_cast<std::size_t>(sizes[l]) * (sizes[l - 1] + 1);
        return p;
    }
};

/// The literal Fourier ladder applied to the given coordinates: for each
/// coordinate v, pairs (cos(2*pi*sigma^(j/m) * v), sin(...)), j = 0..m-1.
inline std::vector<double> fourier_features(const std::vector<double>& x,
                                            int m, double sigma) {
    std::vector<double> out;
    out.reserve(2 * static_cast<std::size_t>(m) * x.size());
    for (double v : x) {
        for (int j = 0; j < m; ++j) {
            const double freq = 2.0 * std::numbers::pi *
                                std::pow(sigma, static_cast<double>(j) / m);
            out.push_back(std::cos(freq * v));
            out.push_back(std::sin(freq * v));
        }
    }
    return out;
}

// Feedforward network: Fourier feature layer, ReLU hidden layers, linear
// 2-unit head read as (azimuth, elevation). Raw outputs stay unconstrained
// during training (the loss is periodic); wrap only when displaying.
//
// Parameters live in one flat vector, laid out per layer as the row-major
// weight matrix followed by the bias: [W1, b1, W2, b2, ...]. All forward and
// backward passes are pure functions of (theta, inputs) and safe to run
// concurrently on shared theta.
class FourierMlp {
public:
    explicit FourierMlp(MlpDescriptor desc) : desc_(std::move(desc)) {
        sizes_ = desc_.layer_sizes();
        offsets_.clear();
        std::size_t off = 0;
        for (std::size_t l = 1; l < sizes_.size(); ++l) {
            offsets_.push_back(off); // weight block
            off += static_cast<std::size_t>(sizes_[l]) * sizes_[l - 1];
            offsets_.push_back(off); // bias block
            off += static_cast<std::size_t>(sizes_[l]);
        }
        param_count_ = off;
        freqs_.resize(desc_.fourier_m);
        for (int j = 0; j < desc_.fourier_m; ++j)
            freqs_[j] = 2.0 * std::numbers::pi *
                        std::pow(desc_.fourier_sigma,
                                 static_cast<double>(j) / desc_.fourier_m);
    }

    const MlpDescriptor& descriptor() const { return desc_; }
    std::size_t param_count() const { return param_count_; }

    /// Seeded init: weights uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)],
    /// biases zero. Identical seeds produce identical parameters.
    Params init_params(std::uint64_t seed) const {
        Params theta = Params::Zero(static_cast<Eigen::Index>(param_count_));
        Rng rng(Rng::splitmix(seed) ^ 0xC0FFEE1234ULL);
        for (std::size_t l = 1; l < sizes_.size(); ++l) {
            const double bound = std::sqrt(1.0 / sizes_[l - 1]);
            const std::size_t w0 = offsets_[2 * (l - 1)];
            const std::size_t nw = static_cast<std::size_t>(sizes_[l]) * sizes_[l - 1];
            for (std::size_t i = 0; i < nw; ++i)
                theta[static_cast<Eigen::Index>(w0 + i)] =
                    rng.next_double(-bound, bound);
        }
        return theta;
    }

    /// Feature row for one covariate: normalize, then the Fourier ladder.
    Eigen::RowVectorXd feature_row(const Covariate& x) const {
        if (static_cast<int>(x.size()) != desc_.input_dim)
            throw Error("covariate dimension " + std::to_string(x.size()) +
                        " != model input_dim " + std::to_string(desc_.input_dim));
        Eigen::RowVectorXd row(desc_.feature_dim());
        int k = 0;
        for (int d = 0; d < desc_.input_dim; ++d) {
            double v = x[static_cast<std::size_t>(d)];
            if (!desc_.input_lo.empty()) {
                const double lo = desc_.input_lo[static_cast<std::size_t>(d)];
                const double hi = desc_.input_hi[static_cast<std::size_t>(d)];
                v = (v - lo) / (hi - lo);
            }
            for (int j = 0; j < desc_.fourier_m; ++j) {
                row[k++] = std::cos(freqs_[static_cast<std::size_t>(j)] * v);
                row[k++] = std::sin(freqs_[static_cast<std::size_t>(j)] * v);
            }
        }
        return row;
    }

    /// Feature matrix for a list of covariates, one row per sample.
    Eigen::MatrixXd compile_features(const std::vector<const Covariate*>& xs) const {
        Eigen::MatrixXd f(static_cast<Eigen::Index>(xs.size()), desc_.feature_dim());
        for (std::size_t i = 0; i < xs.size(); ++i)
            f.row(static_cast<Eigen::Index>(i)) = feature_row(*xs[i]);
        return f;
    }

    AngleTarget forward(const Params& theta, const Covariate& x) const {
        Eigen::MatrixXd out = forward_features(theta, feature_row(x));
        if (!out.allFinite()) throw NumericError("non-finite model output");
        return {out(0, 0), out(0, 1)};
    }

    /// Raw head outputs for a feature batch (rows = samples, cols = 2).
    Eigen::MatrixXd forward_features(const Params& theta,
                                     const Eigen::MatrixXd& features) const {
        check_theta(theta);
        Eigen::MatrixXd a = features;
        for (std::size_t l = 1; l < sizes_.size(); ++l) {
            Eigen::MatrixXd z = (a * weight(theta, l).transpose()).rowwise() +
                                bias(theta, l).transpose();
            if (l + 1 < sizes_.size()) z = z.cwiseMax(0.0);
            a = std::move(z);
        }
        return a;
    }

    double loss(const Params& theta, const Covariate& x, const Label& y) const {
        const AngleTarget pred = forward(theta, x);
        return angular_loss(pred, to_angles(y));
    }

    std::pair<double, Gradient> loss_and_grad(const Params& theta,
                                              const Covariate& x,
                                              const Label& y) const {
        Eigen::MatrixXd features(1, desc_.feature_dim());
        features.row(0) = feature_row(x);
        Eigen::MatrixXd targets(1, 2);
        targets(0, 0) = y.at(0);
        targets(0, 1) = y.at(1);
        Gradient grad = Gradient::Zero(static_cast<Eigen::Index>(param_count_));
        double value = 0.0;
        accumulate_batch(theta, features, targets, 1.0, value, grad);
        if (!std::isfinite(value) || !grad.allFinite())
            throw NumericError("non-finite loss or gradient");
        return {value, std::move(grad)};
    }

    std::vector<Gradient> per_sample_grads(
        const Params& theta,
        const std::vector<std::pair<Covariate, Label>>& samples) const {
        if (samples.empty()) throw EmptyBatchError("per_sample_grads: empty list");
        std::vector<Gradient> out;
        out.reserve(samples.size());
        for (const auto& [x, y] : samples)
            out.push_back(loss_and_grad(theta, x, y).second);
        return out;
    }

    std::pair<double, Gradient> batch_mean_loss_and_grad(
        const Params& theta,
        const std::vector<std::pair<Covariate, Label>>& samples) const {
        if (samples.empty())
            throw EmptyBatchError("batch_mean_loss_and_grad: empty batch");
        std::vector<const Covariate*> xs;
        xs.reserve(samples.size());
        Eigen::MatrixXd targets(static_cast<Eigen::Index>(samples.size()), 2);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            xs.push_back(&samples[i].first);
            targets(static_cast<Eigen::Index>(i), 0) = samples[i].second.at(0);
            targets(static_cast<Eigen::Index>(i), 1) = samples[i].second.at(1);
        }
        const Eigen::MatrixXd features = compile_features(xs);
        Gradient grad = Gradient::Zero(static_cast<Eigen::Index>(param_count_));
        double value = 0.0;
        accumulate_batch(theta, features, targets, 1.0, value, grad);
        if (!std::isfinite(value) || !grad.allFinite())
            throw NumericError("non-finite loss or gradient in batch");
        return {value, std::move(grad)};
    }

    // Core batched pass. Adds coeff * (mean loss over rows) to value and
    // coeff * (mean gradient) into grad. Single allocation-light sweep:
    // GEMM forward, GEMM backward, rank-k updates straight into grad.
    void accumulate_batch(const Params& theta, const Eigen::MatrixXd& features,
                          const Eigen::MatrixXd& targets, double coeff,
                          double& value, Gradient& grad) const {
        check_theta(theta);
        const Eigen::Index batch = features.rows();
        if (batch == 0) throw EmptyBatchError("accumulate_batch: empty batch");
        const std::size_t depth = sizes_.size() - 1;

        std::vector<Eigen::MatrixXd> acts(depth + 1);
        acts[0] = features;
        for (std::size_t l = 1; l <= depth; ++l) {
            acts[l].noalias() = acts[l - 1] * weight(theta, l).transpose();
            acts[l].rowwise() += bias(theta, l).transpose();
            if (l < depth) acts[l] = acts[l].cwiseMax(0.0);
        }

        const Eigen::MatrixXd diff = acts[depth] - targets;
        value += coeff / static_cast<double>(batch) *
                 (static_cast<double>(2 * batch) - diff.array().cos().sum());

        const double scale = coeff / static_cast<double>(batch);
        Eigen::MatrixXd delta = scale * diff.array().sin().matrix();
        for (std::size_t l = depth; l >= 1; --l) {
            auto gw = weight_block(grad, l);
            gw.noalias() += delta.transpose() * acts[l - 1];
            bias_block(grad, l).noalias() += delta.colwise().sum().transpose();
            if (l > 1) {
                Eigen::MatrixXd prev = delta * weight(theta, l);
                // ReLU passes gradient only where the activation ended up > 0
                delta = (acts[l - 1].array() > 0.0).select(prev, 0.0);
            }
        }
    }

    struct GramMoments {
        double dot_sum = 0.0;       // sum_i <pseudo-grad_i, grad_i>
        double pseudo_sq_sum = 0.0; // sum_i ||pseudo-grad_i||^2
    };

    // Per-sample gradient moments for the tuning estimator, without ever
    // materializing per-sample gradients. Uses the layer identity
    // <u (x) a, v (x) a> = <u, v> * ||a||^2: both per-sample gradients share
    // the layer inputs, only their deltas differ. Also adds the plain
    // gradient sums (not means) for both label sets into the two buffers.
    GramMoments gram_moments(const Params& theta, const Eigen::MatrixXd& features,
                             const Eigen::MatrixXd& targets_true,
                             const Eigen::MatrixXd& targets_pseudo,
                             Gradient& grad_sum, Gradient& pseudo_grad_sum) const {
        check_theta(theta);
        if (static_cast<std::size_t>(grad_sum.size()) != param_count_ ||
            static_cast<std::size_t>(pseudo_grad_sum.size()) != param_count_)
            throw Error("gram_moments: sum buffers must have param_count entries");
        const Eigen::Index batch = features.rows();
        if (batch == 0) throw EmptyBatchError("gram_moments: empty batch");
        const std::size_t depth = sizes_.size() - 1;

        std::vector<Eigen::MatrixXd> acts(depth + 1);
        acts[0] = features;
        for (std::size_t l = 1; l <= depth; ++l) {
            acts[l].noalias() = acts[l - 1] * weight(theta, l).transpose();
            acts[l].rowwise() += bias(theta, l).transpose();
            if (l < depth) acts[l] = acts[l].cwiseMax(0.0);
        }

        Eigen::MatrixXd delta_t = (acts[depth] - targets_true).array().sin().matrix();
        Eigen::MatrixXd delta_p = (acts[depth] - targets_pseudo).array().sin().matrix();
        GramMoments out;
        for (std::size_t l = depth; l >= 1; --l) {
            // per-sample factor ||a_{l-1}||^2 + 1 covers weight and bias blocks
            const Eigen::ArrayXd factor =
                acts[l - 1].rowwise().squaredNorm().array() + 1.0;
            out.dot_sum +=
                ((delta_p.array() * delta_t.array()).rowwise().sum() * factor).sum();
            out.pseudo_sq_sum +=
                (delta_p.array().square().rowwise().sum() * factor).sum();

            weight_block(grad_sum, l).noalias() += delta_t.transpose() * acts[l - 1];
            bias_block(grad_sum, l).noalias() += delta_t.colwise().sum().transpose();
            weight_block(pseudo_grad_sum, l).noalias() +=
                delta_p.transpose() * acts[l - 1];
            bias_block(pseudo_grad_sum, l).noalias() +=
                delta_p.colwise().sum().transpose();

            if (l > 1) {
                Eigen::MatrixXd prev_t = delta_t * weight(theta, l);
                Eigen::MatrixXd prev_p = delta_p * weight(theta, l);
                delta_t = (acts[l - 1].array() > 0.0).select(prev_t, 0.0);
                delta_p = (acts[l - 1].array() > 0.0).select(prev_p, 0.0);
            }
        }
        return out;
    }

    AngleTarget to_angles(const Label& y) const {
        return {y.at(0), y.at(1)};
    }

    // ---- checkpoint: text descriptor header + little-endian float64 blob ----

    void save_checkpoint(const std::string& path, const Params& theta) const {
        check_theta(theta);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw FileError("cannot write checkpoint: " + path);
        std::ostringstream head;
        head << std::setprecision(17); // doubles must survive the round-trip
        head << "cdrlab-checkpoint v1\n";
        head << "input_dim " << desc_.input_dim << "\n";
        head << "fourier_m " << desc_.fourier_m << "\n";
        head << "fourier_sigma " << desc_.fourier_sigma << "\n";
        head << "hidden";
        for (int h : desc_.hidden) head << " " << h;
        head << "\n";
        head << "output_dim " << desc_.output_dim << "\n";
        if (!desc_.input_lo.empty()) {
            head << "input_lo";
            for (double v : desc_.input_lo) head << " " << v;
            head << "\ninput_hi";
            for (double v : desc_.input_hi) head << " " << v;
            head << "\n";
        }
        head << "param_count " << param_count_ << "\n";
        head << "data\n";
        out << head.str();
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            const auto bytes = encode_le(theta[i]);
            out.write(bytes.data(), 8);
        }
    }

    static std::pair<MlpDescriptor, Params> load_checkpoint(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FileError("cannot read checkpoint: " + path);
        std::string line;
        if (!std::getline(in, line) || line != "cdrlab-checkpoint v1")
            throw FileError("bad checkpoint magic in " + path);
        MlpDescriptor desc;
        std::size_t declared = 0;
        while (std::getline(in, line)) {
            if (line == "data") break;
            std::istringstream ss(line);
            std::string key;
            ss >> key;
            if (key == "input_dim") ss >> desc.input_dim;
            else if (key == "fourier_m") ss >> desc.fourier_m;
            else if (key == "fourier_sigma") ss >> desc.fourier_sigma;
            else if (key == "output_dim") ss >> desc.output_dim;
            else if (key == "param_count") ss >> declared;
            else if (key == "hidden") {
                desc.hidden.clear();
                int h;
                while (ss >> h) desc.hidden.push_back(h);
            } else if (key == "input_lo") {
                desc.input_lo.clear();
                double v;
                while (ss >> v) desc.input_lo.push_back(v);
            } else if (key == "input_hi") {
                desc.input_hi.clear();
                double v;
                while (ss >> v) desc.input_hi.push_back(v);
            } else {
                throw FileError("unknown checkpoint field '" + key + "' in " + path);
            }
        }
        if (declared != desc.param_count())
            throw FileError("checkpoint param_count mismatch in " + path);
        Params theta(static_cast<Eigen::Index>(declared));
        for (std::size_t i = 0; i < declared; ++i) {
            char bytes[8];
            if (!in.read(bytes, 8))
                throw FileError("checkpoint truncated: " + path);
            theta[static_cast<Eigen::Index>(i)] = decode_le(bytes);
        }
        return {std::move(desc), std::move(theta)};
    }

private:
    void check_theta(const Params& theta) const {
        if (static_cast<std::size_t>(theta.size()) != param_count_)
            throw Error("parameter vector has length " +
                        std::to_string(theta.size()) + ", model expects " +
                        std::to_string(param_count_));
    }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
    weight(const Params& theta, std::size_t l) const {
        return {theta.data() + offsets_[2 * (l - 1)],
                static_cast<Eigen::Index>(sizes_[l]),
                static_cast<Eigen::Index>(sizes_[l - 1])};
    }

    Eigen::Map<const Eigen::VectorXd> bias(const Params& theta, std::size_t l) const {
        return {theta.data() + offsets_[2 * (l - 1) + 1],
                static_cast<Eigen::Index>(sizes_[l])};
    }

    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    weight_block(Gradient& g, std::size_t l) const {
        return {g.data() + offsets_[2 * (l - 1)],
                static_cast<Eigen::Index>(sizes_[l]),
                static_cast<Eigen::Index>(sizes_[l - 1])};
    }

    Eigen::Map<Eigen::VectorXd> bias_block(Gradient& g, std::size_t l) const {
        return {g.data() + offsets_[2 * (l - 1) + 1],
                static_cast<Eigen::Index>(sizes_[l])};
    }

    static std::array<char, 8> encode_le(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        std::array<char, 8> b{};
        for (int i = 0; i < 8; ++i)
            b[static_cast<std::size_t>(i)] = static_cast<char>((u >> (8 * i)) & 0xFF);
        return b;
    }

    static double decode_le(const char* b) {
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i)
            u |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }

    MlpDescriptor desc_;
    std::vector<int> sizes_;
    std::vector<std::size_t> offsets_;
    std::size_t param_count_ = 0;
    std::vector<double> freqs_;
};

} // namespace cdrlab
