#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "silab/objective.hpp"
#include "silab/param_vector.hpp"
#include "silab/rng.hpp"

namespace silab {

// ---------------------------------------------------------------------------
// Toy 2-D loss L(x, y) = x^2 / (x^2 + y^2)
// ---------------------------------------------------------------------------

// Value and analytic gradient of the toy loss at (x, y).
inline std::pair<double, std::array<double, 2>> toy_loss_eval(double x, double y) {
    const double r2 = x * x + y * y;
    if (r2 < kOriginGuard * kOriginGuard) throw OriginError(std::sqrt(r2));
    const double loss = x * x / r2;
    const double denom = r2 * r2;
    return {loss, {2.0 * x * y * y / denom, -2.0 * x * x * y / denom}};
}

// Scale-invariant by construction: the loss depends only on x/y. Data-free
// (single pseudo-sample); batches are accepted and ignored.
class ToyLoss2D final : public Objective {
public:
    std::size_t dim() const override { return 2; }
    std::size_t sample_count() const override { return 1; }

    double loss(const ParamVector& w, const Batch& batch) const override {
        check_param(w);
        validate_batch(batch, 1);
        return toy_loss_eval(w[0], w[1]).first;
    }

    ParamVector grad(const ParamVector& w, const Batch& batch) const override {
        check_param(w);
        validate_batch(batch, 1);
        const auto [loss, g] = toy_loss_eval(w[0], w[1]);
        (void)loss;
        return ParamVector({g[0], g[1]});
    }
};

// Constant loss: the degenerate scale-invariant objective with zero gradient.
// Under SGD+WD or the weight SDE only the norm dynamics remain.
class ConstantLoss final : public Objective {
public:
    explicit ConstantLoss(std::size_t dim, double value = 0.5) : dim_(dim), value_(value) {}
    std::size_t dim() const override { return dim_; }
    std::size_t sample_count() const override { return 1; }
    double loss(const ParamVector& w, const Batch&) const override {
        check_param(w);
        return value_;
    }
    ParamVector grad(const ParamVector& w, const Batch&) const override {
        check_param(w);
        return ParamVector::zeros(dim_);
    }

private:
    std::size_t dim_;
    double value_;
};

// ---------------------------------------------------------------------------
// Synthetic classification data
// ---------------------------------------------------------------------------

// Gaussian-mixture classification dataset: K class means on a sphere of
// radius `separation`, unit isotropic within-class noise. A pure function of
// its generator parameters.
struct SyntheticDataset {
    std::size_t n = 0;
    std::size_t feature_dim = 0;
    std::size_t class_count = 0;
    double separation = 0.0;
    std::uint64_t seed = 0;

    std::vector<double> inputs;        // n x p, row-major
    std::vector<int> labels;           // n, in {0..K-1}
    std::vector<double> class_means;   // K x p, row-major

    std::span<const double> row(std::size_t i) const {
        return {inputs.data() + i * feature_dim, feature_dim};
    }
};

namespace detail {

inline std::vector<double> mixture_means(std::size_t p, std::size_t K, double separation,
                                         Rng& rng) {
    std::vector<double> means(K * p, 0.0);
    if (separation == 0.0 || K == 0) return means;
    // unit directions, re-drawn until pairwise angles exceed 60 degrees
    // (best effort; gives reproducible well-separated classes for small K)
    for (int attempt = 0; attempt < 200; ++attempt) {
        std::vector<std::vector<double>> dirs(K);
        for (auto& d : dirs) {
            d = rng.gaussian_vector(p);
            double nn = 0.0;
            for (double x : d) nn += x * x;
            nn = std::sqrt(nn);
            if (nn == 0.0) nn = 1.0;
            for (double& x : d) x /= nn;
        }
        bool ok = true;
        for (std::size_t a = 0; a < K && ok; ++a)
            for (std::size_t b = a + 1; b < K && ok; ++b) {
                double dot = 0.0;
                for (std::size_t j = 0; j < p; ++j) dot += dirs[a][j] * dirs[b][j];
                if (dot > 0.5) ok = false;
            }
        if (ok || attempt == 199) {
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t j = 0; j < p; ++j) means[k * p + j] = separation * dirs[k][j];
            break;
        }
    }
    return means;
}

}  // namespace detail

inline SyntheticDataset make_gaussian_mixture(std::size_t n, std::size_t p, std::size_t K,
                                              double separation, std::uint64_t seed) {
    if (K < 1 || p < 1 || n < K) throw std::invalid_argument("need n >= K >= 1 and p >= 1");
    if (separation < 0.0) throw std::invalid_argument("separation must be >= 0");

    SyntheticDataset ds;
    ds.n = n;
    ds.feature_dim = p;
    ds.class_count = K;
    ds.separation = separation;
    ds.seed = seed;

    Rng means_rng(derive_seed(seed, 0));
    ds.class_means = detail::mixture_means(p, K, separation, means_rng);

    Rng sample_rng(derive_seed(seed, 1));
    ds.inputs.resize(n * p);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % K);  // round-robin: every class present
        ds.labels[i] = y;
        for (std::size_t j = 0; j < p; ++j)
            ds.inputs[i * p + j] = ds.class_means[y * p + j] + sample_rng.gaussian();
    }
    return ds;
}

// Fresh draw with the same class means (held-out/test split).
inline SyntheticDataset resample_gaussian_mixture(const SyntheticDataset& ds, std::size_t n,
                                                  std::uint64_t stream) {
    SyntheticDataset out = ds;
    out.n = n;
    out.inputs.assign(n * ds.feature_dim, 0.0);
    out.labels.assign(n, 0);
    Rng rng(derive_seed(ds.seed, 1000 + stream));
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % ds.class_count);
        out.labels[i] = y;
        for (std::size_t j = 0; j < ds.feature_dim; ++j)
            out.inputs[i * ds.feature_dim + j] =
                ds.class_means[y * ds.feature_dim + j] + rng.gaussian();
    }
    return out;
}

inline void write_dataset_csv(const SyntheticDataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t j = 0; j < ds.feature_dim; ++j) f << 'x' << j << ',';
    f << "label\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.feature_dim; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.inputs[i * ds.feature_dim + j]);
            f << buf << ',';
        }
        f << ds.labels[i] << '\n';
    }
}

inline SyntheticDataset read_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty dataset file " + path);
    std::size_t p = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    SyntheticDataset ds;
    ds.feature_dim = p;
    int max_label = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t j = 0; j < p; ++j) {
            std::getline(ss, cell, ',');
            ds.inputs.push_back(std::stod(cell));
        }
        std::getline(ss, cell, ',');
        const int y = std::stoi(cell);
        ds.labels.push_back(y);
        max_label = std::max(max_label, y);
    }
    ds.n = ds.labels.size();
    ds.class_count = static_cast<std::size_t>(max_label) + 1;
    return ds;
}

// ---------------------------------------------------------------------------
// Radially-projected MLP: f(w) = g(w / ||w||)
// ---------------------------------------------------------------------------

enum class Activation { Tanh, Relu };

// Softmax cross-entropy on logits g(w/||w||; x) of a plain MLP with analytic
// backprop. Normalizing the whole flattened parameter vector makes the loss
// scale-invariant by construction and the gradient perpendicular to w.
class RadialMlpObjective final : public Objective {
public:
    RadialMlpObjective(std::vector<std::size_t> widths, Activation act,
                       std::shared_ptr<const SyntheticDataset> data, std::uint64_t init_seed = 0)
        : widths_(std::move(widths)), act_(act), data_(std::move(data)), init_seed_(init_seed) {
        if (widths_.size() < 2) throw std::invalid_argument("need at least input and output widths");
        if (!data_) throw std::invalid_argument("dataset handle required");
        if (widths_.front() != data_->feature_dim)
            throw std::invalid_argument("input width does not match dataset feature dim");
        if (widths_.back() != data_->class_count)
            throw std::invalid_argument("output width does not match dataset class count");
        dim_ = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
            dim_ += widths_[l + 1] * (widths_[l] + 1);
    }

    std::size_t dim() const override { return dim_; }
    std::size_t sample_count() const override { return data_->n; }
    std::size_t class_count() const override { return data_->class_count; }
    std::size_t feature_dim() const override { return data_->feature_dim; }
    Activation activation() const { return act_; }
    const std::vector<std::size_t>& widths() const { return widths_; }
    const SyntheticDataset& data() const { return *data_; }

    double loss(const ParamVector& w, const Batch& batch) const override {
        check_param(w);
        validate_batch(batch, data_->n);
        const ParamVector u = direction(w);
        double total = 0.0;
        Workspace ws(widths_);
        for (int idx : batch.indices) {
            forward(u, data_->row(idx), ws);
            total += ce_loss(ws.acts.back(), data_->labels[idx]);
        }
        return total / static_cast<double>(batch.size());
    }

    ParamVector grad(const ParamVector& w, const Batch& batch) const override {
        check_param(w);
        validate_batch(batch, data_->n);
        const double n = w.norm();
        const ParamVector u = (1.0 / n) * w;
        ParamVector gu = base_grad(u, batch);
        // project to the tangent space of the sphere and rescale: chain rule
        // of the radial map
        gu.axpy(-gu.dot(u), u);
        gu *= 1.0 / n;
        return gu;
    }

    std::vector<double> logits(const ParamVector& w, std::span<const double> x) const override {
        check_param(w);
        if (x.size() != widths_.front()) throw std::invalid_argument("probe dimension mismatch");
        const ParamVector u = direction(w);
        Workspace ws(widths_);
        forward(u, x, ws);
        return ws.acts.back();
    }

    // Gradient of the raw base network g at arbitrary parameters (no radial
    // projection); used by gradient checks.
    ParamVector base_grad(const ParamVector& params, const Batch& batch) const {
        if (params.size() != dim_) throw std::invalid_argument("parameter dimension mismatch");
        validate_batch(batch, data_->n);
        ParamVector g(dim_);
        Workspace ws(widths_);
        for (int idx : batch.indices) {
            forward(params, data_->row(idx), ws);
            backward(params, data_->labels[idx], ws, g);
        }
        g *= 1.0 / static_cast<double>(batch.size());
        return g;
    }

    double base_loss(const ParamVector& params, const Batch& batch) const {
        if (params.size() != dim_) throw std::invalid_argument("parameter dimension mismatch");
        validate_batch(batch, data_->n);
        Workspace ws(widths_);
        double total = 0.0;
        for (int idx : batch.indices) {
            forward(params, data_->row(idx), ws);
            total += ce_loss(ws.acts.back(), data_->labels[idx]);
        }
        return total / static_cast<double>(batch.size());
    }

    // I.i.d. normal init, variance 1/fan_in per layer, zero biases, times an
    // overall scale multiplier.
    ParamVector init_params(double scale, Rng& rng) const {
        ParamVector w(dim_);
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            const std::size_t fan_in = widths_[l], fan_out = widths_[l + 1];
            const double sd = scale / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t i = 0; i < fan_out * fan_in; ++i) w[off++] = sd * rng.gaussian();
            off += fan_out;  // biases stay zero
        }
        return w;
    }

    ParamVector init_params(double scale = 1.0) const {
        Rng rng(derive_seed(init_seed_, 42));
        return init_params(scale, rng);
    }

private:
    struct Workspace {
        explicit Workspace(const std::vector<std::size_t>& widths) {
            acts.resize(widths.size());
            pre.resize(widths.size());
            for (std::size_t l = 0; l < widths.size(); ++l) {
                acts[l].resize(widths[l]);
                pre[l].resize(widths[l]);
            }
        }
        // acts[0] = input, acts[L] = logits
        std::vector<std::vector<double>> acts;
        std::vector<std::vector<double>> pre;
    };

    double act_fn(double a) const { return act_ == Activation::Tanh ? std::tanh(a) : std::max(0.0, a); }
    double act_deriv(double a, double h) const {
        return act_ == Activation::Tanh ? 1.0 - h * h : (a > 0.0 ? 1.0 : 0.0);
    }

    void forward(const ParamVector& params, std::span<const double> x, Workspace& ws) const {
        std::copy(x.begin(), x.end(), ws.acts[0].begin());
        std::size_t off = 0;
        const std::size_t L = widths_.size() - 1;
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t in = widths_[l], out = widths_[l + 1];
            const bool last = (l + 1 == L);
            for (std::size_t i = 0; i < out; ++i) {
                double a = params[off + out * in + i];  // bias
                const std::size_t row = off + i * in;
                for (std::size_t j = 0; j < in; ++j) a += params[row + j] * ws.acts[l][j];
                ws.pre[l + 1][i] = a;
                ws.acts[l + 1][i] = last ? a : act_fn(a);
            }
            off += out * (in + 1);
        }
    }

    // accumulates d(ce)/d(params) for one sample into g
    void backward(const ParamVector& params, int label, const Workspace& ws, ParamVector& g) const {
        const std::size_t L = widths_.size() - 1;
        std::vector<double> delta = softmax(ws.acts[L]);
        delta[static_cast<std::size_t>(label)] -= 1.0;

        std::size_t off_end = dim_;
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in = widths_[l], out = widths_[l + 1];
            const std::size_t off = off_end - out * (in + 1);
            std::vector<double> prev_delta(in, 0.0);
            for (std::size_t i = 0; i < out; ++i) {
                const std::size_t row = off + i * in;
                const double d = delta[i];
                for (std::size_t j = 0; j < in; ++j) {
                    g[row + j] += d * ws.acts[l][j];
                    prev_delta[j] += d * params[row + j];
                }
                g[off + out * in + i] += d;  // bias
            }
            if (l > 0)
                for (std::size_t j = 0; j < in; ++j)
                    prev_delta[j] *= act_deriv(ws.pre[l][j], ws.acts[l][j]);
            delta = std::move(prev_delta);
        }
    }

    static std::vector<double> softmax(const std::vector<double>& z) {
        std::vector<double> p(z.size());
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) sum += (p[k] = std::exp(z[k] - zmax));
        for (auto& x : p) x /= sum;
        return p;
    }

    static double ce_loss(const std::vector<double>& z, int label) {
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        return zmax + std::log(sum) - z[static_cast<std::size_t>(label)];
    }

    std::vector<std::size_t> widths_;
    Activation act_;
    std::shared_ptr<const SyntheticDataset> data_;
    std::uint64_t init_seed_;
    std::size_t dim_ = 0;
};

inline std::shared_ptr<RadialMlpObjective> make_radial_mlp(std::vector<std::size_t> widths,
                                                           Activation act,
                                                           std::shared_ptr<const SyntheticDataset> data,
                                                           std::uint64_t seed) {
    return std::make_shared<RadialMlpObjective>(std::move(widths), act, std::move(data), seed);
}

// ---------------------------------------------------------------------------
// Prediction helpers
// ---------------------------------------------------------------------------

inline int argmax_lowest_tie(std::span<const double> z) {
    int best = 0;
    for (std::size_t k = 1; k < z.size(); ++k)
        if (z[k] > z[best]) best = static_cast<int>(k);
    return best;
}

// argmax of F(w; x); ties break to the lowest class index, and the result is
// invariant under positive rescaling of w.
inline int predict_class(const Objective& obj, const ParamVector& w, std::span<const double> x) {
    const std::vector<double> z = obj.logits(w, x);
    return argmax_lowest_tie(z);
}

inline std::vector<int> predict_batch(const Objective& obj, const ParamVector& w,
                                      const SyntheticDataset& ds) {
    std::vector<int> out(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) out[i] = predict_class(obj, w, ds.row(i));
    return out;
}

struct DatasetMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline DatasetMetrics evaluate_dataset(const Objective& obj, const ParamVector& w,
                                       const SyntheticDataset& ds) {
    DatasetMetrics m;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const std::vector<double> z = obj.logits(w, ds.row(i));
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        m.loss += zmax + std::log(sum) - z[static_cast<std::size_t>(ds.labels[i])];
        if (argmax_lowest_tie(z) == ds.labels[i]) ++correct;
    }
    m.loss /= static_cast<double>(ds.n);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(ds.n);
    return m;
}

}  // namespace silab
