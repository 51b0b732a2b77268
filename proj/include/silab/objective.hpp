#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "silab/param_vector.hpp"
#include "silab/rng.hpp"

namespace silab {

// Mini-batch: sample indices into the objective's dataset. Indices may repeat
// (batches are drawn i.i.d. with replacement, so the mean batch gradient is
// unbiased and the noise trace scales as 1/B).
struct Batch {
    std::vector<int> indices;

    std::size_t size() const { return indices.size(); }
};

inline Batch full_batch(std::size_t n) {
    Batch b;
    b.indices.resize(n);
    std::iota(b.indices.begin(), b.indices.end(), 0);
    return b;
}

inline void validate_batch(const Batch& b, std::size_t n) {
    if (b.indices.empty()) throw std::invalid_argument("batch must contain at least one sample");
    for (int i : b.indices)
        if (i < 0 || static_cast<std::size_t>(i) >= n)
            throw std::invalid_argument("batch index out of dataset bounds");
}

// Draws a batch of size B. B == n returns the deterministic full batch;
// otherwise samples i.i.d. with replacement.
inline Batch sample_batch(std::size_t n, std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (batch_size > n) throw std::invalid_argument("batch size exceeds dataset size");
    if (n == 0) throw std::invalid_argument("empty dataset");
    if (batch_size == n) return full_batch(n);
    Batch b;
    b.indices.resize(batch_size);
    for (auto& i : b.indices) i = rng.uniform_int(0, static_cast<int>(n) - 1);
    return b;
}

// A scale-invariant training objective: loss(alpha*w) == loss(w) for alpha>0,
// hence <grad(w), w> == 0. Implementations are immutable after construction
// and safe to evaluate concurrently.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::size_t dim() const = 0;
    virtual std::size_t sample_count() const = 0;

    virtual double loss(const ParamVector& w, const Batch& batch) const = 0;
    virtual ParamVector grad(const ParamVector& w, const Batch& batch) const = 0;

    double full_loss(const ParamVector& w) const { return loss(w, full_batch(sample_count())); }
    ParamVector full_grad(const ParamVector& w) const { return grad(w, full_batch(sample_count())); }

    // Classifier surface: pre-softmax logits F(w; x), computed at w/||w|| so
    // the outputs are scale-free. Not every objective is a classifier.
    virtual std::size_t class_count() const { return 0; }
    virtual std::size_t feature_dim() const { return 0; }
    virtual std::vector<double> logits(const ParamVector& /*w*/,
                                       std::span<const double> /*x*/) const {
        throw std::logic_error("objective does not expose class logits");
    }

protected:
    void check_param(const ParamVector& w) const {
        if (w.size() != dim()) throw std::invalid_argument("parameter dimension mismatch");
        const double n = w.norm();
        if (n < kOriginGuard) throw OriginError(n);
    }
};

}  // namespace silab
