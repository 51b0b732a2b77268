#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "silab/objective.hpp"
#include "silab/param_vector.hpp"
#include "silab/rng.hpp"

namespace silab {

// Monte-Carlo estimate of Tr(Sigma_w) = E ||grad(w; B) - grad(w)||^2.
struct NoiseTraceEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n_samples = 0;
};

// One draw of the gradient noise xi = grad(w; B) - grad(w) for a fresh batch.
// Zero-mean with covariance Sigma_w by construction, and perpendicular to w
// for scale-invariant objectives.
inline ParamVector sample_gradient_noise(const Objective& obj, const ParamVector& w,
                                         std::size_t batch_size, Rng& rng) {
    const Batch b = sample_batch(obj.sample_count(), batch_size, rng);
    ParamVector xi = obj.grad(w, b);
    xi -= obj.full_grad(w);
    return xi;
}

inline NoiseTraceEstimate grad_noise_trace(const Objective& obj, const ParamVector& w,
                                           std::size_t batch_size, std::size_t n_samples,
                                           std::uint64_t seed) {
    if (n_samples < 2) throw std::invalid_argument("noise trace needs at least 2 samples");
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (obj.sample_count() == 0) throw std::invalid_argument("empty dataset");
    if (batch_size > obj.sample_count())
        throw std::invalid_argument("batch size exceeds dataset size");

    Rng rng(seed);
    const ParamVector mean_grad = obj.full_grad(w);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const Batch b = sample_batch(obj.sample_count(), batch_size, rng);
        ParamVector xi = obj.grad(w, b);
        xi -= mean_grad;
        const double s = xi.squared_norm();
        sum += s;
        sum_sq += s * s;
    }
    NoiseTraceEstimate est;
    est.n_samples = n_samples;
    est.mean = sum / static_cast<double>(n_samples);
    const double var =
        std::max(0.0, (sum_sq - sum * sum / static_cast<double>(n_samples)) /
                          static_cast<double>(n_samples - 1));
    est.stderr_ = std::sqrt(var / static_cast<double>(n_samples));
    return est;
}

}  // namespace silab
