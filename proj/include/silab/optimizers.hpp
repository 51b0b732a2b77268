#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "silab/objective.hpp"
#include "silab/param_vector.hpp"

namespace silab {

// ---------------------------------------------------------------------------
// SGD with decoupled weight decay, parameterized by the intrinsic LR
// lambda_e = eta * lambda.
// ---------------------------------------------------------------------------

struct SgdWdState {
    double eta = 0.1;
    double lambda_e = 0.0;
    std::size_t step = 0;

    void validate() const {
        if (eta <= 0.0) throw std::invalid_argument("learning rate must be positive");
        if (lambda_e < 0.0 || lambda_e >= 1.0)
            throw std::invalid_argument("intrinsic LR must lie in [0, 1)");
    }
};

// w' = (1 - lambda_e) w - eta * (grad(w; batch) + xi). The optional xi lets
// the SDE engine inject synthetic increments; minibatch mode leaves it null.
inline ParamVector sgd_wd_step(SgdWdState& state, const Objective& obj, const ParamVector& w,
                               const Batch& batch, const ParamVector* noise = nullptr) {
    state.validate();
    ParamVector g = obj.grad(w, batch);
    if (noise) g += *noise;
    ParamVector next = (1.0 - state.lambda_e) * w;
    next.axpy(-state.eta, g);
    ++state.step;
    return next;
}

// ---------------------------------------------------------------------------
// Exponentially growing LR without weight decay
// ---------------------------------------------------------------------------

struct ExpLrState {
    double eta = 0.1;
    double lambda_e = 0.0;       // exponent base parameter, in (0, 1)
    std::size_t step = 0;
    double multiplier = 1.0;     // (1 - lambda_e)^(-2 step), maintained incrementally
    std::size_t renorm_events = 0;

    void validate() const {
        if (eta <= 0.0) throw std::invalid_argument("learning rate must be positive");
        if (lambda_e <= 0.0 || lambda_e >= 1.0)
            throw std::invalid_argument("exponent parameter must lie in (0, 1)");
    }
};

// w' = w - eta * (1 - lambda_e)^(-2t) * grad(w; batch). When the multiplier
// exceeds 1e100 the state is renormalized: w <- w/||w||, multiplier <- m/||w||^2.
// This preserves the function-space trajectory exactly (the direction update
// depends on eta * m / ||w||^2 only) and keeps long horizons representable.
inline ParamVector exp_lr_step(ExpLrState& state, const Objective& obj, ParamVector w,
                               const Batch& batch) {
    state.validate();
    if (state.multiplier > 1e100) {
        const double g2 = w.squared_norm();
        if (g2 < kOriginGuard * kOriginGuard) throw OriginError(std::sqrt(g2));
        state.multiplier /= g2;
        w *= 1.0 / std::sqrt(g2);
        ++state.renorm_events;
    }
    ParamVector g = obj.grad(w, batch);
    w.axpy(-state.eta * state.multiplier, g);
    ++state.step;
    state.multiplier /= (1.0 - state.lambda_e) * (1.0 - state.lambda_e);
    return w;
}

// ---------------------------------------------------------------------------
// Heavy-ball momentum with coupled weight decay
// ---------------------------------------------------------------------------

struct MomentumState {
    double eta = 0.1;
    double lambda = 0.0;
    double beta = 0.9;
    ParamVector velocity;
    std::size_t step = 0;

    void validate(std::size_t dim) const {
        if (eta <= 0.0) throw std::invalid_argument("learning rate must be positive");
        if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
        if (velocity.size() != dim) throw std::invalid_argument("velocity dimension mismatch");
    }
};

// v' = beta v + (grad(w; batch) + lambda w);  w' = w - eta v'
inline ParamVector momentum_step(MomentumState& state, const Objective& obj, const ParamVector& w,
                                 const Batch& batch) {
    state.validate(w.size());
    ParamVector g = obj.grad(w, batch);
    g.axpy(state.lambda, w);
    state.velocity *= state.beta;
    state.velocity += g;
    ParamVector next = w;
    next.axpy(-state.eta, state.velocity);
    ++state.step;
    return next;
}

// ---------------------------------------------------------------------------
// AdamW (decoupled weight decay)
// ---------------------------------------------------------------------------

struct AdamWState {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lambda = 0.0;
    double eta = 1.0;  // schedule multiplier; constant here
    ParamVector m;
    ParamVector v;
    std::size_t step = 0;

    void validate(std::size_t dim) const {
        if (m.size() != dim || v.size() != dim)
            throw std::invalid_argument("moment dimension mismatch");
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] < 0.0) throw std::invalid_argument("second moment must be nonnegative");
    }
};

// One AdamW update with bias correction at the incremented (1-based) step.
// With epsilon = 0 a component with zero gradient history updates by 0.
inline ParamVector adamw_step(AdamWState& state, const Objective& obj, const ParamVector& w,
                              const Batch& batch) {
    state.validate(w.size());
    const ParamVector g = obj.grad(w, batch);
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    ParamVector next = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        const double denom = std::sqrt(v_hat) + state.epsilon;
        const double adaptive = (denom == 0.0) ? 0.0 : state.alpha * m_hat / denom;
        next[i] -= state.eta * (adaptive + state.lambda * w[i]);
    }
    return next;
}

// ---------------------------------------------------------------------------
// Function-space comparison
// ---------------------------------------------------------------------------

struct FunctionSpaceDistance {
    double max_logit_distance = 0.0;
    double argmax_differ_fraction = 0.0;
};

// Compares two parameter vectors through the scale-free network outputs on a
// probe set: max L2 logit distance and the fraction of probes whose argmax
// prediction differs.
inline FunctionSpaceDistance function_space_distance(const Objective& obj, const ParamVector& w1,
                                                     const ParamVector& w2,
                                                     const std::vector<std::vector<double>>& probes) {
    FunctionSpaceDistance out;
    if (probes.empty()) return out;
    std::size_t differ = 0;
    for (const auto& x : probes) {
        const std::vector<double> z1 = obj.logits(w1, x);
        const std::vector<double> z2 = obj.logits(w2, x);
        double d2 = 0.0;
        int a1 = 0, a2 = 0;
        for (std::size_t k = 0; k < z1.size(); ++k) {
            const double d = z1[k] - z2[k];
            d2 += d * d;
            if (z1[k] > z1[static_cast<std::size_t>(a1)]) a1 = static_cast<int>(k);
            if (z2[k] > z2[static_cast<std::size_t>(a2)]) a2 = static_cast<int>(k);
        }
        out.max_logit_distance = std::max(out.max_logit_distance, std::sqrt(d2));
        if (a1 != a2) ++differ;
    }
    out.argmax_differ_fraction = static_cast<double>(differ) / static_cast<double>(probes.size());
    return out;
}

}  // namespace silab
