#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "silab/objective.hpp"
#include "silab/param_vector.hpp"
#include "silab/rng.hpp"

namespace silab {

// Step size for Hessian-vector products by central differences of gradients.
inline double hvp_step(const ParamVector& w) { return 1e-4 * std::max(1.0, w.norm()); }

// Central-difference gradient of the batch loss; the oracle every analytic
// gradient is validated against.
inline ParamVector finite_diff_grad(const Objective& obj, const ParamVector& w,
                                    const Batch& batch, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite difference step must be positive");
    ParamVector g(w.size());
    ParamVector probe = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double wi = w[i];
        probe[i] = wi + h;
        const double up = obj.loss(probe, batch);
        probe[i] = wi - h;
        const double down = obj.loss(probe, batch);
        probe[i] = wi;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// H(w) v by central differences of the analytic full-data gradient.
inline ParamVector hessian_vector_product(const Objective& obj, const ParamVector& w,
                                          const ParamVector& v, double h) {
    ParamVector up = w;
    up.axpy(h, v);
    ParamVector down = w;
    down.axpy(-h, v);
    ParamVector hv = obj.full_grad(up);
    hv -= obj.full_grad(down);
    hv *= 1.0 / (2.0 * h);
    return hv;
}

struct InvarianceReport {
    double max_loss_dev = 0.0;        // sup_a |f(aw) - f(w)|
    double max_grad_scale_dev = 0.0;  // sup_a ||a grad(aw) - grad(w)|| / ||grad(w)||
    double max_perp_dev = 0.0;        // |<grad(w), w>| / (||grad(w)|| ||w||)
    double max_hessian_scale_dev = 0.0;  // sup_a ||a^2 H(aw)v - H(w)v|| / ||H(w)v||

    double worst() const {
        return std::max({max_loss_dev, max_grad_scale_dev, max_perp_dev, max_hessian_scale_dev});
    }
    bool passed(double tol) const { return worst() <= tol; }
};

// Checks f(aw) = f(w), grad(aw) = grad(w)/a, <grad, w> = 0 and the a^-2
// Hessian scaling at a single point, over the given alphas. Full-data
// evaluations; the Hessian check uses one random probe direction per alpha.
inline InvarianceReport verify_scale_invariance(const Objective& obj, const ParamVector& w,
                                                std::span<const double> alphas, double /*tol*/,
                                                Rng& rng, bool check_hessian = true) {
    const double wn = w.norm();
    if (wn < kOriginGuard) throw OriginError(wn);
    for (double a : alphas)
        if (a <= 0.0) throw std::invalid_argument("scaling factors must be positive");

    InvarianceReport rep;
    const double loss0 = obj.full_loss(w);
    const ParamVector grad0 = obj.full_grad(w);
    const double g0n = grad0.norm();

    rep.max_perp_dev = (g0n > 0.0) ? std::abs(grad0.dot(w)) / (g0n * wn) : 0.0;

    ParamVector v(w.size());
    ParamVector hv0(w.size());
    double hv0n = 0.0;
    if (check_hessian) {
        v = ParamVector(rng.gaussian_vector(w.size()));
        v *= 1.0 / v.norm();
        hv0 = hessian_vector_product(obj, w, v, hvp_step(w));
        hv0n = hv0.norm();
    }

    for (double a : alphas) {
        const ParamVector scaled = a * w;
        rep.max_loss_dev = std::max(rep.max_loss_dev, std::abs(obj.full_loss(scaled) - loss0));

        ParamVector grad_scaled = obj.full_grad(scaled);
        grad_scaled *= a;
        grad_scaled -= grad0;
        if (g0n > 0.0)
            rep.max_grad_scale_dev = std::max(rep.max_grad_scale_dev, grad_scaled.norm() / g0n);

        if (check_hessian && hv0n > 0.0) {
            ParamVector hva = hessian_vector_product(obj, scaled, v, hvp_step(scaled));
            hva *= a * a;
            hva -= hv0;
            rep.max_hessian_scale_dev = std::max(rep.max_hessian_scale_dev, hva.norm() / hv0n);
        }
    }
    return rep;
}

// A twice-differentiable scalar field g with analytic gradient; the raw base
// function of the radial construction f(w) = g(w/||w||).
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual double value(const ParamVector& w) const = 0;
    virtual ParamVector gradient(const ParamVector& w) const = 0;
};

// Gradient of f(w) = g(w/||w||): (I - uu^T) grad_g(u) / ||w|| with u = w/||w||.
inline ParamVector radial_field_gradient(const ScalarField& g, const ParamVector& w) {
    const double n = w.norm();
    if (n < kOriginGuard) throw OriginError(n);
    const ParamVector u = (1.0 / n) * w;
    ParamVector gu = g.gradient(u);
    gu.axpy(-gu.dot(u), u);
    gu *= 1.0 / n;
    return gu;
}

// Compares v^T H_f(w) v against (v^T H_g(u) v - u.grad_g(u) ||v||^2) / ||w||^2
// for f(w) = g(w/||w||) and v perpendicular to w. Both quadratic forms are
// evaluated with finite-difference Hessian-vector products. Returns the
// absolute difference of the two sides.
inline double hessian_perp_identity_check(const ScalarField& g, const ParamVector& w,
                                          const ParamVector& v, double tol) {
    const double wn = w.norm();
    if (wn < kOriginGuard) throw OriginError(wn);
    const double vn = v.norm();
    if (vn == 0.0) return 0.0;
    if (std::abs(v.dot(w)) > tol * vn * wn)
        throw std::invalid_argument("probe vector not perpendicular to w");

    const double h = hvp_step(w);

    // left: v^T H_f(w) v from gradients of the wrapped field
    ParamVector up = w;
    up.axpy(h, v);
    ParamVector down = w;
    down.axpy(-h, v);
    ParamVector hfv = radial_field_gradient(g, up);
    hfv -= radial_field_gradient(g, down);
    hfv *= 1.0 / (2.0 * h);
    const double left = hfv.dot(v);

    // right: reduction to the raw base function at u = w/||w||
    const ParamVector u = (1.0 / wn) * w;
    const double hu = 1e-4;
    ParamVector uup = u;
    uup.axpy(hu, v);
    ParamVector udown = u;
    udown.axpy(-hu, v);
    ParamVector hgv = g.gradient(uup);
    hgv -= g.gradient(udown);
    hgv *= 1.0 / (2.0 * hu);
    const double vhgv = hgv.dot(v);
    const double right = (vhgv - u.dot(g.gradient(u)) * vn * vn) / (wn * wn);

    return std::abs(left - right);
}

}  // namespace silab
