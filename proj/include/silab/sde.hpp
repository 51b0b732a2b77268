#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "silab/noise.hpp"
#include "silab/objective.hpp"
#include "silab/param_vector.hpp"
#include "silab/rng.hpp"

namespace silab {

// ---------------------------------------------------------------------------
// Deterministic ODE surrogates for the norm and squared-inverse-effective-LR
// dynamics.
// ---------------------------------------------------------------------------

struct ScalarTrajectory {
    std::vector<double> times;
    std::vector<double> values;

    double final_value() const { return values.back(); }

    // linear interpolation between recorded steps
    double at_time(double t) const {
        if (times.empty()) throw std::logic_error("empty trajectory");
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        std::size_t lo = 0, hi = times.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (times[mid] <= t ? lo : hi) = mid;
        }
        const double f = (t - times[lo]) / (times[hi] - times[lo]);
        return values[lo] + f * (values[hi] - values[lo]);
    }

    // first time the value enters [target*(1-band), target*(1+band)]
    double first_entry_time(double target, double band) const {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (std::abs(values[i] - target) <= band * target) return times[i];
        return times.back();
    }
};

namespace detail {

// RK4 with positivity guard: a step that would leave the state nonpositive is
// rejected and retried at half length (halving the step keeps the stationary
// value unbiased, unlike clamping).
inline ScalarTrajectory rk4_positive(double y0, const std::function<double(double, double)>& f,
                                     double t_end, double dt) {
    if (y0 <= 0.0) throw std::invalid_argument("initial value must be positive");
    if (dt <= 0.0) throw std::invalid_argument("time step must be positive");
    ScalarTrajectory traj;
    traj.times.push_back(0.0);
    traj.values.push_back(y0);
    double t = 0.0, y = y0;
    while (t < t_end - 1e-15 * t_end) {
        double h = std::min(dt, t_end - t);
        for (int halvings = 0; halvings < 60; ++halvings) {
            const double k1 = f(t, y);
            const double k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
            const double k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
            const double k4 = f(t + h, y + h * k3);
            const double y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (y_next > 0.0 && y + 0.5 * h * k1 > 0.0 && y + 0.5 * h * k2 > 0.0 &&
                y + h * k3 > 0.0) {
                y = y_next;
                t += h;
                break;
            }
            h *= 0.5;
            if (halvings == 59) throw std::runtime_error("ODE step underflow at positivity guard");
        }
        traj.times.push_back(t);
        traj.values.push_back(y);
    }
    return traj;
}

}  // namespace detail

// dG/dt = -2 lambda_e G + (eta^2 / G) * Tr(t), Tr the gradient-noise trace at
// the unit sphere.
inline ScalarTrajectory norm_ode_integrate(double G0, double eta, double lambda_e,
                                           const std::function<double(double)>& trace_fn,
                                           double t_end, double dt) {
    return detail::rk4_positive(
        G0,
        [eta, lambda_e, &trace_fn](double t, double G) {
            return -2.0 * lambda_e * G + eta * eta * trace_fn(t) / G;
        },
        t_end, dt);
}

// d(gamma)/dt = -4 lambda_e gamma + 2 Tr(t), gamma = (G/eta)^2.
inline ScalarTrajectory gamma_ode_integrate(double gamma0, double lambda_e,
                                            const std::function<double(double)>& trace_fn,
                                            double t_end, double dt) {
    return detail::rk4_positive(
        gamma0,
        [lambda_e, &trace_fn](double t, double g) {
            return -4.0 * lambda_e * g + 2.0 * trace_fn(t);
        },
        t_end, dt);
}

// gamma_t = e^{-4 lambda_e t} gamma_0 + (sigma^2 / 2 lambda_e)(1 - e^{-4 lambda_e t});
// exact under a constant noise trace. lambda_e = 0 has no stationary value and
// is signalled (the trace-driven growth is linear there).
inline double gamma_closed_form(double gamma0, double lambda_e, double sigma2, double t) {
    if (lambda_e <= 0.0)
        throw std::invalid_argument(
            "closed form needs lambda_e > 0; use gamma0 + 2 sigma^2 t for lambda_e = 0");
    const double decay = std::exp(-4.0 * lambda_e * t);
    return decay * gamma0 + (sigma2 / (2.0 * lambda_e)) * (1.0 - decay);
}

// Stationary effective LR sqrt(2 lambda_e / sigma^2): the long-run value of
// gamma^{-1/2} = eta / ||W||^2.
inline double stationary_effective_lr(double lambda_e, double sigma2) {
    if (lambda_e <= 0.0 || sigma2 <= 0.0)
        throw std::invalid_argument("stationary effective LR needs positive inputs");
    return std::sqrt(2.0 * lambda_e / sigma2);
}

// ---------------------------------------------------------------------------
// Euler-Maruyama integration of the weight SDE
// ---------------------------------------------------------------------------

enum class NoiseMode {
    EmpiricalBatch,         // resample minibatch gradient noise at W
    ConstantTracePerp,      // Gaussian in the hyperplane perpendicular to W,
                            // total variance sigma^2 / ||W||^2
};

struct SdeConfig {
    double dt = 0.0;        // 0 selects the default step
    double eta = 0.1;
    double lambda_e = 0.0;
    NoiseMode mode = NoiseMode::ConstantTracePerp;
    std::size_t batch_size = 1;  // empirical mode
    double sigma2 = 1.0;         // constant-trace mode: Tr at the unit sphere

    double effective_dt() const {
        if (dt > 0.0) return dt;
        // keeps >= 1000 steps per equilibrium timescale, and never outruns eta
        const double by_rate = (lambda_e > 0.0) ? 1e-4 / lambda_e : eta;
        return std::min(by_rate, eta);
    }

    void validate() const {
        const double h = effective_dt();
        if (h <= 0.0) throw std::invalid_argument("time step must be positive");
        if (lambda_e < 0.0) throw std::invalid_argument("lambda_e must be >= 0");
        if (1.0 - 2.0 * lambda_e * h <= 0.0)
            throw std::invalid_argument("time step too large for this lambda_e");
    }
};

// Gaussian draw in the hyperplane perpendicular to W with E||xi||^2 =
// sigma2 / ||W||^2 (isotropic within the hyperplane; the trace obeys the
// c^{-2} covariance scaling of scale-invariant losses).
inline ParamVector perp_gaussian_noise(const ParamVector& W, double sigma2, Rng& rng) {
    const double G = W.squared_norm();
    if (G < kOriginGuard * kOriginGuard) throw OriginError(std::sqrt(G));
    const std::size_t d = W.size();
    if (d < 2) throw std::invalid_argument("perpendicular noise needs dimension >= 2");
    ParamVector xi(rng.gaussian_vector(d));
    xi.axpy(-xi.dot(W) / G, W);
    xi *= std::sqrt(sigma2 / (G * static_cast<double>(d - 1)));
    return xi;
}

// One Euler-Maruyama step of
//   dW = -eta (grad L(W) dt + Sigma_W^{1/2} dB) - lambda_e W dt.
inline ParamVector em_step_weight_sde(const SdeConfig& cfg, const Objective& obj,
                                      const ParamVector& W, Rng& rng) {
    cfg.validate();
    const double h = cfg.effective_dt();
    const double n = W.norm();
    if (n < kOriginGuard) throw OriginError(n);

    ParamVector xi = (cfg.mode == NoiseMode::EmpiricalBatch)
                         ? sample_gradient_noise(obj, W, cfg.batch_size, rng)
                         : perp_gaussian_noise(W, cfg.sigma2, rng);

    ParamVector next = (1.0 - cfg.lambda_e * h) * W;
    next.axpy(-cfg.eta * h, obj.full_grad(W));
    next.axpy(-cfg.eta * std::sqrt(h), xi);
    return next;
}

// ---------------------------------------------------------------------------
// Recorded SDE runs
// ---------------------------------------------------------------------------

struct SdeRunRecord {
    std::vector<double> t;
    std::vector<double> G;          // ||W||^2
    std::vector<double> gamma;      // (G/eta)^2
    std::vector<double> eff_lr;     // eta / G
    std::vector<double> trace_est;  // per-step noise trace estimate at the unit sphere
};

inline SdeRunRecord run_weight_sde(const SdeConfig& cfg, const Objective& obj, ParamVector W,
                                   double t_end, Rng& rng, std::size_t record_every = 1) {
    cfg.validate();
    const double h = cfg.effective_dt();
    SdeRunRecord rec;
    const auto record = [&](double t) {
        const double G = W.squared_norm();
        rec.t.push_back(t);
        rec.G.push_back(G);
        rec.gamma.push_back((G / cfg.eta) * (G / cfg.eta));
        rec.eff_lr.push_back(cfg.eta / G);
        double tr = cfg.sigma2;
        if (cfg.mode == NoiseMode::EmpiricalBatch) {
            // single-draw estimate of Tr(Sigma) at the unit sphere
            ParamVector xi = sample_gradient_noise(obj, W, cfg.batch_size, rng);
            tr = xi.squared_norm() * G;
        }
        rec.trace_est.push_back(tr);
    };
    record(0.0);
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(t_end / h));
    for (std::size_t i = 0; i < n_steps; ++i) {
        W = em_step_weight_sde(cfg, obj, W, rng);
        if ((i + 1) % record_every == 0 || i + 1 == n_steps)
            record(static_cast<double>(i + 1) * h);
    }
    return rec;
}

inline void write_sde_csv(const SdeRunRecord& rec, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "t,G,gamma,eff_lr,trace_est\n";
    char buf[160];
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", rec.t[i], rec.G[i],
                      rec.gamma[i], rec.eff_lr[i], rec.trace_est[i]);
        f << buf;
    }
}

// ---------------------------------------------------------------------------
// Two-phase norm-convergence time predictor
// ---------------------------------------------------------------------------

struct TwoPhaseNormTimes {
    double direct = 0.0;
    double two_phase = 0.0;
};

// Asymptotic convergence-time expressions (unit constants) for direct
// training at eta versus a warm phase at K*eta followed by decay:
//   direct    : (1/lambda_e) max(ln r, 1)
//   two-phase : (1/(K lambda_e)) max(ln(r/K), 1) + (1/lambda_e) ln K
// where r = (G0/eta^2) * (2 lambda_e / sigma2) is the initial-to-stationary
// ratio (r = G0/eta^2 in the normalization sigma2 = 2 lambda_e).
inline TwoPhaseNormTimes two_phase_norm_time(double G0, double eta, double lambda, double K,
                                             double sigma2) {
    if (G0 <= 0.0 || eta <= 0.0 || lambda <= 0.0 || K < 1.0 || sigma2 <= 0.0)
        throw std::invalid_argument("two-phase predictor needs positive parameters and K >= 1");
    const double lambda_e = eta * lambda;
    const double r = (G0 / (eta * eta)) * (2.0 * lambda_e / sigma2);
    TwoPhaseNormTimes out;
    out.direct = (1.0 / lambda_e) * std::max(std::log(r), 1.0);
    out.two_phase = (1.0 / (K * lambda_e)) * std::max(std::log(r / K), 1.0) +
                    (1.0 / lambda_e) * std::log(K);
    return out;
}

}  // namespace silab
