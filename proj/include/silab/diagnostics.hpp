#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "silab/models.hpp"
#include "silab/objective.hpp"
#include "silab/optimizers.hpp"
#include "silab/param_vector.hpp"
#include "silab/rng.hpp"
#include "silab/schedules.hpp"
#include "silab/sde.hpp"
#include "silab/trajectory.hpp"

namespace silab {

// ---------------------------------------------------------------------------
// Ensembles of independent trials
// ---------------------------------------------------------------------------

struct InitSpec {
    enum class Kind { GaussianScaled, Fixed };
    Kind kind = Kind::GaussianScaled;
    double scale = 1.0;          // multiplier on the per-layer 1/fan_in init
    ParamVector fixed;           // Kind::Fixed

    ParamVector draw(const Objective& obj, Rng& rng) const {
        if (kind == Kind::Fixed) {
            if (fixed.size() != obj.dim())
                throw std::invalid_argument("fixed init dimension mismatch");
            return fixed;
        }
        if (const auto* mlp = dynamic_cast<const RadialMlpObjective*>(&obj))
            return mlp->init_params(scale, rng);
        return ParamVector(rng.gaussian_vector(obj.dim(), scale));
    }
};

struct EnsembleSpec {
    std::size_t n_trials = 200;
    InitSpec init;
    Schedule schedule;
    OptimizerKind kind = OptimizerKind::SgdWd;
    double momentum_beta = 0.9;
    std::size_t steps = 1000;
    std::size_t batch_size = 16;
    std::size_t record_every = 100;
    std::vector<std::size_t> snapshot_steps;
    std::uint64_t base_seed = 1;

    void validate() const {
        if (n_trials < 1) throw std::invalid_argument("ensemble needs at least one trial");
    }
};

// One training run, deterministic in (spec, trial_index).
inline TrajectoryRecord run_trial(const EnsembleSpec& spec, const Objective& obj,
                                  std::size_t trial_index,
                                  const SyntheticDataset* train = nullptr,
                                  const SyntheticDataset* test = nullptr) {
    spec.validate();
    const std::uint64_t trial_seed = derive_seed(spec.base_seed, trial_index);
    Rng init_rng(derive_seed(trial_seed, 0));
    Rng batch_rng(derive_seed(trial_seed, 1));

    ParamVector w = spec.init.draw(obj, init_rng);

    MomentumState mom;
    mom.beta = spec.momentum_beta;
    mom.velocity = ParamVector::zeros(obj.dim());

    TrajectoryRecord rec;
    const auto record = [&](std::size_t step) {
        const HyperParams hp = spec.schedule.at(step);
        rec.points.push_back(detail::make_point(step, hp.eta, hp.lambda, obj, w, train, test));
    };
    const auto snapshot = [&](std::size_t step) {
        if (std::find(spec.snapshot_steps.begin(), spec.snapshot_steps.end(), step) !=
            spec.snapshot_steps.end())
            rec.snapshots.emplace(step, w);
    };

    record(0);
    snapshot(0);
    for (std::size_t step = 0; step < spec.steps; ++step) {
        const HyperParams hp = spec.schedule.at(step);
        const Batch b = sample_batch(obj.sample_count(), spec.batch_size, batch_rng);
        if (spec.kind == OptimizerKind::SgdWd) {
            SgdWdState st{hp.eta, hp.lambda_e(), step};
            w = sgd_wd_step(st, obj, w, b);
        } else {
            mom.eta = hp.eta;
            mom.lambda = hp.lambda;
            w = momentum_step(mom, obj, w, b);
        }
        if ((step + 1) % spec.record_every == 0 || step + 1 == spec.steps) record(step + 1);
        snapshot(step + 1);
    }
    return rec;
}

struct EnsembleResult {
    std::vector<TrajectoryRecord> trials;
};

// Trials are independent; they run on a small thread pool and are collected
// in trial-index order, so the result is independent of interleaving.
inline EnsembleResult run_ensemble(const EnsembleSpec& spec, const Objective& obj,
                                   const SyntheticDataset* train = nullptr,
                                   const SyntheticDataset* test = nullptr,
                                   std::size_t n_threads = 0) {
    spec.validate();
    if (n_threads == 0)
        n_threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    EnsembleResult out;
    out.trials.resize(spec.n_trials);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t workers_n = std::min(n_threads, spec.n_trials);
    for (std::size_t t = 0; t < workers_n; ++t)
        workers.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= spec.n_trials) return;
                out.trials[i] = run_trial(spec, obj, i, train, test);
            }
        });
    for (auto& th : workers) th.join();
    return out;
}

// ---------------------------------------------------------------------------
// Prediction histograms and total-variation distance
// ---------------------------------------------------------------------------

// Per-probe class-prediction counts over a trial ensemble: the empirical
// stand-in for the output distribution at a fixed step.
struct PredictionHistogram {
    std::size_t n_trials = 0;
    std::size_t class_count = 0;
    std::vector<std::vector<int>> counts;  // per probe, per class
};

inline PredictionHistogram collect_histograms(const EnsembleResult& ensemble,
                                              const Objective& obj,
                                              const std::vector<std::vector<double>>& probes,
                                              std::size_t at_step) {
    PredictionHistogram hist;
    hist.n_trials = ensemble.trials.size();
    hist.class_count = obj.class_count();
    hist.counts.assign(probes.size(), std::vector<int>(hist.class_count, 0));
    for (const auto& trial : ensemble.trials) {
        const ParamVector& w = trial.snapshot_at(at_step);
        for (std::size_t p = 0; p < probes.size(); ++p)
            ++hist.counts[p][static_cast<std::size_t>(predict_class(obj, w, probes[p]))];
    }
    return hist;
}

inline PredictionHistogram histogram_from_trials(const EnsembleResult& ensemble,
                                                 const Objective& obj,
                                                 const std::vector<std::vector<double>>& probes,
                                                 std::size_t at_step, std::size_t first,
                                                 std::size_t count) {
    EnsembleResult slice;
    for (std::size_t i = first; i < first + count && i < ensemble.trials.size(); ++i)
        slice.trials.push_back(ensemble.trials[i]);
    return collect_histograms(slice, obj, probes, at_step);
}

// Mean over probes of the per-probe total variation (1/2) sum_k |p_k - q_k|
// between empirical class frequencies.
inline double mean_tv_distance(const PredictionHistogram& a, const PredictionHistogram& b) {
    if (a.counts.size() != b.counts.size() || a.class_count != b.class_count)
        throw std::invalid_argument("histograms cover different probes or classes");
    if (a.counts.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t p = 0; p < a.counts.size(); ++p) {
        double tv = 0.0;
        for (std::size_t k = 0; k < a.class_count; ++k)
            tv += std::abs(static_cast<double>(a.counts[p][k]) / static_cast<double>(a.n_trials) -
                           static_cast<double>(b.counts[p][k]) / static_cast<double>(b.n_trials));
        total += 0.5 * tv;
    }
    return total / static_cast<double>(a.counts.size());
}

// Sum of the two ensembles' mean test errors on the probes: the total
// variation the pair would show if their error sets were disjoint.
inline double tv_baseline(const PredictionHistogram& a, const PredictionHistogram& b,
                          std::span<const int> labels) {
    if (labels.size() != a.counts.size() || labels.size() != b.counts.size())
        throw std::invalid_argument("labels do not cover the probes");
    const auto mean_error = [&](const PredictionHistogram& h) {
        double err = 0.0;
        for (std::size_t p = 0; p < h.counts.size(); ++p) {
            const double correct = static_cast<double>(h.counts[p][static_cast<std::size_t>(labels[p])]) /
                                   static_cast<double>(h.n_trials);
            err += 1.0 - correct;
        }
        return err / static_cast<double>(h.counts.size());
    };
    return mean_error(a) + mean_error(b);
}

// ---------------------------------------------------------------------------
// Mixing time after an intrinsic-LR-preserving perturbation
// ---------------------------------------------------------------------------

// Steps the trial exactly like run_trial (same seeding, same update path) but
// records only the effective LR eta/||w||^2 per step.
inline std::vector<double> run_effective_lr_series(const EnsembleSpec& spec, const Objective& obj,
                                                   std::size_t trial_index) {
    spec.validate();
    const std::uint64_t trial_seed = derive_seed(spec.base_seed, trial_index);
    Rng init_rng(derive_seed(trial_seed, 0));
    Rng batch_rng(derive_seed(trial_seed, 1));
    ParamVector w = spec.init.draw(obj, init_rng);

    MomentumState mom;
    mom.beta = spec.momentum_beta;
    mom.velocity = ParamVector::zeros(obj.dim());

    std::vector<double> eff;
    eff.reserve(spec.steps + 1);
    eff.push_back(spec.schedule.at(0).eta / w.squared_norm());
    for (std::size_t step = 0; step < spec.steps; ++step) {
        const HyperParams hp = spec.schedule.at(step);
        const Batch b = sample_batch(obj.sample_count(), spec.batch_size, batch_rng);
        if (spec.kind == OptimizerKind::SgdWd) {
            SgdWdState st{hp.eta, hp.lambda_e(), step};
            w = sgd_wd_step(st, obj, w, b);
        } else {
            mom.eta = hp.eta;
            mom.lambda = hp.lambda;
            w = momentum_step(mom, obj, w, b);
        }
        eff.push_back(spec.schedule.at(step + 1).eta / w.squared_norm());
    }
    return eff;
}

struct MixingCriterion {
    double band = 0.05;            // +- fraction of the pre-perturbation mean
    std::size_t smooth_window = 0; // 0: max(50, 1/(8 lambda_e)) steps
    std::size_t dwell = 0;         // 0: smooth_window
};

struct MixingMeasurement {
    std::size_t steps = 0;
    bool recovered = false;
};

// Runs one trial of `spec` whose schedule perturbs (eta / c, lambda * c) at
// `perturb_step`, and measures how many steps the smoothed effective LR needs
// to re-enter and stay within the band around its pre-perturbation trailing
// mean. The perturbation preserves lambda_e, so the equilibrium is unchanged.
inline MixingMeasurement measure_mixing_time(const EnsembleSpec& spec, const Objective& obj,
                                             std::size_t perturb_step,
                                             const MixingCriterion& criterion,
                                             std::size_t trial_index) {
    if (perturb_step > 0) {
        const double before = spec.schedule.at(perturb_step - 1).lambda_e();
        const double after = spec.schedule.at(perturb_step).lambda_e();
        if (std::abs(after - before) > 1e-12 * std::max(before, after))
            throw std::invalid_argument("perturbation must preserve lambda_e");
    }

    const double lambda_e = spec.schedule.at(perturb_step).lambda_e();
    std::size_t window = criterion.smooth_window;
    if (window == 0)
        window = std::max<std::size_t>(
            50, lambda_e > 0.0 ? static_cast<std::size_t>(0.125 / lambda_e) : 50);
    std::size_t dwell = criterion.dwell == 0 ? window : criterion.dwell;

    const std::vector<double> eff = run_effective_lr_series(spec, obj, trial_index);
    if (perturb_step >= eff.size()) throw std::invalid_argument("perturbation beyond trajectory");

    std::vector<double> prefix(eff.size() + 1, 0.0);
    for (std::size_t i = 0; i < eff.size(); ++i) prefix[i + 1] = prefix[i] + eff[i];

    // pre-perturbation trailing mean
    const std::size_t pre_lo = perturb_step > window ? perturb_step - window : 0;
    const double pre_mean =
        (prefix[perturb_step] - prefix[pre_lo]) / static_cast<double>(perturb_step - pre_lo);

    // trailing-window smoothed effective LR after the perturbation
    const auto smoothed = [&](std::size_t i) {
        const std::size_t lo = i > window ? i - window : 0;
        return (prefix[i + 1] - prefix[lo]) / static_cast<double>(i - lo + 1);
    };

    std::size_t in_band_since = eff.size();
    for (std::size_t i = perturb_step; i < eff.size(); ++i) {
        const bool in_band = std::abs(smoothed(i) - pre_mean) <= criterion.band * pre_mean;
        if (in_band && in_band_since == eff.size()) in_band_since = i;
        if (!in_band) in_band_since = eff.size();
        if (in_band_since != eff.size() && i - in_band_since + 1 >= dwell)
            return {in_band_since - perturb_step, true};
    }
    return {eff.size() - perturb_step, false};
}

// ---------------------------------------------------------------------------
// Chaos of full-batch GD with weight decay
// ---------------------------------------------------------------------------

struct ChaosResult {
    std::vector<double> direction_distance;  // d_t = ||dir(w_t) - dir(w'_t)||
    std::size_t origin_events = 0;
};

// Twin full-batch GD+WD trajectories from w0 and w0 + delta * (random unit
// vector); returns the per-step direction distances. Near-origin gradient
// evaluations are skipped and counted, not fatal.
inline ChaosResult chaos_divergence(const Objective& obj, const ParamVector& w0, double delta,
                                    std::size_t steps, double eta, double lambda, Rng& rng) {
    if (delta < 0.0) throw std::invalid_argument("delta must be >= 0");
    ParamVector a = w0;
    ParamVector b = w0;
    if (delta > 0.0) {
        ParamVector u(rng.gaussian_vector(w0.size()));
        u *= 1.0 / u.norm();
        b.axpy(delta, u);
    }

    ChaosResult res;
    const auto gd_step = [&](ParamVector& w) {
        ParamVector g = ParamVector::zeros(w.size());
        if (w.norm() >= kOriginGuard) {
            g = obj.full_grad(w);
        } else {
            ++res.origin_events;
        }
        ParamVector next = (1.0 - eta * lambda) * w;
        next.axpy(-eta, g);
        w = next;
    };

    const auto dir_dist = [&]() {
        if (a.norm() < kOriginGuard || b.norm() < kOriginGuard) {
            ++res.origin_events;
            return 2.0;  // maximal direction separation marker
        }
        return distance(direction(a), direction(b));
    };

    res.direction_distance.push_back(dir_dist());
    for (std::size_t t = 0; t < steps; ++t) {
        gd_step(a);
        gd_step(b);
        res.direction_distance.push_back(dir_dist());
    }
    return res;
}

// Gradient-flow surrogate of the same twin experiment: RK4 on
// dw/dt = -eta (grad L(w) + lambda w), with local step halving keeping the
// increment below 5% of the norm. Time is measured in GD-step units.
inline ChaosResult gradient_flow_divergence(const Objective& obj, const ParamVector& w0,
                                            double delta, double t_end, double dt, double eta,
                                            double lambda, Rng& rng) {
    ParamVector a = w0;
    ParamVector b = w0;
    if (delta > 0.0) {
        ParamVector u(rng.gaussian_vector(w0.size()));
        u *= 1.0 / u.norm();
        b.axpy(delta, u);
    }

    const auto rhs = [&](const ParamVector& w) {
        ParamVector f = obj.full_grad(w);
        f.axpy(lambda, w);
        f *= -eta;
        return f;
    };
    const auto flow_to_next_unit = [&](ParamVector& w, double horizon) {
        double t = 0.0;
        while (t < horizon - 1e-12) {
            const ParamVector k1 = rhs(w);
            double h = std::min(dt, horizon - t);
            const double k1n = k1.norm();
            if (k1n > 0.0) h = std::min(h, 0.05 * w.norm() / k1n);
            if (h < 1e-15) throw std::runtime_error("flow step underflow");
            ParamVector w2 = w;
            w2.axpy(0.5 * h, k1);
            const ParamVector k2 = rhs(w2);
            ParamVector w3 = w;
            w3.axpy(0.5 * h, k2);
            const ParamVector k3 = rhs(w3);
            ParamVector w4 = w;
            w4.axpy(h, k3);
            const ParamVector k4 = rhs(w4);
            w.axpy(h / 6.0, k1);
            w.axpy(h / 3.0, k2);
            w.axpy(h / 3.0, k3);
            w.axpy(h / 6.0, k4);
            t += h;
        }
    };

    ChaosResult res;
    res.direction_distance.push_back(distance(direction(a), direction(b)));
    const std::size_t units = static_cast<std::size_t>(std::llround(t_end));
    for (std::size_t t = 0; t < units; ++t) {
        flow_to_next_unit(a, 1.0);
        flow_to_next_unit(b, 1.0);
        res.direction_distance.push_back(distance(direction(a), direction(b)));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Snapshot diagnostics
// ---------------------------------------------------------------------------

inline ParamVector swa_average(std::span<const ParamVector> snapshots) {
    if (snapshots.size() < 2) throw std::invalid_argument("need at least 2 snapshots");
    ParamVector avg = snapshots[0];
    for (std::size_t i = 1; i < snapshots.size(); ++i) avg += snapshots[i];
    avg *= 1.0 / static_cast<double>(snapshots.size());
    return avg;
}

inline std::vector<std::vector<double>> pairwise_distance_matrix(
    std::span<const ParamVector> snapshots) {
    if (snapshots.size() < 2) throw std::invalid_argument("need at least 2 snapshots");
    std::vector<std::vector<double>> m(snapshots.size(), std::vector<double>(snapshots.size(), 0.0));
    for (std::size_t i = 0; i < snapshots.size(); ++i)
        for (std::size_t j = i + 1; j < snapshots.size(); ++j)
            m[i][j] = m[j][i] = distance(snapshots[i], snapshots[j]);
    return m;
}

}  // namespace silab
