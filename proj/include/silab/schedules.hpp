#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "silab/models.hpp"
#include "silab/objective.hpp"
#include "silab/optimizers.hpp"
#include "silab/param_vector.hpp"
#include "silab/rng.hpp"
#include "silab/trajectory.hpp"

namespace silab {

// ---------------------------------------------------------------------------
// Piecewise-constant hyper-parameter schedules
// ---------------------------------------------------------------------------

enum class ScheduleTarget { Eta, Lambda, LambdaE };
enum class ScheduleAction { Set, Scale };

struct ScheduleEvent {
    std::size_t step = 0;
    ScheduleTarget target = ScheduleTarget::Eta;
    ScheduleAction action = ScheduleAction::Set;
    double value = 0.0;
};

struct HyperParams {
    double eta = 0.1;
    double lambda = 0.0;
    double lambda_e() const { return eta * lambda; }
};

// Timeline of (eta | lambda | lambda_e) set/scale events over constant
// initial values. lambda_e = eta * lambda is maintained as the derived
// identity: an eta event keeps lambda, a lambda event keeps eta, and a
// lambda_e event keeps eta and rewrites lambda.
class Schedule {
public:
    Schedule() : Schedule(HyperParams{}, {}) {}

    Schedule(HyperParams init, std::vector<ScheduleEvent> events)
        : init_(init), events_(std::move(events)) {
        for (std::size_t i = 1; i < events_.size(); ++i)
            if (events_[i].step < events_[i - 1].step)
                throw std::invalid_argument("schedule events must have non-decreasing steps");
        validate();
    }

    const HyperParams& initial() const { return init_; }
    const std::vector<ScheduleEvent>& events() const { return events_; }

    // Values after applying all events with event.step <= step. Pure and
    // monotone-causal.
    HyperParams at(std::size_t step) const {
        HyperParams hp = init_;
        for (const auto& e : events_) {
            if (e.step > step) break;
            apply(hp, e);
        }
        return hp;
    }

private:
    static void apply(HyperParams& hp, const ScheduleEvent& e) {
        switch (e.target) {
            case ScheduleTarget::Eta:
                hp.eta = (e.action == ScheduleAction::Set) ? e.value : hp.eta * e.value;
                break;
            case ScheduleTarget::Lambda:
                hp.lambda = (e.action == ScheduleAction::Set) ? e.value : hp.lambda * e.value;
                break;
            case ScheduleTarget::LambdaE: {
                const double le =
                    (e.action == ScheduleAction::Set) ? e.value : hp.lambda_e() * e.value;
                hp.lambda = le / hp.eta;
                break;
            }
        }
    }

    void validate() const {
        if (init_.eta <= 0.0 || init_.lambda < 0.0)
            throw std::invalid_argument("schedule needs eta > 0 and lambda >= 0");
        // a lambda_e event and a lambda event at the same step (without an eta
        // event) contend for the same degree of freedom
        for (std::size_t i = 0; i < events_.size();) {
            std::size_t j = i;
            bool has_lambda = false, has_lambda_e = false, has_eta = false;
            while (j < events_.size() && events_[j].step == events_[i].step) {
                has_lambda |= events_[j].target == ScheduleTarget::Lambda;
                has_lambda_e |= events_[j].target == ScheduleTarget::LambdaE;
                has_eta |= events_[j].target == ScheduleTarget::Eta;
                ++j;
            }
            if (has_lambda && has_lambda_e && !has_eta)
                throw std::invalid_argument(
                    "inconsistent schedule: lambda and lambda_e set at the same step");
            i = j;
        }
        // replay to ensure eta stays positive and lambda nonnegative
        HyperParams hp = init_;
        for (const auto& e : events_) {
            apply(hp, e);
            if (hp.eta <= 0.0 || hp.lambda < 0.0)
                throw std::invalid_argument("schedule drives eta or lambda out of range");
        }
    }

    HyperParams init_;
    std::vector<ScheduleEvent> events_;
};

// LR drops by the given factors (eta -> eta / factor at each step).
inline Schedule make_step_decay(HyperParams init,
                                const std::vector<std::pair<std::size_t, double>>& drops) {
    std::vector<ScheduleEvent> ev;
    for (const auto& [step, factor] : drops) {
        if (factor <= 0.0) throw std::invalid_argument("decay factor must be positive");
        ev.push_back({step, ScheduleTarget::Eta, ScheduleAction::Scale, 1.0 / factor});
    }
    return Schedule(init, std::move(ev));
}

inline Schedule make_wd_decay(HyperParams init,
                              const std::vector<std::pair<std::size_t, double>>& drops) {
    std::vector<ScheduleEvent> ev;
    for (const auto& [step, factor] : drops) {
        if (factor <= 0.0) throw std::invalid_argument("decay factor must be positive");
        ev.push_back({step, ScheduleTarget::Lambda, ScheduleAction::Scale, 1.0 / factor});
    }
    return Schedule(init, std::move(ev));
}

// Decays eta and lambda together by the same factor at each step.
inline Schedule make_mixed_decay(HyperParams init,
                                 const std::vector<std::pair<std::size_t, double>>& drops) {
    std::vector<ScheduleEvent> ev;
    for (const auto& [step, factor] : drops) {
        if (factor <= 0.0) throw std::invalid_argument("decay factor must be positive");
        ev.push_back({step, ScheduleTarget::Eta, ScheduleAction::Scale, 1.0 / factor});
        ev.push_back({step, ScheduleTarget::Lambda, ScheduleAction::Scale, 1.0 / factor});
    }
    return Schedule(init, std::move(ev));
}

// One row of a schedule table: all events sharing a step.
struct ScheduleTableRow {
    std::size_t step = 0;
    std::vector<ScheduleEvent> actions;  // step fields are overwritten with `step`
};

inline Schedule make_table_schedule(HyperParams init, std::vector<ScheduleTableRow> rows) {
    std::sort(rows.begin(), rows.end(),
              [](const ScheduleTableRow& a, const ScheduleTableRow& b) { return a.step < b.step; });
    std::vector<ScheduleEvent> ev;
    for (auto& row : rows)
        for (auto e : row.actions) {
            e.step = row.step;
            ev.push_back(e);
        }
    return Schedule(init, std::move(ev));
}

// ---------------------------------------------------------------------------
// Schedule files (JSON)
// ---------------------------------------------------------------------------

inline std::string to_string(ScheduleTarget t) {
    switch (t) {
        case ScheduleTarget::Eta: return "eta";
        case ScheduleTarget::Lambda: return "lambda";
        default: return "lambda_e";
    }
}

inline ScheduleTarget schedule_target_from_string(const std::string& s) {
    if (s == "eta") return ScheduleTarget::Eta;
    if (s == "lambda") return ScheduleTarget::Lambda;
    if (s == "lambda_e") return ScheduleTarget::LambdaE;
    throw std::invalid_argument("unknown schedule target: " + s);
}

inline nlohmann::json schedule_to_json(const Schedule& s) {
    nlohmann::json j;
    j["init"] = {{"eta", s.initial().eta}, {"lambda", s.initial().lambda}};
    j["events"] = nlohmann::json::array();
    for (const auto& e : s.events())
        j["events"].push_back({{"step", e.step},
                               {"target", to_string(e.target)},
                               {"action", e.action == ScheduleAction::Set ? "set" : "scale"},
                               {"value", e.value}});
    return j;
}

inline Schedule schedule_from_json(const nlohmann::json& j) {
    HyperParams init;
    init.eta = j.at("init").at("eta").get<double>();
    init.lambda = j.at("init").at("lambda").get<double>();
    std::vector<ScheduleEvent> ev;
    for (const auto& je : j.at("events")) {
        ScheduleEvent e;
        e.step = je.at("step").get<std::size_t>();
        e.target = schedule_target_from_string(je.at("target").get<std::string>());
        const std::string action = je.at("action").get<std::string>();
        if (action != "set" && action != "scale")
            throw std::invalid_argument("unknown schedule action: " + action);
        e.action = (action == "set") ? ScheduleAction::Set : ScheduleAction::Scale;
        e.value = je.at("value").get<double>();
        ev.push_back(e);
    }
    return Schedule(init, std::move(ev));
}

inline void write_schedule_file(const Schedule& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << schedule_to_json(s).dump(2) << '\n';
}

inline Schedule read_schedule_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    f >> j;
    return schedule_from_json(j);
}

// ---------------------------------------------------------------------------
// Two-phase training: equilibrate at lambda_e, then drop the LR, remove
// weight decay and train the loss out.
// ---------------------------------------------------------------------------

enum class OptimizerKind { SgdWd, Momentum };

struct TwoPhaseSpec {
    double eta = 0.5;
    double lambda_e = 0.01;
    double lr_drop = 10.0;
    double momentum_beta = 0.9;
    std::size_t batch_size = 16;
    double init_scale = 1.0;

    // norm-convergence criterion: relative change of the windowed mean of
    // ||w||^2 below rel_tol; window 0 selects max(50, 1/(4 lambda_e)) steps
    std::size_t window = 0;
    double rel_tol = 0.01;
    std::size_t max_phase1_steps = 20000;

    double phase2_loss_threshold = 1e-3;
    std::size_t max_phase2_steps = 20000;
    std::size_t record_every = 10;

    std::size_t effective_window() const {
        if (window > 0) return window;
        const std::size_t by_rate =
            (lambda_e > 0.0) ? static_cast<std::size_t>(std::ceil(0.25 / lambda_e)) : 50;
        return std::max<std::size_t>(50, by_rate);
    }
};

struct TwoPhaseResult {
    TrajectoryRecord phase1;
    TrajectoryRecord phase2;
    std::size_t transition_step = 0;
    bool phase1_converged = false;
    bool phase2_reached_loss = false;
    ParamVector final_w;
};

namespace detail {

inline TrajectoryPoint make_point(std::size_t step, double eta, double lambda,
                                  const Objective& obj, const ParamVector& w,
                                  const SyntheticDataset* train, const SyntheticDataset* test) {
    TrajectoryPoint p;
    p.step = step;
    p.eta = eta;
    p.lambda = lambda;
    p.norm_sq = w.squared_norm();
    p.eff_lr = eta / p.norm_sq;
    const double nan = std::nan("");
    p.train_loss = obj.full_loss(w);
    p.train_acc = nan;
    p.test_loss = nan;
    p.test_acc = nan;
    p.trace_est = nan;
    if (train && obj.class_count() > 0) {
        const DatasetMetrics m = evaluate_dataset(obj, w, *train);
        p.train_acc = m.accuracy;
    }
    if (test && obj.class_count() > 0) {
        const DatasetMetrics m = evaluate_dataset(obj, w, *test);
        p.test_loss = m.loss;
        p.test_acc = m.accuracy;
    }
    return p;
}

// Windowed relative-change detector on ||w||^2.
class NormConvergenceDetector {
public:
    NormConvergenceDetector(std::size_t window, double rel_tol)
        : window_(window), rel_tol_(rel_tol) {}

    bool push(double norm_sq) {
        recent_.push_back(norm_sq);
        if (recent_.size() > 2 * window_) recent_.pop_front();
        if (recent_.size() < 2 * window_) return false;
        double prev = 0.0, cur = 0.0;
        for (std::size_t i = 0; i < window_; ++i) {
            prev += recent_[i];
            cur += recent_[window_ + i];
        }
        prev /= static_cast<double>(window_);
        cur /= static_cast<double>(window_);
        return std::abs(cur - prev) <= rel_tol_ * prev;
    }

private:
    std::size_t window_;
    double rel_tol_;
    std::deque<double> recent_;
};

}  // namespace detail

inline TwoPhaseResult run_two_phase(const TwoPhaseSpec& spec, const Objective& obj,
                                    OptimizerKind kind, std::uint64_t seed,
                                    const SyntheticDataset* train = nullptr,
                                    const SyntheticDataset* test = nullptr) {
    if (spec.lr_drop < 1.0) throw std::invalid_argument("lr_drop must be >= 1");
    if (spec.rel_tol <= 0.0) throw std::invalid_argument("rel_tol must be positive");

    Rng rng(derive_seed(seed, 7));
    ParamVector w(rng.gaussian_vector(obj.dim(), spec.init_scale));
    if (const auto* mlp = dynamic_cast<const RadialMlpObjective*>(&obj)) {
        Rng init_rng(derive_seed(seed, 8));
        w = mlp->init_params(spec.init_scale, init_rng);
    }

    TwoPhaseResult res;
    const double lambda1 = spec.lambda_e / spec.eta;

    SgdWdState sgd{spec.eta, spec.lambda_e, 0};
    MomentumState mom;
    mom.eta = spec.eta;
    mom.lambda = lambda1;
    mom.beta = spec.momentum_beta;
    mom.velocity = ParamVector::zeros(obj.dim());

    detail::NormConvergenceDetector detector(spec.effective_window(), spec.rel_tol);

    std::size_t step = 0;
    res.phase1.points.push_back(
        detail::make_point(step, spec.eta, lambda1, obj, w, train, test));
    for (; step < spec.max_phase1_steps; ++step) {
        const Batch b = sample_batch(obj.sample_count(), spec.batch_size, rng);
        w = (kind == OptimizerKind::SgdWd) ? sgd_wd_step(sgd, obj, w, b)
                                           : momentum_step(mom, obj, w, b);
        if ((step + 1) % spec.record_every == 0)
            res.phase1.points.push_back(
                detail::make_point(step + 1, spec.eta, lambda1, obj, w, train, test));
        if (detector.push(w.squared_norm())) {
            res.phase1_converged = true;
            ++step;
            break;
        }
    }
    res.transition_step = step;
    res.phase1.snapshots.emplace(step, w);

    // gradient-flow phase: LR / lr_drop, weight decay off
    const double eta2 = spec.eta / spec.lr_drop;
    SgdWdState sgd2{eta2, 0.0, 0};
    MomentumState mom2;
    mom2.eta = eta2;
    mom2.lambda = 0.0;
    mom2.beta = spec.momentum_beta;
    mom2.velocity = ParamVector::zeros(obj.dim());

    std::size_t p2 = 0;
    res.phase2.points.push_back(
        detail::make_point(step, eta2, 0.0, obj, w, train, test));
    for (; p2 < spec.max_phase2_steps; ++p2) {
        const Batch b = sample_batch(obj.sample_count(), spec.batch_size, rng);
        w = (kind == OptimizerKind::SgdWd) ? sgd_wd_step(sgd2, obj, w, b)
                                           : momentum_step(mom2, obj, w, b);
        if ((p2 + 1) % spec.record_every == 0)
            res.phase2.points.push_back(
                detail::make_point(step + p2 + 1, eta2, 0.0, obj, w, train, test));
        if (obj.full_loss(w) <= spec.phase2_loss_threshold) {
            res.phase2_reached_loss = true;
            break;
        }
    }
    const std::size_t final_step = step + std::min(p2 + 1, spec.max_phase2_steps);
    if (res.phase2.points.back().step != final_step)
        res.phase2.points.push_back(
            detail::make_point(final_step, eta2, 0.0, obj, w, train, test));
    res.phase2.snapshots.emplace(final_step, w);
    res.final_w = w;
    return res;
}

}  // namespace silab
