#pragma once

// Ensemble and training protocols of the experiment registry, plus the
// registry itself and the plot exporter. Included at the end of
// experiments.hpp.

#include <algorithm>
#include <filesystem>
#include <set>

namespace silab {

// ---- equilibrium-tv ---------------------------------------------------------

inline ExperimentOutcome run_equilibrium_tv(const ExperimentConfig& cfg,
                                            const std::filesystem::path& out) {
    const nlohmann::json p = cfg.section("equilibrium-tv");
    const std::size_t n_trials =
        cfg.trials > 0 ? cfg.trials : detail::get_or(p, "trials", std::size_t{200});
    const double lambda_e = detail::get_or(p, "lambda_e", 0.01);
    const double eta = detail::get_or(p, "eta", 0.5);
    const std::size_t history_steps = detail::get_or(p, "history_steps", std::size_t{500});
    const std::size_t probes_n = detail::get_or(p, "probes", std::size_t{64});

    auto train = std::make_shared<SyntheticDataset>(
        make_gaussian_mixture(256, 6, 3, 2.2, derive_seed(cfg.seed, 61)));
    const SyntheticDataset test = resample_gaussian_mixture(*train, probes_n, 1);
    auto mlp = make_radial_mlp({6, 8, 3}, Activation::Tanh, train, derive_seed(cfg.seed, 62));

    std::vector<std::vector<double>> probes;
    for (std::size_t i = 0; i < test.n; ++i) {
        auto row = test.row(i);
        probes.emplace_back(row.begin(), row.end());
    }

    const std::size_t shared_steps =
        static_cast<std::size_t>(std::llround(10.0 / lambda_e));
    const std::size_t t_eq = history_steps + shared_steps;   // weak-form snapshot
    const std::size_t fine_tune_steps = detail::get_or(p, "fine_tune_steps", std::size_t{200});
    const std::size_t t_strong = t_eq + fine_tune_steps;     // strong-form snapshot

    // shared fine-tune tail: LR / 10, weight decay off
    const std::vector<ScheduleEvent> fine_tune = {
        {t_eq, ScheduleTarget::Eta, ScheduleAction::Scale, 0.1},
        {t_eq, ScheduleTarget::Lambda, ScheduleAction::Set, 0.0}};

    // history A: constant at the shared hyper-parameters
    std::vector<ScheduleEvent> ev_a = fine_tune;
    const Schedule sched_a(HyperParams{eta, lambda_e / eta}, ev_a);

    // history B: four-times-larger LR and intrinsic LR for the first
    // `history_steps`, then the shared values
    std::vector<ScheduleEvent> ev_b = {
        {history_steps, ScheduleTarget::Eta, ScheduleAction::Set, eta}};
    ev_b.insert(ev_b.end(), fine_tune.begin(), fine_tune.end());
    const Schedule sched_b(HyperParams{4.0 * eta, lambda_e / eta}, ev_b);

    EnsembleSpec spec_a;
    spec_a.n_trials = n_trials;
    spec_a.schedule = sched_a;
    spec_a.steps = t_strong;
    spec_a.batch_size = 16;
    spec_a.record_every = 100;
    spec_a.snapshot_steps = {t_eq, t_strong};
    spec_a.base_seed = derive_seed(cfg.seed, 63);

    EnsembleSpec spec_b = spec_a;
    spec_b.schedule = sched_b;
    spec_b.base_seed = derive_seed(cfg.seed, 64);

    const EnsembleResult ens_a = run_ensemble(spec_a, *mlp, train.get(), &test);
    const EnsembleResult ens_b = run_ensemble(spec_b, *mlp, train.get(), &test);

    const auto evaluate_at = [&](std::size_t step) {
        nlohmann::json j;
        const PredictionHistogram ha = collect_histograms(ens_a, *mlp, probes, step);
        const PredictionHistogram hb = collect_histograms(ens_b, *mlp, probes, step);
        const double tv = mean_tv_distance(ha, hb);
        const double baseline = tv_baseline(ha, hb, test.labels);

        const std::size_t half = n_trials / 2;
        const double floor_a = mean_tv_distance(
            histogram_from_trials(ens_a, *mlp, probes, step, 0, half),
            histogram_from_trials(ens_a, *mlp, probes, step, half, half));
        const double floor_b = mean_tv_distance(
            histogram_from_trials(ens_b, *mlp, probes, step, 0, half),
            histogram_from_trials(ens_b, *mlp, probes, step, half, half));
        const double floor = 0.5 * (floor_a + floor_b);
        j["tv"] = tv;
        j["baseline"] = baseline;
        j["noise_floor"] = floor;
        return j;
    };

    const nlohmann::json weak = evaluate_at(t_eq);
    const nlohmann::json strong = evaluate_at(t_strong);

    // TV-vs-trials curve at the weak-form snapshot
    std::ostringstream tv_csv;
    tv_csv << "n_trials,tv,baseline,noise_floor\n";
    nlohmann::json tv_curve = nlohmann::json::array();
    for (std::size_t m : {n_trials / 8, n_trials / 4, n_trials / 2, n_trials}) {
        if (m < 2) continue;
        const PredictionHistogram ha = histogram_from_trials(ens_a, *mlp, probes, t_eq, 0, m);
        const PredictionHistogram hb = histogram_from_trials(ens_b, *mlp, probes, t_eq, 0, m);
        const double tv = mean_tv_distance(ha, hb);
        const double baseline = tv_baseline(ha, hb, test.labels);
        const double floor = 0.5 * (mean_tv_distance(histogram_from_trials(ens_a, *mlp, probes,
                                                                           t_eq, 0, m / 2),
                                                     histogram_from_trials(ens_a, *mlp, probes,
                                                                           t_eq, m / 2, m / 2)) +
                                    mean_tv_distance(histogram_from_trials(ens_b, *mlp, probes,
                                                                           t_eq, 0, m / 2),
                                                     histogram_from_trials(ens_b, *mlp, probes,
                                                                           t_eq, m / 2, m / 2)));
        tv_csv << m << ',' << detail::format_double(tv) << ',' << detail::format_double(baseline)
               << ',' << detail::format_double(floor) << '\n';
        tv_curve.push_back({{"n_trials", m}, {"tv", tv}, {"baseline", baseline},
                            {"noise_floor", floor}});
    }
    detail::write_text(out / "tv_curve.csv", tv_csv.str());

    // one CSV per trial
    std::filesystem::create_directories(out / "trials");
    for (std::size_t i = 0; i < ens_a.trials.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "trial_a_%03zu.csv", i);
        write_trajectory_csv(ens_a.trials[i], (out / "trials" / name).string());
    }
    for (std::size_t i = 0; i < ens_b.trials.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "trial_b_%03zu.csv", i);
        write_trajectory_csv(ens_b.trials[i], (out / "trials" / name).string());
    }

    std::vector<Assertion> as;
    as.push_back(assert_le("weak_tv_vs_noise_floor",
                           weak["tv"].get<double>(),
                           2.0 * weak["noise_floor"].get<double>()));
    as.push_back(assert_le("weak_tv_vs_baseline", weak["tv"].get<double>(),
                           weak["baseline"].get<double>()));
    as.push_back(assert_le("strong_tv_vs_noise_floor",
                           strong["tv"].get<double>(),
                           2.0 * strong["noise_floor"].get<double>()));
    as.push_back(assert_le("strong_tv_vs_baseline", strong["tv"].get<double>(),
                           strong["baseline"].get<double>()));

    ExperimentOutcome res;
    res.summary = {{"schema_version", kSchemaVersion},
                   {"experiment", "equilibrium-tv"},
                   {"seed", cfg.seed},
                   {"n_trials", n_trials},
                   {"lambda_e", lambda_e},
                   {"weak_form", weak},
                   {"strong_form", strong},
                   {"tv_curve", tv_curve},
                   {"assertions", assertions_to_json(as)}};
    res.pass = all_pass(as);
    res.summary["pass"] = res.pass;
    return res;
}

// ---- mixing-time ------------------------------------------------------------

inline ExperimentOutcome run_mixing_time(const ExperimentConfig& cfg,
                                         const std::filesystem::path& out) {
    const nlohmann::json p = cfg.section("mixing-time");
    const std::size_t n_trials =
        cfg.trials > 0 ? cfg.trials : detail::get_or(p, "trials", std::size_t{20});
    const double perturb_factor = detail::get_or(p, "perturb_factor", 10.0);
    const std::vector<double> lambda_es = {4e-4, 2e-4, 1e-4};

    auto train = std::make_shared<SyntheticDataset>(
        make_gaussian_mixture(128, 4, 2, 1.5, derive_seed(cfg.seed, 71)));
    auto mlp = make_radial_mlp({4, 6, 2}, Activation::Tanh, train, derive_seed(cfg.seed, 72));

    // rough constant-trace estimate at the unit sphere, used only to start
    // trials near the stationary norm
    const std::size_t batch_size = 8;
    double trace_hat;
    {
        Rng rng(derive_seed(cfg.seed, 73));
        ParamVector w = mlp->init_params(1.0, rng);
        w *= 1.0 / w.norm();
        trace_hat =
            grad_noise_trace(*mlp, w, batch_size, 200, derive_seed(cfg.seed, 74)).mean;
    }

    const double eta = 0.4;
    std::ostringstream csv;
    csv << "lambda_e,inv_lambda_e,mean_steps,stderr,recovered_fraction\n";
    std::vector<double> xs, ys;
    nlohmann::json per_lambda = nlohmann::json::array();

    for (const double le : lambda_es) {
        const double Gstar = eta * std::sqrt(trace_hat / (2.0 * le));
        const std::size_t warmup = static_cast<std::size_t>(std::llround(1.0 / le));
        const std::size_t horizon =
            warmup + static_cast<std::size_t>(std::llround(3.0 / le));

        Schedule sched(HyperParams{eta, le / eta},
                       {{warmup, ScheduleTarget::Eta, ScheduleAction::Scale, 1.0 / perturb_factor},
                        {warmup, ScheduleTarget::Lambda, ScheduleAction::Scale, perturb_factor}});

        EnsembleSpec spec;
        spec.n_trials = n_trials;
        spec.schedule = sched;
        spec.steps = horizon;
        spec.batch_size = batch_size;
        spec.base_seed = derive_seed(cfg.seed, 75 + static_cast<std::uint64_t>(1e7 * le));
        spec.init.scale = 1.0;  // rescaled below through a fixed draw per trial

        // start at the stationary norm: barely any equilibration transient
        MixingCriterion crit;
        std::vector<double> steps;
        std::size_t recovered = 0;
        for (std::size_t trial = 0; trial < n_trials; ++trial) {
            EnsembleSpec one = spec;
            Rng init_rng(derive_seed(derive_seed(spec.base_seed, trial), 0));
            ParamVector w0 = mlp->init_params(1.0, init_rng);
            w0 *= std::sqrt(Gstar) / w0.norm();
            one.init.kind = InitSpec::Kind::Fixed;
            one.init.fixed = w0;
            const MixingMeasurement m = measure_mixing_time(one, *mlp, warmup, crit, trial);
            steps.push_back(static_cast<double>(m.steps));
            if (m.recovered) ++recovered;
        }
        const double mean_steps = mean(steps);
        const double se = standard_error(steps);
        xs.push_back(1.0 / le);
        ys.push_back(mean_steps);
        csv << detail::format_double(le) << ',' << detail::format_double(1.0 / le) << ','
            << detail::format_double(mean_steps) << ',' << detail::format_double(se) << ','
            << detail::format_double(static_cast<double>(recovered) /
                                     static_cast<double>(n_trials))
            << '\n';
        per_lambda.push_back({{"lambda_e", le},
                              {"mean_steps", mean_steps},
                              {"stderr", se},
                              {"recovered_fraction",
                               static_cast<double>(recovered) / static_cast<double>(n_trials)}});
    }
    detail::write_text(out / "mixing.csv", csv.str());

    const LinearFit fit = linear_fit(xs, ys);
    std::vector<Assertion> as;
    as.push_back(assert_ge("mixing_linear_fit_r_squared", fit.r_squared, 0.9));
    as.push_back(assert_ge("mixing_slope_positive", fit.slope, 0.0));

    ExperimentOutcome res;
    res.summary = {{"schema_version", kSchemaVersion},
                   {"experiment", "mixing-time"},
                   {"seed", cfg.seed},
                   {"trials_per_lambda", n_trials},
                   {"per_lambda", per_lambda},
                   {"fit",
                    {{"slope", fit.slope}, {"intercept", fit.intercept},
                     {"r_squared", fit.r_squared}}},
                   {"assertions", assertions_to_json(as)}};
    res.pass = all_pass(as);
    res.summary["pass"] = res.pass;
    return res;
}

// ---- two-phase ----------------------------------------------------------------

inline ExperimentOutcome run_two_phase_experiment(const ExperimentConfig& cfg,
                                                  const std::filesystem::path& out) {
    const nlohmann::json p = cfg.section("two-phase");

    auto train = std::make_shared<SyntheticDataset>(
        make_gaussian_mixture(200, 4, 2, 12.0, derive_seed(cfg.seed, 81)));
    const SyntheticDataset test = resample_gaussian_mixture(*train, 100, 1);
    auto linear = make_radial_mlp({4, 2}, Activation::Tanh, train, derive_seed(cfg.seed, 82));

    TwoPhaseSpec spec;
    spec.eta = detail::get_or(p, "eta", 0.5);
    spec.lambda_e = detail::get_or(p, "lambda_e", 0.02);
    spec.lr_drop = detail::get_or(p, "lr_drop", 10.0);
    spec.batch_size = 16;
    spec.max_phase1_steps = detail::get_or(p, "max_phase1_steps", std::size_t{20000});
    spec.max_phase2_steps = detail::get_or(p, "max_phase2_steps", std::size_t{20000});
    spec.record_every = 1;

    const TwoPhaseResult res2 =
        run_two_phase(spec, *linear, OptimizerKind::SgdWd, derive_seed(cfg.seed, 83),
                      train.get(), &test);

    const DatasetMetrics final_train = evaluate_dataset(*linear, res2.final_w, *train);

    // phase-2 norm must be non-decreasing to rounding (weight decay is off)
    double worst_drop = 0.0;
    for (std::size_t i = 1; i < res2.phase2.points.size(); ++i) {
        const double prev = res2.phase2.points[i - 1].norm_sq;
        const double cur = res2.phase2.points[i].norm_sq;
        worst_drop = std::max(worst_drop, (prev - cur) / prev);
    }

    write_trajectory_csv(res2.phase1, (out / "phase1.csv").string());
    write_trajectory_csv(res2.phase2, (out / "phase2.csv").string());

    std::vector<Assertion> as;
    as.push_back(assert_ge("phase2_train_accuracy", final_train.accuracy, 0.995));
    as.push_back(assert_le("phase2_norm_monotone_worst_drop", worst_drop, 1e-12));
    as.push_back(assert_ge("phase1_converged", res2.phase1_converged ? 1.0 : 0.0, 1.0));

    ExperimentOutcome res;
    res.summary = {{"schema_version", kSchemaVersion},
                   {"experiment", "two-phase"},
                   {"seed", cfg.seed},
                   {"transition_step", res2.transition_step},
                   {"phase1_converged", res2.phase1_converged},
                   {"phase2_reached_loss", res2.phase2_reached_loss},
                   {"final_train_accuracy", final_train.accuracy},
                   {"final_train_loss", final_train.loss},
                   {"assertions", assertions_to_json(as)}};
    res.pass = all_pass(as);
    res.summary["pass"] = res.pass;
    return res;
}

// ---- init-scale ----------------------------------------------------------------

inline ExperimentOutcome run_init_scale(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out) {
    const nlohmann::json p = cfg.section("init-scale");
    const double init_scale = detail::get_or(p, "init_scale", 1000.0);
    const double lambda_e = detail::get_or(p, "lambda_e", 0.005);
    const double warm_lambda_e = detail::get_or(p, "warm_lambda_e", 0.1);
    const std::size_t warm_steps = detail::get_or(p, "warm_steps", std::size_t{600});
    const std::size_t cap = detail::get_or(p, "step_cap", std::size_t{900});
    const double eta = 0.5;

    auto train = std::make_shared<SyntheticDataset>(
        make_gaussian_mixture(128, 4, 2, 2.0, derive_seed(cfg.seed, 91)));
    auto mlp = make_radial_mlp({4, 6, 2}, Activation::Tanh, train, derive_seed(cfg.seed, 92));

    const std::size_t window = std::max<std::size_t>(50, static_cast<std::size_t>(0.25 / lambda_e));

    // norm-convergence detection restricted to steps >= start
    const auto converges_within = [&](const Schedule& sched, std::size_t start,
                                      std::size_t budget, std::uint64_t seed_stream,
                                      std::vector<double>* norms_out) {
        EnsembleSpec spec;
        spec.n_trials = 1;
        spec.schedule = sched;
        spec.steps = budget;
        spec.batch_size = 8;
        spec.init.scale = init_scale;
        spec.base_seed = derive_seed(cfg.seed, seed_stream);

        const std::vector<double> eff = run_effective_lr_series(spec, *mlp, 0);
        detail::NormConvergenceDetector detector(window, 0.01);
        std::size_t converged_at = 0;
        for (std::size_t step = start; step < eff.size(); ++step) {
            const double norm_sq = sched.at(step).eta / eff[step];
            if (norms_out) norms_out->push_back(norm_sq);
            if (detector.push(norm_sq) && converged_at == 0) {
                converged_at = step;
                break;
            }
        }
        return converged_at;
    };

    // direct: the small intrinsic LR from the very beginning
    std::vector<double> norms_direct;
    const Schedule direct(HyperParams{eta, lambda_e / eta}, {});
    const std::size_t direct_at = converges_within(direct, 0, cap, 93, &norms_direct);

    // warm: a large intrinsic LR first, then the target one
    std::vector<double> norms_warm;
    const Schedule warm(HyperParams{eta, warm_lambda_e / eta},
                        {{warm_steps, ScheduleTarget::Lambda, ScheduleAction::Set,
                          lambda_e / eta}});
    const std::size_t warm_at = converges_within(warm, warm_steps, cap, 93, &norms_warm);

    std::ostringstream csv;
    csv << "step,norm_sq_direct,norm_sq_warm\n";
    for (std::size_t i = 0; i < std::max(norms_direct.size(), norms_warm.size()); ++i) {
        csv << i << ',';
        csv << (i < norms_direct.size() ? detail::format_double(norms_direct[i]) : "nan") << ',';
        csv << (i + warm_steps < norms_warm.size() + warm_steps && i < norms_warm.size()
                    ? detail::format_double(norms_warm[i])
                    : "nan")
            << '\n';
    }
    detail::write_text(out / "norms.csv", csv.str());

    std::vector<Assertion> as;
    as.push_back(assert_le("direct_converged_within_cap", direct_at > 0 ? 1.0 : 0.0, 0.0));
    as.push_back(assert_ge("warm_converged_within_cap", warm_at > 0 ? 1.0 : 0.0, 1.0));

    ExperimentOutcome res;
    res.summary = {{"schema_version", kSchemaVersion},
                   {"experiment", "init-scale"},
                   {"seed", cfg.seed},
                   {"init_scale", init_scale},
                   {"step_cap", cap},
                   {"direct_converged_at", direct_at},
                   {"warm_converged_at", warm_at},
                   {"assertions", assertions_to_json(as)}};
    res.pass = all_pass(as);
    res.summary["pass"] = res.pass;
    return res;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

inline const std::map<std::string, ExperimentRunner>& experiment_registry() {
    static const std::map<std::string, ExperimentRunner> registry = {
        {"toy-chaos", run_toy_chaos},
        {"gamma-check", run_gamma_check},
        {"equivalence", run_equivalence},
        {"equilibrium-tv", run_equilibrium_tv},
        {"mixing-time", run_mixing_time},
        {"two-phase", run_two_phase_experiment},
        {"init-scale", run_init_scale},
    };
    return registry;
}

// Runs one named experiment; writes summary.json and the experiment's CSVs
// under <out>/<name>/. Returns the process exit code.
inline int cmd_run(const std::string& name, const ExperimentConfig& cfg) {
    const auto& registry = experiment_registry();
    const auto it = registry.find(name);
    if (it == registry.end()) {
        std::fprintf(stderr, "unknown experiment: %s\n", name.c_str());
        return 2;
    }
    const std::filesystem::path out = std::filesystem::path(cfg.out) / name;
    std::filesystem::create_directories(out);
    const ExperimentOutcome outcome = it->second(cfg, out);
    detail::write_text(out / "summary.json", outcome.summary.dump(2) + "\n");
    for (const auto& a : outcome.summary.at("assertions"))
        std::printf("%s %s: %.6g %s %.6g\n", a.at("pass").get<bool>() ? "PASS" : "FAIL",
                    a.at("name").get<std::string>().c_str(), a.at("value").get<double>(),
                    a.at("relation").get<std::string>().c_str(),
                    a.at("threshold").get<double>());
    return outcome.pass ? 0 : 1;
}

inline int cmd_verify(const ExperimentConfig& cfg) {
    bool negative_control = false;
    if (cfg.raw.contains("verify") && cfg.raw.at("verify").contains("include_negative_control"))
        negative_control = cfg.raw.at("verify").at("include_negative_control").get<bool>();

    const std::vector<VerifyCheck> checks = run_verify_suite(cfg.seed, negative_control);
    const nlohmann::json report = verify_report_json(checks, cfg.seed);

    std::filesystem::create_directories(cfg.out);
    detail::write_text(std::filesystem::path(cfg.out) / "verify_report.json",
                       report.dump(2) + "\n");
    bool all = true;
    for (const auto& c : checks) {
        std::printf("%s %s/%s: %.3g (tol %.3g)\n", c.pass ? "PASS" : "FAIL", c.objective.c_str(),
                    c.check.c_str(), c.value, c.tol);
        all = all && c.pass;
    }
    return all ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Plot export: long-format (series, x, y) CSVs from known result files
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace detail

// Scans `results_dir` recursively for recognized result files and emits
// plot-ready long-format CSVs under <results_dir>/plots/. Exit 1 when nothing
// is recognized.
inline int cmd_export_plots(const std::string& results_dir) {
    namespace fs = std::filesystem;
    const fs::path root(results_dir);
    if (!fs::exists(root)) {
        std::fprintf(stderr, "results directory not found: %s\n", results_dir.c_str());
        return 2;
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    const fs::path plots = root / "plots";
    std::size_t emitted = 0;

    const auto emit = [&](const std::string& name, const std::string& body) {
        fs::create_directories(plots);
        detail::write_text(plots / name, body);
        ++emitted;
    };

    for (const auto& path : files) {
        const std::string fname = path.filename().string();
        if (fname == "trajectory.csv") {
            const auto rows = detail::read_csv(path);
            if (rows.empty() || rows[0] != std::vector<std::string>{"t", "G", "gamma", "eff_lr",
                                                                    "trace_est"})
                continue;
            const std::string stem = path.parent_path().filename().string();
            const auto series = [&](std::size_t col, const std::string& series_name) {
                std::ostringstream os;
                os << "series,x,y\n";
                for (std::size_t i = 1; i < rows.size(); ++i)
                    os << stem << ':' << series_name << ',' << rows[i][0] << ',' << rows[i][col]
                       << '\n';
                return os.str();
            };
            emit("plot_norm.csv", series(1, "G"));
            emit("plot_gamma.csv", series(2, "gamma"));
            emit("plot_eff_lr.csv", series(3, "eff_lr"));
        } else if (fname == "tv_curve.csv") {
            const auto rows = detail::read_csv(path);
            std::ostringstream os;
            os << "series,x,y\n";
            for (std::size_t i = 1; i < rows.size(); ++i) {
                os << "tv," << rows[i][0] << ',' << rows[i][1] << '\n';
                os << "baseline," << rows[i][0] << ',' << rows[i][2] << '\n';
                os << "noise_floor," << rows[i][0] << ',' << rows[i][3] << '\n';
            }
            emit("plot_tv_vs_trials.csv", os.str());
        } else if (fname == "divergence.csv") {
            const auto rows = detail::read_csv(path);
            std::ostringstream os;
            os << "series,x,y\n";
            for (std::size_t i = 1; i < rows.size(); ++i) {
                os << "gd," << rows[i][0] << ',' << rows[i][1] << '\n';
                os << "gf," << rows[i][0] << ',' << rows[i][2] << '\n';
            }
            emit("plot_divergence.csv", os.str());
        } else if (fname == "mixing.csv") {
            const auto rows = detail::read_csv(path);
            std::ostringstream os;
            os << "series,x,y\n";
            for (std::size_t i = 1; i < rows.size(); ++i)
                os << "mixing_steps," << rows[i][1] << ',' << rows[i][2] << '\n';
            emit("plot_mixing.csv", os.str());
        } else if (fname == "phase1.csv" || fname == "phase2.csv" ||
                   fname.rfind("trial_", 0) == 0) {
            const auto rows = detail::read_csv(path);
            if (rows.empty() || rows[0].size() < 10 || rows[0][0] != "step") continue;
            const std::string stem = fname.substr(0, fname.size() - 4);
            std::ostringstream os;
            os << "series,x,y\n";
            for (std::size_t i = 1; i < rows.size(); ++i) {
                os << stem << ":train_acc," << rows[i][0] << ',' << rows[i][4] << '\n';
                os << stem << ":test_acc," << rows[i][0] << ',' << rows[i][6] << '\n';
                os << stem << ":norm_sq," << rows[i][0] << ',' << rows[i][7] << '\n';
                os << stem << ":eff_lr," << rows[i][0] << ',' << rows[i][8] << '\n';
            }
            emit("plot_" + stem + ".csv", os.str());
        }
    }

    if (emitted == 0) {
        std::fprintf(stderr, "no recognized result files under %s\n", results_dir.c_str());
        return 1;
    }
    std::printf("exported %zu plot files to %s\n", emitted, (plots).string().c_str());
    return 0;
}

}  // namespace silab
