#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>

#include "silab/invariance.hpp"
#include "silab/models.hpp"
#include "silab/optimizers.hpp"

using namespace silab;

TEST_CASE("toy loss values and gradient", "[models]") {
    {
        const auto [loss, g] = toy_loss_eval(1.0, 0.0);
        CHECK(loss == 1.0);
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
    }
    {
        const auto [loss, g] = toy_loss_eval(0.0, 1.0);
        CHECK(loss == 0.0);
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
    }
    {
        const auto [loss, g] = toy_loss_eval(1.0, 1.0);
        CHECK(loss == 0.5);
        CHECK(g[0] == Catch::Approx(0.5).margin(1e-12));
        CHECK(g[1] == Catch::Approx(-0.5).margin(1e-12));
    }
    CHECK_THROWS_AS(toy_loss_eval(0.0, 0.0), OriginError);
}

TEST_CASE("gaussian mixture determinism and shape", "[models]") {
    const SyntheticDataset a = make_gaussian_mixture(30, 4, 3, 5.0, 77);
    const SyntheticDataset b = make_gaussian_mixture(30, 4, 3, 5.0, 77);
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    CHECK(a.class_means == b.class_means);

    // every class present
    std::vector<int> counts(3, 0);
    for (int y : a.labels) ++counts[static_cast<std::size_t>(y)];
    for (int c : counts) CHECK(c > 0);

    CHECK_THROWS_AS(make_gaussian_mixture(2, 4, 3, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_gaussian_mixture(10, 4, 2, -1.0, 1), std::invalid_argument);
}

TEST_CASE("zero separation is indistinguishable, large separation is separable", "[models]") {
    // separation 0: test accuracy of any trained classifier stays near 1/K
    {
        auto train = std::make_shared<SyntheticDataset>(make_gaussian_mixture(200, 2, 2, 0.0, 5));
        const SyntheticDataset test = resample_gaussian_mixture(*train, 400, 9);
        auto lin = make_radial_mlp({2, 2}, Activation::Tanh, train, 6);
        Rng rng(7);
        ParamVector w = lin->init_params(1.0, rng);
        SgdWdState st{0.2, 0.0, 0};
        for (int i = 0; i < 400; ++i) w = sgd_wd_step(st, *lin, w, full_batch(train->n));
        const DatasetMetrics m = evaluate_dataset(*lin, w, test);
        CHECK(m.accuracy < 0.5 + 0.12);
    }
    // separation 10: full-batch GD reaches > 99% train accuracy
    {
        auto train = std::make_shared<SyntheticDataset>(make_gaussian_mixture(200, 2, 2, 10.0, 8));
        auto lin = make_radial_mlp({2, 2}, Activation::Tanh, train, 9);
        Rng rng(10);
        ParamVector w = lin->init_params(1.0, rng);
        SgdWdState st{0.5, 0.0, 0};
        for (int i = 0; i < 2000; ++i) w = sgd_wd_step(st, *lin, w, full_batch(train->n));
        const DatasetMetrics m = evaluate_dataset(*lin, w, *train);
        CHECK(m.accuracy > 0.99);
    }
}

TEST_CASE("dataset CSV round trip", "[models]") {
    namespace fs = std::filesystem;
    const SyntheticDataset ds = make_gaussian_mixture(25, 3, 2, 4.0, 123);
    const fs::path path = fs::temp_directory_path() / "silab_test_dataset.csv";
    write_dataset_csv(ds, path.string());
    const SyntheticDataset back = read_dataset_csv(path.string());
    fs::remove(path);

    REQUIRE(back.n == ds.n);
    REQUIRE(back.feature_dim == ds.feature_dim);
    CHECK(back.labels == ds.labels);
    CHECK(back.inputs == ds.inputs);  // %.17g preserves doubles exactly
}

TEST_CASE("radial MLP factories validate shapes and pass invariance", "[models]") {
    auto data = std::make_shared<SyntheticDataset>(make_gaussian_mixture(24, 5, 3, 2.0, 31));
    CHECK_THROWS_AS(make_radial_mlp({4, 3}, Activation::Tanh, data, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_radial_mlp({5, 4}, Activation::Tanh, data, 1), std::invalid_argument);

    for (auto widths : {std::vector<std::size_t>{5, 3}, std::vector<std::size_t>{5, 8, 3}}) {
        auto obj = make_radial_mlp(widths, Activation::Tanh, data, 32);
        Rng rng(33);
        ParamVector w(rng.gaussian_vector(obj->dim()));
        w *= 3.0 / w.norm();
        const std::vector<double> alphas = {0.5, 3.0};
        const InvarianceReport rep = verify_scale_invariance(*obj, w, alphas, 1e-8, rng);
        CHECK(rep.worst() < 1e-8);
    }
}

TEST_CASE("radial gradient is perpendicular, scale-covariant, and matches finite differences",
          "[models]") {
    auto data = std::make_shared<SyntheticDataset>(make_gaussian_mixture(24, 4, 2, 2.0, 41));
    auto obj = make_radial_mlp({4, 5, 2}, Activation::Tanh, data, 42);
    Rng rng(43);
    for (int rep = 0; rep < 20; ++rep) {
        ParamVector w(rng.gaussian_vector(obj->dim()));
        w *= rng.uniform(0.5, 5.0) / w.norm();
        const Batch b = sample_batch(obj->sample_count(), 6, rng);
        const ParamVector g = obj->grad(w, b);

        CHECK(std::abs(g.dot(w)) <= 1e-10 * g.norm() * w.norm());

        const ParamVector g2 = obj->grad(2.0 * w, b);
        CHECK(distance(2.0 * g2, g) <= 1e-10 * g.norm());

        const ParamVector fd = finite_diff_grad(*obj, w, b, 1e-5);
        CHECK(distance(fd, g) <= 1e-6 * std::max(1.0, g.norm()));
    }
}

TEST_CASE("relu variant keeps the exact invariances", "[models]") {
    auto data = std::make_shared<SyntheticDataset>(make_gaussian_mixture(24, 4, 2, 2.0, 51));
    auto obj = make_radial_mlp({4, 5, 2}, Activation::Relu, data, 52);
    Rng rng(53);
    ParamVector w(rng.gaussian_vector(obj->dim()));
    w *= 2.0 / w.norm();
    const std::vector<double> alphas = {0.5, 2.0, 7.0};
    const InvarianceReport rep = verify_scale_invariance(*obj, w, alphas, 1e-8, rng, false);
    CHECK(rep.max_loss_dev < 1e-9);
    CHECK(rep.max_grad_scale_dev < 1e-8);
    CHECK(rep.max_perp_dev < 1e-9);
}

TEST_CASE("prediction is scale-invariant and deterministic with lowest-index ties", "[models]") {
    auto data = std::make_shared<SyntheticDataset>(make_gaussian_mixture(24, 3, 2, 2.0, 61));
    auto obj = make_radial_mlp({3, 2}, Activation::Tanh, data, 62);
    Rng rng(63);
    ParamVector w = obj->init_params(1.0, rng);

    for (int rep = 0; rep < 5; ++rep) {
        const auto x = rng.gaussian_vector(3);
        const int c = predict_class(*obj, w, x);
        CHECK(predict_class(*obj, 3.0 * w, x) == c);
        CHECK(predict_class(*obj, 0.25 * w, x) == c);
        CHECK(predict_class(*obj, w, x) == c);  // repeated call
    }

    // zero input with zero biases gives tied zero logits: class 0 wins
    const std::vector<double> zero_x(3, 0.0);
    CHECK(predict_class(*obj, w, zero_x) == 0);

    const std::vector<double> z = {1.0, 1.0, 0.5};
    CHECK(argmax_lowest_tie(z) == 0);
}

TEST_CASE("init_params scales with the multiplier and is seed-deterministic", "[models]") {
    auto data = std::make_shared<SyntheticDataset>(make_gaussian_mixture(24, 3, 2, 2.0, 71));
    auto obj = make_radial_mlp({3, 4, 2}, Activation::Tanh, data, 72);
    const ParamVector a = obj->init_params(1.0);
    const ParamVector b = obj->init_params(1.0);
    CHECK(a == b);
    const ParamVector big = obj->init_params(1000.0);
    CHECK(big.norm() == Catch::Approx(1000.0 * a.norm()));
}
