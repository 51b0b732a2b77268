#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "silab/models.hpp"
#include "silab/noise.hpp"

using namespace silab;

namespace {

std::shared_ptr<RadialMlpObjective> noise_mlp(std::uint64_t seed = 21) {
    auto data = std::make_shared<SyntheticDataset>(make_gaussian_mixture(12, 3, 2, 2.0, seed));
    return make_radial_mlp({3, 2}, Activation::Tanh, data, seed + 1);
}

// exact E ||grad(w; B) - grad(w)||^2 by enumerating all ordered batches of
// size B drawn with replacement from an n-sample dataset
double enumerate_trace(const Objective& obj, const ParamVector& w, std::size_t B) {
    const std::size_t n = obj.sample_count();
    const ParamVector mean_grad = obj.full_grad(w);
    std::size_t total = 1;
    for (std::size_t i = 0; i < B; ++i) total *= n;
    double acc = 0.0;
    for (std::size_t code = 0; code < total; ++code) {
        Batch b;
        std::size_t c = code;
        for (std::size_t i = 0; i < B; ++i) {
            b.indices.push_back(static_cast<int>(c % n));
            c /= n;
        }
        ParamVector xi = obj.grad(w, b);
        xi -= mean_grad;
        acc += xi.squared_norm();
    }
    return acc / static_cast<double>(total);
}

}  // namespace

TEST_CASE("full batch carries no sampling noise", "[noise]") {
    auto mlp = noise_mlp();
    Rng rng(22);
    ParamVector w(rng.gaussian_vector(mlp->dim()));
    const NoiseTraceEstimate est = grad_noise_trace(*mlp, w, mlp->sample_count(), 4, 99);
    CHECK(est.mean == 0.0);
    CHECK(est.stderr_ == 0.0);

    Rng rng2(23);
    const ParamVector xi = sample_gradient_noise(*mlp, w, mlp->sample_count(), rng2);
    CHECK(xi.norm() == 0.0);
}

TEST_CASE("noise trace scales as c^-2", "[noise]") {
    auto mlp = noise_mlp(31);
    Rng rng(32);
    ParamVector w(rng.gaussian_vector(mlp->dim()));
    w *= 2.0 / w.norm();
    const NoiseTraceEstimate t1 = grad_noise_trace(*mlp, w, 3, 500, 101);
    const NoiseTraceEstimate t2 = grad_noise_trace(*mlp, 2.0 * w, 3, 500, 102);
    const double se = std::sqrt(t1.stderr_ * t1.stderr_ + 16.0 * t2.stderr_ * t2.stderr_);
    CHECK(std::abs(4.0 * t2.mean - t1.mean) <= 3.0 * se);
}

TEST_CASE("batch-size halving doubles the trace (enumeration oracle)", "[noise]") {
    auto mlp = noise_mlp(41);
    Rng rng(42);
    ParamVector w(rng.gaussian_vector(mlp->dim()));
    w *= 1.5 / w.norm();

    const double exact1 = enumerate_trace(*mlp, w, 1);
    const double exact2 = enumerate_trace(*mlp, w, 2);
    CHECK(exact1 / exact2 == Catch::Approx(2.0).epsilon(1e-10));

    const NoiseTraceEstimate est1 = grad_noise_trace(*mlp, w, 1, 800, 103);
    const NoiseTraceEstimate est2 = grad_noise_trace(*mlp, w, 2, 800, 104);
    CHECK(std::abs(est1.mean - exact1) <= 3.0 * est1.stderr_);
    CHECK(std::abs(est2.mean - exact2) <= 3.0 * est2.stderr_);
    CHECK(est1.mean / est2.mean == Catch::Approx(2.0).epsilon(0.10));
}

TEST_CASE("sampled noise is perpendicular to w", "[noise]") {
    auto mlp = noise_mlp(51);
    Rng rng(52);
    ParamVector w(rng.gaussian_vector(mlp->dim()));
    for (int rep = 0; rep < 10; ++rep) {
        const ParamVector xi = sample_gradient_noise(*mlp, w, 3, rng);
        if (xi.norm() == 0.0) continue;
        CHECK(std::abs(xi.dot(w)) <= 1e-10 * xi.norm() * w.norm());
    }
}

TEST_CASE("empirical covariance trace is self-consistent", "[noise]") {
    auto mlp = noise_mlp(61);
    Rng rng(62);
    ParamVector w(rng.gaussian_vector(mlp->dim()));

    const std::size_t draws = 10000;
    double acc = 0.0, acc_sq = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double s = sample_gradient_noise(*mlp, w, 3, rng).squared_norm();
        acc += s;
        acc_sq += s * s;
    }
    const double mc_mean = acc / static_cast<double>(draws);
    const double mc_var = (acc_sq - acc * acc / static_cast<double>(draws)) /
                          static_cast<double>(draws - 1);
    const double mc_se = std::sqrt(mc_var / static_cast<double>(draws));

    const NoiseTraceEstimate est = grad_noise_trace(*mlp, w, 3, 4000, 105);
    const double se = std::sqrt(mc_se * mc_se + est.stderr_ * est.stderr_);
    CHECK(std::abs(mc_mean - est.mean) <= 3.0 * se);
}

TEST_CASE("noise estimator rejects misuse", "[noise]") {
    auto mlp = noise_mlp(71);
    Rng rng(72);
    ParamVector w(rng.gaussian_vector(mlp->dim()));
    CHECK_THROWS_AS(grad_noise_trace(*mlp, w, 0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(grad_noise_trace(*mlp, w, mlp->sample_count() + 1, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(grad_noise_trace(*mlp, w, 2, 1, 1), std::invalid_argument);
}
