#include <catch_amalgamated.hpp>

#include <memory>

#include "silab/invariance.hpp"
#include "silab/models.hpp"
#include "silab/rng.hpp"

using namespace silab;

namespace {

std::shared_ptr<RadialMlpObjective> test_mlp(std::uint64_t seed = 11) {
    auto data = std::make_shared<SyntheticDataset>(make_gaussian_mixture(24, 4, 3, 2.0, seed));
    return make_radial_mlp({4, 6, 3}, Activation::Tanh, data, seed + 1);
}

// g(w) = c . w
class LinearField final : public ScalarField {
public:
    explicit LinearField(ParamVector c) : c_(std::move(c)) {}
    double value(const ParamVector& w) const override { return c_.dot(w); }
    ParamVector gradient(const ParamVector&) const override { return c_; }

private:
    ParamVector c_;
};

// g(w) = (1/2) w^T A w with symmetric A
class QuadraticField final : public ScalarField {
public:
    explicit QuadraticField(std::vector<std::vector<double>> a) : a_(std::move(a)) {}
    double value(const ParamVector& w) const override {
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            for (std::size_t j = 0; j < w.size(); ++j) s += w[i] * a_[i][j] * w[j];
        return 0.5 * s;
    }
    ParamVector gradient(const ParamVector& w) const override {
        ParamVector g(w.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            for (std::size_t j = 0; j < w.size(); ++j) g[i] += a_[i][j] * w[j];
        return g;
    }
    double quadratic_form(const ParamVector& v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = 0; j < v.size(); ++j) s += v[i] * a_[i][j] * v[j];
        return s;
    }

private:
    std::vector<std::vector<double>> a_;
};

QuadraticField random_quadratic(std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> a(dim, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) a[i][j] = a[j][i] = rng.gaussian();
    return QuadraticField(a);
}

}  // namespace

TEST_CASE("toy loss invariance report is exact at powers of two", "[invariance]") {
    ToyLoss2D toy;
    Rng rng(5);
    const std::vector<double> alphas = {2.0};
    const InvarianceReport rep =
        verify_scale_invariance(toy, ParamVector({1.0, 1.0}), alphas, 1e-10, rng, false);
    CHECK(rep.max_loss_dev <= 1e-10);
    CHECK(rep.max_grad_scale_dev <= 1e-10);
    CHECK(rep.max_perp_dev <= 1e-10);
}

TEST_CASE("alpha = 1 gives exactly zero deviations", "[invariance]") {
    auto mlp = test_mlp();
    Rng rng(6);
    ParamVector w(rng.gaussian_vector(mlp->dim()));
    const std::vector<double> alphas = {1.0};
    const InvarianceReport rep = verify_scale_invariance(*mlp, w, alphas, 1e-12, rng, false);
    CHECK(rep.max_loss_dev == 0.0);
    CHECK(rep.max_grad_scale_dev == 0.0);
}

TEST_CASE("radial MLP passes the invariance suite", "[invariance]") {
    auto mlp = test_mlp();
    Rng rng(7);
    const std::vector<double> alphas = {0.5, 3.0};
    for (int rep_i = 0; rep_i < 3; ++rep_i) {
        ParamVector w(rng.gaussian_vector(mlp->dim()));
        w *= rng.uniform(2.0, 8.0) / w.norm();
        const InvarianceReport rep = verify_scale_invariance(*mlp, w, alphas, 1e-8, rng);
        CHECK(rep.max_loss_dev < 1e-8);
        CHECK(rep.max_grad_scale_dev < 1e-8);
        CHECK(rep.max_perp_dev < 1e-8);
        CHECK(rep.max_hessian_scale_dev < 1e-8);
    }
}

TEST_CASE("invariance preconditions", "[invariance]") {
    ToyLoss2D toy;
    Rng rng(8);
    const std::vector<double> bad_alpha = {-1.0};
    CHECK_THROWS_AS(
        verify_scale_invariance(toy, ParamVector({1.0, 1.0}), bad_alpha, 1e-8, rng),
        std::invalid_argument);
    const std::vector<double> alphas = {2.0};
    CHECK_THROWS_AS(verify_scale_invariance(toy, ParamVector::zeros(2), alphas, 1e-8, rng),
                    OriginError);
}

TEST_CASE("finite differences recover the toy gradient", "[invariance]") {
    ToyLoss2D toy;
    const ParamVector fd = finite_diff_grad(toy, ParamVector({1.0, 1.0}), full_batch(1), 1e-5);
    CHECK(fd[0] == Catch::Approx(0.5).margin(1e-6));
    CHECK(fd[1] == Catch::Approx(-0.5).margin(1e-6));
    CHECK_THROWS_AS(finite_diff_grad(toy, ParamVector({1.0, 1.0}), full_batch(1), 0.0),
                    std::invalid_argument);
}

TEST_CASE("finite differences on a quadratic are O(h^2) exact", "[invariance]") {
    // test-only non-scale-invariant fixture: loss = ||w||^2 / 2, grad = w
    class Quad final : public Objective {
    public:
        std::size_t dim() const override { return 3; }
        std::size_t sample_count() const override { return 1; }
        double loss(const ParamVector& w, const Batch&) const override {
            return 0.5 * w.squared_norm();
        }
        ParamVector grad(const ParamVector& w, const Batch&) const override { return w; }
    } quad;

    const ParamVector w({0.3, -1.2, 2.0});
    const ParamVector fd = finite_diff_grad(quad, w, full_batch(1), 1e-5);
    for (std::size_t i = 0; i < 3; ++i) CHECK(fd[i] == Catch::Approx(w[i]).margin(1e-9));
}

TEST_CASE("analytic MLP gradient matches the finite-difference oracle", "[invariance]") {
    auto mlp = test_mlp(13);
    Rng rng(14);
    for (int rep = 0; rep < 20; ++rep) {
        ParamVector w(rng.gaussian_vector(mlp->dim()));
        w *= rng.uniform(0.5, 4.0) / w.norm();
        const Batch b = sample_batch(mlp->sample_count(), 5, rng);
        const ParamVector g = mlp->grad(w, b);
        const ParamVector fd = finite_diff_grad(*mlp, w, b, 1e-5);
        CHECK(distance(fd, g) <= std::max(1e-6, 1e-4 * g.norm()));
    }
}

TEST_CASE("radial Hessian identity for a linear base", "[invariance]") {
    Rng rng(15);
    const std::size_t d = 5;
    LinearField g(ParamVector(rng.gaussian_vector(d)));
    ParamVector w(rng.gaussian_vector(d));
    // v perpendicular to w
    ParamVector v(rng.gaussian_vector(d));
    v.axpy(-v.dot(w) / w.squared_norm(), w);
    const double dev = hessian_perp_identity_check(g, w, v, 1e-9);
    CHECK(dev < 1e-7);
}

TEST_CASE("radial Hessian identity: zero probe is trivially zero", "[invariance]") {
    Rng rng(16);
    LinearField g(ParamVector(rng.gaussian_vector(4)));
    const ParamVector w(rng.gaussian_vector(4));
    CHECK(hessian_perp_identity_check(g, w, ParamVector::zeros(4), 1e-9) == 0.0);
}

TEST_CASE("radial Hessian identity for random quadratics", "[invariance]") {
    Rng rng(17);
    const std::size_t d = 6;
    for (int rep = 0; rep < 10; ++rep) {
        const QuadraticField g = random_quadratic(d, rng);
        ParamVector w(rng.gaussian_vector(d));
        w *= rng.uniform(0.8, 3.0) / w.norm();
        ParamVector v(rng.gaussian_vector(d));
        v.axpy(-v.dot(w) / w.squared_norm(), w);
        v *= 1.0 / v.norm();

        const double dev = hessian_perp_identity_check(g, w, v, 1e-9);
        CHECK(dev < 1e-6);

        // cross-check the right side against the exact quadratic Hessian
        const ParamVector u = direction(w);
        const double exact_right =
            (g.quadratic_form(v) - u.dot(g.gradient(u)) * v.squared_norm()) / w.squared_norm();

        ParamVector up = w;
        up.axpy(hvp_step(w), v);
        ParamVector down = w;
        down.axpy(-hvp_step(w), v);
        ParamVector hfv = radial_field_gradient(g, up);
        hfv -= radial_field_gradient(g, down);
        hfv *= 1.0 / (2.0 * hvp_step(w));
        CHECK(hfv.dot(v) == Catch::Approx(exact_right).margin(1e-6));
    }
}

TEST_CASE("non-perpendicular probe is rejected", "[invariance]") {
    Rng rng(18);
    LinearField g(ParamVector(rng.gaussian_vector(4)));
    const ParamVector w({1.0, 0.0, 0.0, 0.0});
    const ParamVector v({1.0, 1.0, 0.0, 0.0});
    CHECK_THROWS_AS(hessian_perp_identity_check(g, w, v, 1e-9), std::invalid_argument);
}
