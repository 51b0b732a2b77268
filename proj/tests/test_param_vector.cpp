#include <catch_amalgamated.hpp>

#include "silab/param_vector.hpp"
#include "silab/rng.hpp"

using namespace silab;

TEST_CASE("arithmetic and norms", "[param_vector]") {
    ParamVector a({1.0, 2.0, 2.0});
    ParamVector b({0.5, -1.0, 1.0});

    CHECK((a + b).values() == std::vector<double>{1.5, 1.0, 3.0});
    CHECK((a - b).values() == std::vector<double>{0.5, 3.0, 1.0});
    CHECK((2.0 * a).values() == std::vector<double>{2.0, 4.0, 4.0});
    CHECK(a.dot(b) == Catch::Approx(0.5 - 2.0 + 2.0));
    CHECK(a.squared_norm() == Catch::Approx(9.0));
    CHECK(a.norm() == Catch::Approx(3.0));

    ParamVector c = a;
    c.axpy(2.0, b);
    CHECK(c.values() == std::vector<double>{2.0, 0.0, 4.0});
}

TEST_CASE("dimension mismatches are rejected", "[param_vector]") {
    ParamVector a({1.0, 2.0});
    ParamVector b({1.0, 2.0, 3.0});
    CHECK_THROWS_AS(a + b, std::invalid_argument);
    CHECK_THROWS_AS(a.dot(b), std::invalid_argument);
    CHECK_THROWS_AS(a.axpy(1.0, b), std::invalid_argument);
}

TEST_CASE("direction normalizes and guards the origin", "[param_vector]") {
    ParamVector w({3.0, 4.0});
    const ParamVector u = direction(w);
    CHECK(u[0] == Catch::Approx(0.6));
    CHECK(u[1] == Catch::Approx(0.8));
    CHECK(u.norm() == Catch::Approx(1.0));

    CHECK_THROWS_AS(direction(ParamVector::zeros(2)), OriginError);
    CHECK_THROWS_AS(direction(ParamVector({1e-13, 0.0})), OriginError);
}

TEST_CASE("seed derivation separates streams", "[param_vector]") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(1, 0) == derive_seed(1, 0));

    Rng a(7), b(7);
    CHECK(a.gaussian() == b.gaussian());
    CHECK(a.uniform_int(0, 100) == b.uniform_int(0, 100));
}
