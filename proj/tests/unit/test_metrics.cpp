#include <doctest.h>

#include <random>

#include "disccal/errors.hpp"
#include "disccal/metrics.hpp"

using namespace disccal;

namespace {

const LoadGrid kGrid({LoadCase::Flexion}, {1.0, 2.0, 3.0, 4.0});

RomTable table(std::vector<double> v) { return RomTable(kGrid, std::move(v)); }

RomTable random_table(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.5, 10.0);
    std::vector<double> v(20);
    for (auto& x : v) x = u(gen);
    return RomTable(LoadGrid::standard(), std::move(v));
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("r2 examples") {
    const auto y = table({1, 2, 3, 4});
    CHECK(r2_mean(y, y) == 1.0);
    CHECK(r2_mean(y, table({2, 2, 3, 4})) == doctest::Approx(0.8));
    CHECK(r2_mean(y, table({2.5, 2.5, 2.5, 2.5})) == 0.0);
    CHECK(r2_mean(y, table({4, 3, 2, 1})) == -3.0);
    CHECK(r2_mean(y, table({1.5, 2.5, 3.5, 4.5})) == doctest::Approx(0.8));
}

TEST_CASE("mae examples") {
    const auto y = table({1, 2, 3, 4});
    CHECK(mae(y, y) == 0.0);
    CHECK(mae(y, table({1.5, 2.5, 3.5, 4.5})) == 0.5);
    CHECK(mae(y, table({2, 2, 3, 3})) == 0.5);
}

TEST_CASE("per load case r2 follows grid order") {
    const LoadGrid g({LoadCase::LateralBending, LoadCase::AxialRotation}, {1.0, 2.0});
    const RomTable y(g, {1, 3, 1, 3});
    const RomTable yhat(g, {1, 3, 2, 2});
    const auto r = r2_per_case(y, yhat);
    REQUIRE(r.size() == 2);
    CHECK(r[0].first == LoadCase::LateralBending);
    CHECK(r[0].second == 1.0);
    CHECK(r[1].second == 0.0);
    CHECK(r2_mean(y, yhat) == 0.5);
    const auto s = score(y, yhat);
    CHECK(s.mae_deg == 0.5);
    CHECK(s.r2_mean == 0.5);
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(mae(table({1, 2, 3, 4}), RomTable(LoadGrid::standard(), std::vector<double>(20, 1.0))),
                    GridMismatch);
    CHECK_THROWS_AS(r2_mean(table({2, 2, 2, 2}), table({1, 2, 3, 4})), DegenerateVariance);
}

TEST_CASE("metric properties on random tables") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 500; ++trial) {
        const auto y = random_table(gen);
        const auto yhat = random_table(gen);
        REQUIRE(mae(y, yhat) >= 0.0);
        REQUIRE(mae(y, yhat) == mae(yhat, y));
        REQUIRE(r2_mean(y, yhat) <= 1.0);
        REQUIRE(r2_mean(y, y) == 1.0);
        REQUIRE(mae(y, y) == 0.0);
        // Shifting predictions by a constant c costs exactly |c| in MAE.
        auto shifted = y;
        for (auto& v : shifted.values) v += 0.25;
        REQUIRE(mae(y, shifted) == doctest::Approx(0.25).epsilon(1e-12));
    }
}

}
