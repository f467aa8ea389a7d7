#include <doctest.h>

#include <algorithm>
#include <vector>

#include "disccal/domain.hpp"
#include "disccal/rng.hpp"
#include "disccal/sampling.hpp"

using namespace disccal;

namespace {

// Every column has exactly one value in each stratum [i/n, (i+1)/n).
bool stratified(const Eigen::MatrixXd& x) {
    const auto n = static_cast<std::size_t>(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        std::vector<int> counts(n, 0);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double v = x(i, j);
            if (!(v >= 0.0 && v < 1.0)) return false;
            const double nd = static_cast<double>(n);
            auto bin = std::min(n - 1, static_cast<std::size_t>(v * nd));
            // v * n may round across a stratum edge; settle on the exact interval
            while (bin > 0 && static_cast<double>(bin) / nd > v) --bin;
            while (bin + 1 < n && static_cast<double>(bin + 1) / nd <= v) ++bin;
            ++counts[bin];
        }
        if (std::any_of(counts.begin(), counts.end(), [](int c) { return c != 1; })) return false;
    }
    return true;
}

double ks_uniform(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - v[i]), std::abs(v[i] - static_cast<double>(i) / n)});
    return d;
}

} // namespace

TEST_SUITE("sampling") {

TEST_CASE("one stratum gives one value in [0,1)") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto x = lhs_unit({1, 1, seed});
        REQUIRE(x.rows() == 1);
        REQUIRE(x(0, 0) >= 0.0);
        REQUIRE(x(0, 0) < 1.0);
    }
}

TEST_CASE("n=4, d=2, seed 7 puts one value per quarter") {
    const auto x = lhs_unit({4, 2, 7});
    for (Eigen::Index j = 0; j < 2; ++j) {
        std::vector<int> counts(4, 0);
        for (Eigen::Index i = 0; i < 4; ++i) ++counts[static_cast<std::size_t>(x(i, j) * 4.0)];
        CHECK(counts == std::vector<int>{1, 1, 1, 1});
    }
}

TEST_CASE("n=128, d=13, seed 42 histogram has unit counts") {
    const auto x = lhs_unit({128, 13, 42});
    CHECK(x.rows() == 128);
    CHECK(x.cols() == 13);
    CHECK(stratified(x));
}

TEST_CASE("stratification and marginal uniformity over random plans") {
    std::uint64_t state = 17;
    for (int trial = 0; trial < 200; ++trial) {
        state = derive_seed(state, static_cast<std::uint64_t>(trial));
        const std::size_t n = 1 + state % 300;
        const std::size_t d = 1 + (state >> 20) % 15;
        const auto x = lhs_unit({n, d, state});
        REQUIRE(stratified(x));
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
            REQUIRE(ks_uniform(col) <= 2.0 / static_cast<double>(n));
        }
    }
}

TEST_CASE("lhs is deterministic and seed dependent") {
    CHECK(lhs_unit({50, 13, 9}) == lhs_unit({50, 13, 9}));
    CHECK(lhs_unit({50, 13, 9}) != lhs_unit({50, 13, 10}));
    const auto configs = lhs_sample(10, 4);
    CHECK(configs.size() == 10);
    CHECK(configs[0].space == Space::Normalized);
}

TEST_CASE("uniform sampling") {
    CHECK(uniform_sample(0, 1).empty());
    const auto x = uniform_unit(500, 13, 3);
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() < 1.0);
    CHECK(uniform_unit(500, 13, 3) == x);
    CHECK(uniform_unit(500, 13, 4) != x);
    const auto configs = uniform_sample(500, 3);
    for (std::size_t j = 0; j < 13; ++j) CHECK(configs[7].values[j] == x(7, static_cast<Eigen::Index>(j)));
}

TEST_CASE("config csv has an id column and parameter names") {
    const auto csv = configs_to_csv(lhs_sample(2, 1), MaterialBounds::defaults());
    CHECK(csv.rfind("id,C10n,C01n,C10a,k1,k2,kappa,k1c,k2c,k1r,k2r,alpha,alpha_c,alpha_r\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("derived seeds differ per stream") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

}
