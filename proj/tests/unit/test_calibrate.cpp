#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "disccal/calibrate.hpp"
#include "disccal/errors.hpp"
#include "disccal/metrics.hpp"
#include "disccal/parallel.hpp"
#include "disccal/sampling.hpp"
#include "helpers.hpp"

using namespace disccal;

namespace {

Eigen::MatrixXd random_search_matrix(Eigen::Index rows, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    Eigen::MatrixXd x(rows, 15);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < 15; ++j) x(i, j) = u(gen);
    return x;
}

/// One linear layer: output = a * p1 + b.
SurrogateNet linear_net(double a, double b) {
    DenseLayer l{Eigen::MatrixXd::Zero(1, 15), Eigen::VectorXd::Constant(1, b)};
    l.weight(0, 2) = a;
    SurrogateNet net(Mlp({l}, OutputActivation::Identity), NetConfig{}, Normalizer::for_rom_range(1.0, 5.0));
    net.freeze();
    return net;
}

SurrogateNet zero_net() { return linear_net(0.0, 0.2); }

RomTable surrogate_targets(const ParamVector& p) {
    return test::small_net().predict_table(MaterialConfig{p, Space::Normalized}, LoadGrid::standard());
}

ParamVector some_params(std::uint64_t seed) {
    const auto u = uniform_unit(1, 13, seed);
    ParamVector p{};
    for (std::size_t j = 0; j < 13; ++j) p[j] = u(0, static_cast<Eigen::Index>(j));
    return p;
}

} // namespace

TEST_SUITE("calibrate") {

TEST_CASE("projection examples") {
    Eigen::MatrixXd x(2, 15);
    x.setZero();
    x(0, 0) = 1.0;
    x(1, 1) = 3.0;
    x(0, 2) = 1.4;
    x(1, 2) = 1.2;
    x(0, 3) = -0.6;
    x(1, 3) = -0.2;
    x(0, 4) = 0.2;
    x(1, 4) = 0.4;
    const auto y = project(x);
    CHECK(y(0, 0) == 1.0);
    CHECK(y(1, 1) == 3.0);
    for (Eigen::Index i = 0; i < 2; ++i) {
        CHECK(y(i, 2) == 1.0);
        CHECK(y(i, 3) == 0.0);
        CHECK(y(i, 4) == doctest::Approx(0.3));
    }
}

TEST_CASE("projection properties on random matrices") {
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 2000; ++trial) {
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(gen() % 20);
        const auto x = random_search_matrix(k, gen);
        const auto y = project(x);
        REQUIRE(project(y) == y);
        REQUIRE(y.leftCols(2) == x.leftCols(2));
        REQUIRE(y.rightCols(13).minCoeff() >= 0.0);
        REQUIRE(y.rightCols(13).maxCoeff() <= 1.0);
        for (Eigen::Index i = 1; i < k; ++i) REQUIRE(y.row(i).tail(13) == y.row(0).tail(13));
        const auto t = tie_rows(x);
        REQUIRE(t.leftCols(2) == x.leftCols(2));
        for (Eigen::Index i = 1; i < k; ++i) REQUIRE(t.row(i).tail(13) == t.row(0).tail(13));
    }
}

TEST_CASE("sum exceeding examples") {
    const std::vector<double> inside{0.0, 0.5, 1.0};
    CHECK(sum_exceeding(inside) == 0.0);
    const std::vector<double> out{1.25, -0.5, 0.3};
    CHECK(sum_exceeding(out) == 0.75);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-2.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> v{u(gen), u(gen)};
        REQUIRE(sum_exceeding(v) >= 0.0);
    }
}

TEST_CASE("a single Adam step moves by eta") {
    const auto net = linear_net(2.0, 0.1);
    const LoadGrid one({LoadCase::Flexion}, {1.0});
    ParamVector init{};
    init[0] = 0.3;
    auto state = SearchState::initial(net, one, std::span<const ParamVector>(&init, 1));
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1.0);
    PgdConfig cfg;
    cfg.eta = 0.05;
    const auto next = pgd_step(state, net, y, cfg);
    CHECK(next.x(0, 2) == doctest::Approx(0.3 + 0.05 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
    CHECK(next.x.leftCols(2) == state.x.leftCols(2));
    for (Eigen::Index j = 3; j < 15; ++j) CHECK(next.x(0, j) == 0.0);

    cfg.optimizer = StepRule::VanillaGD;
    CHECK(pgd_step(state, net, y, cfg).x(0, 2) == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("zero step size or zero gradient leaves the state unchanged") {
    const auto& net = test::small_net();
    const auto grid = LoadGrid::standard();
    const ParamVector init = some_params(5);
    const auto state = SearchState::initial(net, grid, std::span<const ParamVector>(&init, 1));
    Eigen::VectorXd y(20);
    for (Eigen::Index i = 0; i < 20; ++i) y(i) = 0.1 * static_cast<double>(i);
    PgdConfig cfg;
    cfg.eta = 0.0;
    auto s = state;
    for (int i = 0; i < 5; ++i) s = pgd_step(s, net, y, cfg);
    CHECK(s.x == state.x);

    cfg.eta = 0.05;
    const auto flat = zero_net();
    const auto fs = SearchState::initial(flat, grid, std::span<const ParamVector>(&init, 1));
    CHECK(pgd_step(fs, flat, y, cfg).x == fs.x);
}

TEST_CASE("condition columns are immutable under every mode") {
    const auto& net = test::small_net();
    const auto grid = LoadGrid::standard();
    const auto targets = surrogate_targets(some_params(1));
    Eigen::VectorXd y(20);
    for (Eigen::Index i = 0; i < 20; ++i) y(i) = net.normalizer().output(targets.values[static_cast<std::size_t>(i)]);
    const std::vector<ParamVector> inits{some_params(2), some_params(3)};
    for (auto mode : {ConstraintMode::Projection, ConstraintMode::PenaltyLoss, ConstraintMode::None}) {
        PgdConfig cfg;
        cfg.constraint = mode;
        cfg.eta = 0.5;
        auto s = SearchState::initial(net, grid, inits);
        const Eigen::MatrixXd cond = s.x.leftCols(2);
        for (int i = 0; i < 20; ++i) s = pgd_step(s, net, y, cfg);
        REQUIRE(s.x.leftCols(2) == cond);
        if (mode == ConstraintMode::Projection) {
            CHECK(s.x.rightCols(13).minCoeff() >= 0.0);
            CHECK(s.x.rightCols(13).maxCoeff() <= 1.0);
        }
    }
}

TEST_CASE("no steps returns the initial draw") {
    const auto& net = test::small_net();
    PgdConfig cfg;
    cfg.restarts = 1;
    cfg.steps = 0;
    cfg.seed = 77;
    const auto res = calibrate(net, surrogate_targets(some_params(9)), cfg);
    const auto init = uniform_unit(1, 13, 77);
    for (std::size_t j = 0; j < 13; ++j) CHECK(res.calibrated.values[j] == init(0, static_cast<Eigen::Index>(j)));
    CHECK(res.loss_curve.size() == 1);
}

TEST_CASE("search leaves the surrogate untouched and stays feasible") {
    const auto& net = test::small_net();
    const auto before = net.to_json();
    PgdConfig cfg;
    cfg.restarts = 16;
    cfg.steps = 300;
    cfg.seed = 1;
    const auto p = some_params(21);
    const auto res = calibrate(net, surrogate_targets(p), cfg);
    CHECK(net.to_json() == before);
    CHECK(res.sum_exceeding == 0.0);
    for (double v : res.calibrated.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    REQUIRE(res.loss_curve.size() == 301);
    CHECK(res.loss_curve.back() <= res.loss_curve.front());
    CHECK(res.r2_mean >= 0.99);
    CHECK(res.method == "pgd");
}

TEST_CASE("results do not depend on the thread count") {
    const auto& net = test::small_net();
    PgdConfig cfg;
    cfg.restarts = 40;
    cfg.steps = 30;
    cfg.seed = 5;
    const auto targets = surrogate_targets(some_params(4));
    set_thread_limit(1);
    const auto a = result_to_json(calibrate(net, targets, cfg), MaterialBounds::defaults(), false);
    set_thread_limit(4);
    const auto b = result_to_json(calibrate(net, targets, cfg), MaterialBounds::defaults(), false);
    set_thread_limit(0);
    CHECK(a == b);
    CHECK(a == result_to_json(calibrate(net, targets, cfg), MaterialBounds::defaults(), false));
}

TEST_CASE("ties pick the lowest restart index") {
    const auto net = zero_net();
    PgdConfig cfg;
    cfg.restarts = 8;
    cfg.steps = 5;
    const auto res = calibrate(net, oracle_table(some_params(1), LoadGrid::standard()), cfg);
    CHECK(res.best_restart_index == 0);
}

TEST_CASE("constant targets are rejected") {
    const auto& net = test::small_net();
    const RomTable flat(LoadGrid::standard(), std::vector<double>(20, 2.0));
    CHECK_THROWS_AS(calibrate(net, flat, PgdConfig{}), DegenerateVariance);
    SurrogateNet unfrozen(net.mlp(), net.config(), net.normalizer());
    CHECK_THROWS_AS(calibrate(unfrozen, surrogate_targets(some_params(1)), PgdConfig{}), FrozenRequired);
    PgdConfig bad;
    bad.restarts = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("json report layout") {
    const auto& net = test::small_net();
    PgdConfig cfg;
    cfg.restarts = 2;
    cfg.steps = 3;
    const auto res = calibrate(net, surrogate_targets(some_params(6)), cfg);
    const auto j = nlohmann::json::parse(result_to_json(res, MaterialBounds::defaults(), false));
    CHECK(j.at("x_cal").at("normalized").size() == 13);
    CHECK(j.at("x_cal").at("physical").size() == 13);
    CHECK(j.at("metrics").at("r2_per_load_case").size() == 4);
    CHECK(j.at("table").size() == 20);
    CHECK(j.at("search").at("loss_curve").size() == 4);
    CHECK_FALSE(j.contains("wall_time_s"));
    CHECK(nlohmann::json::parse(result_to_json(res, MaterialBounds::defaults(), true)).contains("wall_time_s"));
    CHECK(parse_constraint_mode(to_string(ConstraintMode::PenaltyLoss)) == ConstraintMode::PenaltyLoss);
}

}
