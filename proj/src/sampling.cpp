#include "disccal/sampling.hpp"

#include <cmath>
#include <numeric>
#include <span>

#include "disccal/errors.hpp"
#include "disccal/rng.hpp"
#include "text_io.hpp"

namespace disccal {

Eigen::MatrixXd lhs_unit(const SamplePlan& plan) {
    if (plan.n == 0 || plan.d == 0) throw Error("LHS plan needs n >= 1 and d >= 1");
    const std::size_t n = plan.n;
    Rng rng(plan.seed);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(plan.d));
    std::vector<std::size_t> strata(n);
    for (std::size_t j = 0; j < plan.d; ++j) {
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        rng.shuffle(std::span(strata));
        for (std::size_t i = 0; i < n; ++i) {
            const double lo = static_cast<double>(strata[i]) / static_cast<double>(n);
            const double hi = static_cast<double>(strata[i] + 1) / static_cast<double>(n);
            double v = lo + rng.uniform() * (hi - lo);
            // Rounding can land exactly on the upper edge.
            if (v >= hi) v = std::nextafter(hi, 0.0);
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return out;
}

Eigen::MatrixXd uniform_unit(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    // Row-major draw order so a prefix of rows is stable when n grows.
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = rng.uniform();
    return out;
}

namespace {

std::vector<MaterialConfig> to_configs(const Eigen::MatrixXd& m) {
    std::vector<MaterialConfig> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < kParamCount; ++j)
            out[static_cast<std::size_t>(i)].values[j] = m(i, static_cast<Eigen::Index>(j));
    return out;
}

} // namespace

std::vector<MaterialConfig> lhs_sample(std::size_t n, std::uint64_t seed) {
    return to_configs(lhs_unit({n, kParamCount, seed}));
}

std::vector<MaterialConfig> uniform_sample(std::size_t n, std::uint64_t seed) {
    return to_configs(uniform_unit(n, kParamCount, seed));
}

std::string configs_to_csv(const std::vector<MaterialConfig>& configs, const MaterialBounds& bounds) {
    std::string out = "id";
    for (const auto& name : bounds.names) out += "," + name;
    out += '\n';
    for (std::size_t i = 0; i < configs.size(); ++i) {
        out += std::to_string(i);
        for (double v : configs[i].values) out += "," + detail::format_double(v);
        out += '\n';
    }
    return out;
}

} // namespace disccal
