#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "disccal/domain.hpp"

namespace disccal {

struct SamplePlan {
    std::size_t n = 1;
    std::size_t d = kParamCount;
    std::uint64_t seed = 0;
};

/// Latin hypercube over [0,1)^d: for every column the n values fall one per
/// stratum [i/n, (i+1)/n), with a uniform offset inside the stratum and an
/// independent permutation per column. Returns an n x d matrix.
Eigen::MatrixXd lhs_unit(const SamplePlan& plan);

/// i.i.d. uniform [0,1)^d, n x d.
Eigen::MatrixXd uniform_unit(std::size_t n, std::size_t d, std::uint64_t seed);

/// 13-dimensional LHS as normalized configs.
std::vector<MaterialConfig> lhs_sample(std::size_t n, std::uint64_t seed);

std::vector<MaterialConfig> uniform_sample(std::size_t n, std::uint64_t seed);

/// CSV with header `id,<name1>,...,<name13>`, one row per config. Values are
/// written in the config's own space.
std::string configs_to_csv(const std::vector<MaterialConfig>& configs, const MaterialBounds& bounds);

} // namespace disccal
