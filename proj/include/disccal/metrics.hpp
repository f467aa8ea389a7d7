#pragma once

#include <span>
#include <utility>
#include <vector>

#include "disccal/domain.hpp"

namespace disccal {

struct ScoreReport {
    double mae_deg = 0.0;
    /// One entry per grid load case, in grid order.
    std::vector<std::pair<LoadCase, double>> r2_per_load_case;
    double r2_mean = 0.0;
};

/// Mean absolute error over all cells. Throws GridMismatch on differing grids.
double mae(const RomTable& y, const RomTable& yhat);

/// Coefficient of determination over moments, per load case:
/// R2_c = 1 - sum_m (y - yhat)^2 / sum_m (y - mean_c(y))^2.
/// Throws DegenerateVariance when y is constant within a load case.
std::vector<std::pair<LoadCase, double>> r2_per_case(const RomTable& y, const RomTable& yhat);

/// Arithmetic mean of r2_per_case.
double r2_mean(const RomTable& y, const RomTable& yhat);

ScoreReport score(const RomTable& y, const RomTable& yhat);

namespace detail {
/// Unchecked kernels over row-major (case x moment) value spans.
double mae_raw(std::span<const double> y, std::span<const double> yhat);
/// Returns false if some load case has zero target variance.
bool r2_mean_raw(std::span<const double> y, std::span<const double> yhat, std::size_t n_cases,
                 std::size_t n_moments, double& out);
} // namespace detail

} // namespace disccal
