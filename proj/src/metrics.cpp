#include "disccal/metrics.hpp"

#include <cmath>

#include "disccal/errors.hpp"

namespace disccal {

namespace {

void require_same_grid(const RomTable& y, const RomTable& yhat) {
    if (!(y.grid == yhat.grid)) throw GridMismatch("prediction and target grids differ");
}

// Per-case sums; returns false on zero variance.
bool case_r2(std::span<const double> y, std::span<const double> yhat, double& out) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (!(ss_tot > 0.0)) return false;
    out = 1.0 - ss_res / ss_tot;
    return true;
}

} // namespace

namespace detail {

double mae_raw(std::span<const double> y, std::span<const double> yhat) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += std::abs(y[i] - yhat[i]);
    return total / static_cast<double>(y.size());
}

bool r2_mean_raw(std::span<const double> y, std::span<const double> yhat, std::size_t n_cases,
                 std::size_t n_moments, double& out) {
    double total = 0.0;
    for (std::size_t c = 0; c < n_cases; ++c) {
        double r2 = 0.0;
        if (!case_r2(y.subspan(c * n_moments, n_moments), yhat.subspan(c * n_moments, n_moments), r2)) return false;
        total += r2;
    }
    out = total / static_cast<double>(n_cases);
    return true;
}

} // namespace detail

double mae(const RomTable& y, const RomTable& yhat) {
    require_same_grid(y, yhat);
    return detail::mae_raw(y.values, yhat.values);
}

std::vector<std::pair<LoadCase, double>> r2_per_case(const RomTable& y, const RomTable& yhat) {
    require_same_grid(y, yhat);
    const std::size_t nm = y.grid.moments().size();
    std::vector<std::pair<LoadCase, double>> out;
    for (std::size_t c = 0; c < y.grid.load_cases().size(); ++c) {
        double r2 = 0.0;
        const std::span<const double> ys(y.values.data() + c * nm, nm);
        const std::span<const double> yh(yhat.values.data() + c * nm, nm);
        if (!case_r2(ys, yh, r2)) throw DegenerateVariance(std::string(to_string(y.grid.load_cases()[c])));
        out.emplace_back(y.grid.load_cases()[c], r2);
    }
    return out;
}

double r2_mean(const RomTable& y, const RomTable& yhat) {
    const auto per_case = r2_per_case(y, yhat);
    double total = 0.0;
    for (const auto& [c, r2] : per_case) total += r2;
    return total / static_cast<double>(per_case.size());
}

ScoreReport score(const RomTable& y, const RomTable& yhat) {
    ScoreReport r;
    r.mae_deg = mae(y, yhat);
    r.r2_per_load_case = r2_per_case(y, yhat);
    double total = 0.0;
    for (const auto& [c, r2] : r.r2_per_load_case) total += r2;
    r.r2_mean = total / static_cast<double>(r.r2_per_load_case.size());
    return r;
}

} // namespace disccal
