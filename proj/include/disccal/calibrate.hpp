#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disccal/domain.hpp"
#include "disccal/mlp.hpp"
#include "disccal/surrogate.hpp"

namespace disccal {

enum class ConstraintMode {
    Projection,   ///< row mean, clip to [0,1], broadcast
    PenaltyLoss,  ///< row mean only; loss += weight * sum_exceeding
    None,         ///< row mean only
};

enum class StepRule { Adam, VanillaGD };

std::string_view to_string(ConstraintMode mode);
ConstraintMode parse_constraint_mode(std::string_view text);

struct PgdConfig {
    double eta = 0.05;
    std::size_t steps = 300;
    std::size_t restarts = 500;
    LossKind loss = LossKind::L1;
    ConstraintMode constraint = ConstraintMode::Projection;
    double penalty_weight = 1.0;
    StepRule optimizer = StepRule::Adam;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One or more stacked search matrices. Each restart owns `rows_per_restart`
/// consecutive rows [c, m, p1..p13]; the condition columns never change.
struct SearchState {
    Eigen::MatrixXd x;
    Eigen::MatrixXd adam_m;  ///< first moments of the parameter block
    Eigen::MatrixXd adam_v;  ///< second moments
    long step = 0;
    std::size_t rows_per_restart = 0;

    std::size_t restarts() const { return static_cast<std::size_t>(x.rows()) / rows_per_restart; }

    /// Parameter row of restart r (all its rows agree after a projection).
    ParamVector parameters(std::size_t restart) const;

    /// One restart on `grid`, parameter block set to `init`, fresh Adam state.
    static SearchState initial(const SurrogateNet& net, const LoadGrid& grid, std::span<const ParamVector> inits);
};

/// Projection onto identical feasible rows: the parameter block (columns 2..)
/// is replaced by the column means clipped to [0,1], repeated on every row.
/// Condition columns are copied unchanged. Idempotent bit for bit.
Eigen::MatrixXd project(const Eigen::MatrixXd& x);

/// Row-mean tying without clipping (used by the unconstrained ablations).
Eigen::MatrixXd tie_rows(const Eigen::MatrixXd& x);

/// sum_j max(0, v_j - 1) + max(0, -v_j) for normalized values.
double sum_exceeding(std::span<const double> values);

/// Per-restart search loss at the current state. `targets` are scaled RoM
/// values, one per row of a single restart.
std::vector<double> search_loss(const SearchState& state, const SurrogateNet& net, const Eigen::VectorXd& targets,
                                const PgdConfig& config);

/// One optimizer step on the parameter block using dL/dX from the frozen
/// surrogate, followed by the configured constraint handling.
SearchState pgd_step(SearchState state, const SurrogateNet& net, const Eigen::VectorXd& targets,
                     const PgdConfig& config);

struct CalibrationResult {
    std::string method;
    MaterialConfig calibrated;  ///< normalized
    std::vector<std::pair<LoadCase, double>> per_load_case_r2;
    double r2_mean = 0.0;
    double mae_deg = 0.0;
    double sum_exceeding = 0.0;
    std::size_t restarts_run = 0;
    std::size_t best_restart_index = 0;
    std::size_t steps = 0;
    std::size_t generations_run = 0;
    double wall_time_s = 0.0;
    /// Search loss of the winning restart at steps 0..T.
    std::vector<double> loss_curve;
    /// Best R2 of each generation (GA only).
    std::vector<double> best_fitness;
    RomTable targets{LoadGrid::standard(), std::vector<double>(20, 0.0)};
    RomTable predicted{LoadGrid::standard(), std::vector<double>(20, 0.0)};  ///< surrogate RoM at `calibrated`
};

/// Multi-restart PGD against a frozen surrogate. Restarts start from seeded
/// uniform draws, run as one batch and the one with the highest mean R2
/// (lowest index on ties) is returned. Throws DegenerateVariance if some
/// load case of `targets` is constant.
CalibrationResult calibrate(const SurrogateNet& net, const RomTable& targets, const PgdConfig& config);

/// Fills metrics and predictions for a given parameter vector.
CalibrationResult score_parameters(const SurrogateNet& net, const RomTable& targets, const ParamVector& x,
                                   std::string method);

/// JSON report: x_cal in both spaces, metrics and the predicted-vs-target
/// table. Wall time is only written when include_timing is set, so reports
/// from identical runs are byte-identical.
std::string result_to_json(const CalibrationResult& result, const MaterialBounds& bounds, bool include_timing);

} // namespace disccal
