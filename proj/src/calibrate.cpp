#include "disccal/calibrate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "disccal/errors.hpp"
#include "disccal/metrics.hpp"
#include "disccal/parallel.hpp"
#include "disccal/sampling.hpp"
#include "text_io.hpp"

namespace disccal {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;
constexpr Eigen::Index kCond = static_cast<Eigen::Index>(kConditionCount);
constexpr Eigen::Index kParams = static_cast<Eigen::Index>(kParamCount);
// Restarts per batched work item. Fixed so results do not depend on the thread count.
constexpr std::size_t kRestartBlock = 16;

// Mean of one column slice that is exact when all entries are equal.
double stable_mean(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double anchor = v(0);
    double offset = 0.0;
    for (Eigen::Index i = 1; i < v.size(); ++i) offset += v(i) - anchor;
    return anchor + offset / static_cast<double>(v.size());
}

void tie_block(Eigen::Ref<Eigen::MatrixXd> block, bool clip) {
    for (Eigen::Index j = kCond; j < block.cols(); ++j) {
        double mean = stable_mean(block.col(j));
        if (clip) mean = std::clamp(mean, 0.0, 1.0);
        block.col(j).setConstant(mean);
    }
}

void apply_constraint(SearchState& s, ConstraintMode mode) {
    const auto k = static_cast<Eigen::Index>(s.rows_per_restart);
    for (Eigen::Index r = 0; r < s.x.rows(); r += k)
        tie_block(s.x.middleRows(r, k), mode == ConstraintMode::Projection);
}

// d(sum_exceeding)/dv
double exceed_slope(double v) { return v > 1.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double exceed_of_row(const Eigen::MatrixXd& x, Eigen::Index row) {
    double total = 0.0;
    for (Eigen::Index j = kCond; j < x.cols(); ++j) {
        const double v = x(row, j);
        total += std::max(0.0, v - 1.0) + std::max(0.0, -v);
    }
    return total;
}

// Loss per restart from scaled predictions.
std::vector<double> losses_from(const Eigen::VectorXd& pred, const Eigen::VectorXd& targets, std::size_t k,
                                const SearchState& s, const PgdConfig& config) {
    const std::size_t n = static_cast<std::size_t>(pred.size()) / k;
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double d = pred(static_cast<Eigen::Index>(r * k + i)) - targets(static_cast<Eigen::Index>(i));
            total += config.loss == LossKind::L1 ? std::abs(d) : d * d;
        }
        out[r] = total / static_cast<double>(k);
        if (config.constraint == ConstraintMode::PenaltyLoss)
            out[r] += config.penalty_weight * exceed_of_row(s.x, static_cast<Eigen::Index>(r * k));
    }
    return out;
}

void check_targets(const SearchState& s, const Eigen::VectorXd& targets) {
    if (s.rows_per_restart == 0 || s.x.rows() % static_cast<Eigen::Index>(s.rows_per_restart) != 0)
        throw ShapeError("search state rows are not a whole number of restarts");
    if (s.x.cols() != static_cast<Eigen::Index>(kInputDim)) throw ShapeError("search matrix must have 15 columns");
    if (targets.size() != static_cast<Eigen::Index>(s.rows_per_restart))
        throw ShapeError("target length must equal rows per restart");
}

Eigen::VectorXd tile(const Eigen::VectorXd& targets, std::size_t copies) {
    Eigen::VectorXd out(targets.size() * static_cast<Eigen::Index>(copies));
    for (std::size_t c = 0; c < copies; ++c) out.segment(static_cast<Eigen::Index>(c) * targets.size(), targets.size()) = targets;
    return out;
}

} // namespace

std::string_view to_string(ConstraintMode mode) {
    switch (mode) {
        case ConstraintMode::Projection: return "projection";
        case ConstraintMode::PenaltyLoss: return "penalty";
        case ConstraintMode::None: return "none";
    }
    return "unknown";
}

ConstraintMode parse_constraint_mode(std::string_view text) {
    if (text == "projection") return ConstraintMode::Projection;
    if (text == "penalty") return ConstraintMode::PenaltyLoss;
    if (text == "none") return ConstraintMode::None;
    throw Error("unknown constraint mode '" + std::string(text) + "'");
}

void PgdConfig::validate() const {
    if (!(eta >= 0.0)) throw Error("eta must be non-negative");
    if (restarts == 0) throw Error("need at least one restart");
    if (!(penalty_weight >= 0.0)) throw Error("penalty weight must be non-negative");
}

ParamVector SearchState::parameters(std::size_t restart) const {
    ParamVector p{};
    const auto row = static_cast<Eigen::Index>(restart * rows_per_restart);
    for (Eigen::Index j = 0; j < kParams; ++j) p[static_cast<std::size_t>(j)] = x(row, kCond + j);
    return p;
}

SearchState SearchState::initial(const SurrogateNet& net, const LoadGrid& grid, std::span<const ParamVector> inits) {
    const std::size_t k = grid.cell_count();
    SearchState s;
    s.rows_per_restart = k;
    s.x.resize(static_cast<Eigen::Index>(k * inits.size()), static_cast<Eigen::Index>(kInputDim));
    for (std::size_t r = 0; r < inits.size(); ++r)
        s.x.middleRows(static_cast<Eigen::Index>(r * k), static_cast<Eigen::Index>(k)) = net.encode(inits[r], grid);
    s.adam_m = Eigen::MatrixXd::Zero(s.x.rows(), kParams);
    s.adam_v = Eigen::MatrixXd::Zero(s.x.rows(), kParams);
    return s;
}

Eigen::MatrixXd project(const Eigen::MatrixXd& x) {
    if (x.rows() < 1 || x.cols() < kCond) throw ShapeError("projection needs at least one row and two condition columns");
    Eigen::MatrixXd out = x;
    tie_block(out, true);
    return out;
}

Eigen::MatrixXd tie_rows(const Eigen::MatrixXd& x) {
    if (x.rows() < 1 || x.cols() < kCond) throw ShapeError("row tying needs at least one row and two condition columns");
    Eigen::MatrixXd out = x;
    tie_block(out, false);
    return out;
}

double sum_exceeding(std::span<const double> values) {
    double total = 0.0;
    for (double v : values) total += std::max(0.0, v - 1.0) + std::max(0.0, -v);
    return total;
}

std::vector<double> search_loss(const SearchState& state, const SurrogateNet& net, const Eigen::VectorXd& targets,
                                const PgdConfig& config) {
    check_targets(state, targets);
    return losses_from(net.forward(state.x), targets, state.rows_per_restart, state, config);
}

namespace {

// One update; `losses` receives the per-restart loss before the update.
void step_in_place(SearchState& s, const SurrogateNet& net, const Eigen::VectorXd& targets, const PgdConfig& config,
                   std::vector<double>* losses) {
    const std::size_t k = s.rows_per_restart;
    const auto rows = s.x.rows();
    const double inv_k = 1.0 / static_cast<double>(k);

    Eigen::VectorXd pred;
    Mlp::Tape tape;
    if (!net.frozen()) throw FrozenRequired();
    const auto& out = net.mlp().forward(s.x, tape);
    pred = out.col(0);
    if (losses) *losses = losses_from(pred, targets, k, s, config);
    const Eigen::VectorXd diff = pred - tile(targets, s.restarts());
    Eigen::MatrixXd upstream(rows, 1);
    if (config.loss == LossKind::L1)
        upstream.col(0) = diff.array().sign() * inv_k;
    else
        upstream.col(0) = diff.array() * (2.0 * inv_k);
    Eigen::MatrixXd grad = net.mlp().backward(tape, upstream).rightCols(kParams);

    if (config.constraint == ConstraintMode::PenaltyLoss && config.penalty_weight > 0.0) {
        // Penalty acts on the shared row mean, which every row equals here.
        for (Eigen::Index r = 0; r < rows; r += static_cast<Eigen::Index>(k))
            for (Eigen::Index j = 0; j < kParams; ++j) {
                const double slope = config.penalty_weight * exceed_slope(s.x(r, kCond + j)) * inv_k;
                if (slope != 0.0) grad.col(j).segment(r, static_cast<Eigen::Index>(k)).array() += slope;
            }
    }

    auto params = s.x.rightCols(kParams);
    if (config.optimizer == StepRule::Adam) {
        ++s.step;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.step));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.step));
        s.adam_m.array() = kBeta1 * s.adam_m.array() + (1.0 - kBeta1) * grad.array();
        s.adam_v.array() = kBeta2 * s.adam_v.array() + (1.0 - kBeta2) * grad.array().square();
        params.array() -= config.eta * (s.adam_m.array() / bc1) / ((s.adam_v.array() / bc2).sqrt() + kEpsilon);
    } else {
        ++s.step;
        params -= config.eta * grad;
    }
    apply_constraint(s, config.constraint);
}

} // namespace

SearchState pgd_step(SearchState s, const SurrogateNet& net, const Eigen::VectorXd& targets, const PgdConfig& config) {
    check_targets(s, targets);
    step_in_place(s, net, targets, config, nullptr);
    return s;
}

CalibrationResult score_parameters(const SurrogateNet& net, const RomTable& targets, const ParamVector& x,
                                   std::string method) {
    CalibrationResult res;
    res.method = std::move(method);
    res.calibrated = MaterialConfig{x, Space::Normalized};
    res.targets = targets;
    res.predicted = net.predict_table(res.calibrated, targets.grid);
    const ScoreReport s = score(targets, res.predicted);
    res.per_load_case_r2 = s.r2_per_load_case;
    res.r2_mean = s.r2_mean;
    res.mae_deg = s.mae_deg;
    res.sum_exceeding = sum_exceeding(x);
    return res;
}

CalibrationResult calibrate(const SurrogateNet& net, const RomTable& targets, const PgdConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    if (!net.frozen()) throw FrozenRequired();
    // Fail early on targets whose R2 is undefined.
    r2_per_case(targets, targets);

    const std::size_t k = targets.grid.cell_count();
    const std::size_t n_cases = targets.grid.load_cases().size();
    const std::size_t n_moments = targets.grid.moments().size();
    const auto& norm = net.normalizer();
    Eigen::VectorXd scaled_targets(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) scaled_targets(static_cast<Eigen::Index>(i)) = norm.output(targets.values[i]);

    const Eigen::MatrixXd inits = uniform_unit(config.restarts, kParamCount, config.seed);
    std::vector<ParamVector> init_rows(config.restarts);
    for (std::size_t r = 0; r < config.restarts; ++r)
        for (std::size_t j = 0; j < kParamCount; ++j)
            init_rows[r][j] = inits(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));

    const std::size_t n_blocks = (config.restarts + kRestartBlock - 1) / kRestartBlock;
    std::vector<double> fitness(config.restarts, 0.0);
    std::vector<ParamVector> finals(config.restarts);
    std::vector<std::vector<double>> curves(config.restarts);

    parallel_for(n_blocks, [&](std::size_t b) {
        const std::size_t first = b * kRestartBlock;
        const std::size_t count = std::min(kRestartBlock, config.restarts - first);
        SearchState s = SearchState::initial(net, targets.grid, std::span(init_rows).subspan(first, count));
        apply_constraint(s, config.constraint);
        std::vector<double> losses;
        for (std::size_t t = 0; t <= config.steps; ++t) {
            if (t < config.steps) {
                step_in_place(s, net, scaled_targets, config, &losses);
                for (std::size_t r = 0; r < count; ++r) curves[first + r].push_back(losses[r]);
            } else {
                const Eigen::VectorXd pred = net.forward(s.x);
                losses = losses_from(pred, scaled_targets, k, s, config);
                for (std::size_t r = 0; r < count; ++r) curves[first + r].push_back(losses[r]);
                std::vector<double> y_hat(k);
                for (std::size_t r = 0; r < count; ++r) {
                    for (std::size_t i = 0; i < k; ++i) y_hat[i] = norm.output_inverse(pred(static_cast<Eigen::Index>(r * k + i)));
                    double r2 = -std::numeric_limits<double>::infinity();
                    detail::r2_mean_raw(targets.values, y_hat, n_cases, n_moments, r2);
                    fitness[first + r] = std::isfinite(r2) ? r2 : -std::numeric_limits<double>::infinity();
                    finals[first + r] = s.parameters(r);
                }
            }
        }
    });

    std::size_t best = 0;
    for (std::size_t r = 1; r < config.restarts; ++r)
        if (fitness[r] > fitness[best]) best = r;

    CalibrationResult res = score_parameters(net, targets, finals[best], "pgd");
    res.restarts_run = config.restarts;
    res.best_restart_index = best;
    res.steps = config.steps;
    res.loss_curve = std::move(curves[best]);
    res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

std::string result_to_json(const CalibrationResult& r, const MaterialBounds& bounds, bool include_timing) {
    using nlohmann::json;
    json normalized = json::object();
    json physical = json::object();
    const auto phys = denormalize(r.calibrated, bounds);
    for (std::size_t j = 0; j < kParamCount; ++j) {
        normalized[bounds.names[j]] = r.calibrated.values[j];
        physical[bounds.names[j]] = phys.config.values[j];
    }
    json r2 = json::object();
    for (const auto& [c, v] : r.per_load_case_r2) r2[std::string(to_string(c))] = v;
    json table = json::array();
    for (std::size_t cell = 0; cell < r.targets.values.size(); ++cell)
        table.push_back({{"load_case", to_string(r.targets.grid.cell_load_case(cell))},
                         {"moment", r.targets.grid.cell_moment(cell)},
                         {"target", r.targets.values[cell]},
                         {"predicted", r.predicted.values[cell]}});
    json doc{{"method", r.method},
             {"x_cal", {{"normalized", normalized}, {"physical", physical}, {"physical_out_of_range", phys.out_of_range}}},
             {"metrics", {{"mae_deg", r.mae_deg}, {"r2_mean", r.r2_mean}, {"r2_per_load_case", r2}, {"sum_exceeding", r.sum_exceeding}}},
             {"search", {{"restarts", r.restarts_run}, {"best_restart", r.best_restart_index}, {"steps", r.steps}, {"generations", r.generations_run}}},
             {"table", table}};
    if (!r.loss_curve.empty()) doc["search"]["loss_curve"] = r.loss_curve;
    if (include_timing) doc["wall_time_s"] = r.wall_time_s;
    return doc.dump(2) + "\n";
}

} // namespace disccal
