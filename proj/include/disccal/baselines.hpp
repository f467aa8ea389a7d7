#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "disccal/calibrate.hpp"
#include "disccal/domain.hpp"
#include "disccal/mlp.hpp"
#include "disccal/surrogate.hpp"

namespace disccal {

struct GaConfig {
    std::size_t population = 20;
    std::size_t n_select = 6;
    std::size_t n_crossover = 4;
    std::size_t n_mutation = 4;
    std::size_t n_immigration = 6;
    std::size_t max_generations = 100;
    double r2_stop = 1.0;
    std::uint64_t seed = 0;

    /// Throws unless the four group sizes add up to the population.
    void validate() const;
};

/// Elitist genetic search over normalized configs, scored by the surrogate.
/// Fitness is mean R2 with lower MAE breaking ties; generation 0 is uniform.
/// `generations_run` counts evolved generations after the initial one.
CalibrationResult ga_calibrate(const SurrogateNet& net, const RomTable& targets, const GaConfig& config);

struct InverseNetConfig {
    std::vector<std::size_t> layer_widths{128, 256, 256, 256, 128};
    double learning_rate = 0.000654;
    std::size_t batch_size = 48;
    std::size_t max_epochs = 776;
    double weight_decay = 6e-06;
    std::size_t patience = 50;
    double dropout_p = 0.028433;
    std::size_t scheduler_patience = 18;
    double scheduler_factor = 0.05;
    std::size_t train_set_size = 50000;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// RoM table (20 values on the standard grid) to 13 normalized parameters.
class InverseNet {
public:
    static constexpr std::size_t kRomInputs = 20;

    InverseNet(Mlp mlp, InverseNetConfig config, std::vector<double> input_low, std::vector<double> input_high);

    const Mlp& mlp() const { return mlp_; }
    const InverseNetConfig& config() const { return config_; }

    /// Rows of RoM in degrees (grid order) to rows of parameters in (0,1).
    Eigen::MatrixXd predict(const Eigen::MatrixXd& rom) const;
    ParamVector predict(const RomTable& targets) const;

    std::string to_json() const;
    static InverseNet from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static InverseNet load(const std::filesystem::path& path);

private:
    Mlp mlp_;
    InverseNetConfig config_;
    std::vector<double> input_low_;
    std::vector<double> input_high_;
};

/// Fits the inverse model on uniform configs labelled by the frozen surrogate.
std::pair<InverseNet, TrainReport> train_inverse(const SurrogateNet& net, const InverseNetConfig& config);

/// One forward pass of the inverse model; metrics use the surrogate's table
/// at the predicted parameters. Throws GridMismatch off the standard grid.
CalibrationResult inverse_calibrate(const InverseNet& inverse, const SurrogateNet& net, const RomTable& targets);

struct SimilarPair {
    ParamVector a{};
    ParamVector b{};
    double param_distance = 0.0;  ///< max-norm over normalized parameters
    double rom_mae = 0.0;         ///< degrees, between the two predicted tables
};

/// Among `n_samples` uniform configs, the `top` pairs with parameter
/// distance at least `min_param_distance` whose RoM tables are closest.
std::vector<SimilarPair> find_similar_pairs(const SurrogateNet& net, std::size_t n_samples, double min_param_distance,
                                            std::size_t top, std::uint64_t seed);

} // namespace disccal
