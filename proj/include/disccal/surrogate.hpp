#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "disccal/domain.hpp"
#include "disccal/mlp.hpp"
#include "disccal/oracle.hpp"

namespace disccal {

/// Surrogate architecture and training hyperparameters.
struct NetConfig {
    std::vector<std::size_t> layer_widths{256, 128, 64, 32, 16};
    double dropout_p = 0.01;
    double weight_decay = 5.16293e-06;
    double learning_rate = 0.000555;
    std::size_t batch_size = 20;
    std::size_t max_epochs = 300;
    std::size_t early_stopping_patience = 23;
    LossKind loss = LossKind::L1;
    std::uint64_t seed = 0;

    /// Tuned for 512-1024 training configs (the default).
    static NetConfig preset_n1024();
    /// Tuned for 128 training configs.
    static NetConfig preset_n128();
    /// "n1024" or "n128"; throws Error otherwise.
    static NetConfig preset(std::string_view name);

    void validate() const;
    bool operator==(const NetConfig&) const = default;
};

/// Trained network mapping [c, m, p] (scaled) to a scaled RoM value.
class SurrogateNet {
public:
    SurrogateNet(Mlp mlp, NetConfig config, Normalizer normalizer);

    const Mlp& mlp() const { return mlp_; }
    const NetConfig& config() const { return config_; }
    const Normalizer& normalizer() const { return normalizer_; }

    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }

    /// k x 15 scaled inputs -> k scaled predictions. Dropout never applies.
    Eigen::VectorXd forward(const Eigen::MatrixXd& batch) const;

    /// d(sum of outputs)/dX. Requires a frozen net.
    Eigen::MatrixXd input_gradient(const Eigen::MatrixXd& batch) const;

    /// dL/dX of the mean loss between forward(batch) and scaled `targets`.
    Eigen::MatrixXd input_gradient(const Eigen::MatrixXd& batch, const Eigen::VectorXd& targets,
                                   LossKind loss = LossKind::L1) const;

    /// Vector-Jacobian product: sum_i upstream_i * d(output_i)/dX. Also
    /// returns the outputs through `outputs` when non-null.
    Eigen::MatrixXd input_vjp(const Eigen::MatrixXd& batch, const Eigen::VectorXd& upstream,
                              Eigen::VectorXd* outputs = nullptr) const;

    /// Scaled input rows for one normalized config on every grid cell.
    Eigen::MatrixXd encode(const ParamVector& normalized, const LoadGrid& grid) const;

    /// RoM predictions in degrees for every grid cell.
    RomTable predict_table(const MaterialConfig& config, const LoadGrid& grid) const;

    std::string to_json() const;
    static SurrogateNet from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    /// Loaded networks are frozen.
    static SurrogateNet load(const std::filesystem::path& path);

private:
    Mlp mlp_;
    NetConfig config_;
    Normalizer normalizer_;
    bool frozen_ = false;
};

/// Scaled network inputs and targets for a dataset.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_dataset(const Dataset& dataset, const Normalizer& normalizer);

/// Splits by config: after a seeded shuffle of config ids, the last
/// `val_fraction` of them (at least one) form the validation set.
std::pair<Dataset, Dataset> split_by_config(const Dataset& dataset, double val_fraction, std::uint64_t seed);

/// Trains on `dataset` with a config-level validation split. The returned
/// net is frozen and holds the best-validation weights.
std::pair<SurrogateNet, TrainReport> train_surrogate(const Dataset& dataset, const NetConfig& config,
                                                     double val_fraction = 0.1);

/// Same, with an explicit validation set.
std::pair<SurrogateNet, TrainReport> train_surrogate(const Dataset& train, const Dataset& validation,
                                                     const NetConfig& config);

/// Ordinary least squares on the scaled 15 inputs plus intercept; a sanity
/// reference for the network.
class LinearBaseline {
public:
    static LinearBaseline fit(const Dataset& dataset);
    RomTable predict_table(const MaterialConfig& config, const LoadGrid& grid) const;

private:
    Eigen::VectorXd coef_;  ///< 15 slopes then intercept, degrees
    Normalizer normalizer_;
};

} // namespace disccal
