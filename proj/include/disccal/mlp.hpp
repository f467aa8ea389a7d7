#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "disccal/rng.hpp"

namespace disccal {

enum class LossKind { L1, L2 };
enum class OutputActivation { Identity, Sigmoid };

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;    ///< out

    bool operator==(const DenseLayer& o) const {
        return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() && weight == o.weight &&
               bias == o.bias;
    }
};

/// Feed-forward network: ReLU after every hidden layer, identity or sigmoid
/// after the last one. Samples are rows.
///
/// The ReLU derivative at exactly zero is taken as 0.
class Mlp {
public:
    Mlp() = default;

    /// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
    Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim,
        OutputActivation output_activation, std::uint64_t seed);

    /// Builds from explicit layers; shapes must chain.
    Mlp(std::vector<DenseLayer> layers, OutputActivation output_activation);

    std::size_t input_dim() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols()); }
    std::size_t output_dim() const { return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows()); }
    std::size_t parameter_count() const;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    OutputActivation output_activation() const { return output_activation_; }

    /// Values kept from a forward pass for the backward pass.
    struct Tape {
        std::vector<Eigen::MatrixXd> activations;  ///< input, then each layer's output
        std::vector<Eigen::MatrixXd> dropout_scale;  ///< per hidden layer; empty when dropout is off
    };

    /// Inference pass. Throws ShapeError on a width mismatch.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    /// Recording pass. With dropout_p > 0 each hidden activation is zeroed
    /// with probability dropout_p and survivors scaled by 1/(1-dropout_p).
    const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x, Tape& tape, double dropout_p = 0.0,
                                   Rng* rng = nullptr) const;

    /// Reverse pass from dL/d(output). Returns dL/d(input); writes parameter
    /// gradients into `grads` when given.
    Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_output,
                             std::vector<DenseLayer>* grads = nullptr) const;

    bool operator==(const Mlp&) const = default;

private:
    std::vector<DenseLayer> layers_;
    OutputActivation output_activation_ = OutputActivation::Identity;
};

/// Mean loss over every element and its gradient w.r.t. the prediction.
double loss_value(LossKind kind, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target);
Eigen::MatrixXd loss_gradient(LossKind kind, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target);

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// L2 penalty coefficient added to weight (not bias) gradients.
    double weight_decay = 0.0;
};

/// Adam over a list of dense layers.
class AdamOptimizer {
public:
    void step(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grads, const AdamOptions& options);
    long steps_taken() const { return t_; }

private:
    std::vector<DenseLayer> m_;
    std::vector<DenseLayer> v_;
    long t_ = 0;
};

/// Learning-rate decay when validation loss stalls.
struct PlateauSchedule {
    std::size_t patience = 10;
    double factor = 0.1;
    double threshold = 1e-4;  ///< relative improvement that counts
};

struct TrainOptions {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    double weight_decay = 0.0;
    std::size_t patience = 10;
    double dropout = 0.0;
    LossKind loss = LossKind::L1;
    std::uint64_t seed = 0;
    std::optional<PlateauSchedule> scheduler;
};

struct TrainReport {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;  ///< 1-based
    double best_val_loss = 0.0;
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    double wall_time_s = 0.0;
};

/// Minibatch Adam with early stopping: training halts once validation loss
/// has not improved for more than `patience` consecutive epochs, and the
/// weights of the best validation epoch are restored.
TrainReport fit(Mlp& net, const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val, const TrainOptions& options);

} // namespace disccal
