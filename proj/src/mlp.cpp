#include "disccal/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <span>

#include "disccal/errors.hpp"

namespace disccal {

namespace {

void apply_output_activation(OutputActivation act, Eigen::MatrixXd& z) {
    if (act == OutputActivation::Sigmoid) z = (1.0 + (-z.array()).exp()).inverse().matrix();
}

// GEMM handles a trailing partial row panel with different kernels, so a
// row's result could depend on its position in the batch. Padding the batch
// to whole panels keeps every row on the same kernel.
constexpr Eigen::Index kRowPanel = 24;

template <class Rhs>
void row_stable_product(const Eigen::MatrixXd& a, const Rhs& rhs, Eigen::MatrixXd& out) {
    const Eigen::Index n = a.rows();
    const Eigen::Index padded = std::max(kRowPanel, (n + kRowPanel - 1) / kRowPanel * kRowPanel);
    if (padded == n) {
        out.resize(n, rhs.cols());
        out.noalias() = a * rhs;
        return;
    }
    Eigen::MatrixXd ap = Eigen::MatrixXd::Zero(padded, a.cols());
    ap.topRows(n) = a;
    Eigen::MatrixXd full(padded, rhs.cols());
    full.noalias() = ap * rhs;
    out = full.topRows(n);
}

} // namespace

Mlp::Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim,
         OutputActivation output_activation, std::uint64_t seed)
    : output_activation_(output_activation) {
    if (input_dim == 0 || output_dim == 0) throw ShapeError("network dimensions must be positive");
    Rng rng(seed);
    std::size_t fan_in = input_dim;
    auto add_layer = [&](std::size_t fan_out) {
        if (fan_out == 0) throw ShapeError("layer widths must be positive");
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out))};
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-limit, limit);
        layers_.push_back(std::move(layer));
        fan_in = fan_out;
    };
    for (std::size_t width : hidden) add_layer(width);
    add_layer(output_dim);
}

Mlp::Mlp(std::vector<DenseLayer> layers, OutputActivation output_activation)
    : layers_(std::move(layers)), output_activation_(output_activation) {
    if (layers_.empty()) throw ShapeError("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].bias.size() != layers_[l].weight.rows()) throw ShapeError("bias length does not match layer width");
        if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())
            throw ShapeError("layer " + std::to_string(l) + " input width does not match previous layer");
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim())
        throw ShapeError("input has " + std::to_string(x.cols()) + " columns, network expects " +
                         std::to_string(input_dim()));
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z;
        row_stable_product(a, layers_[l].weight.transpose(), z);
        z.rowwise() += layers_[l].bias.transpose();
        if (l + 1 < layers_.size()) {
            a = z.cwiseMax(0.0);
        } else {
            apply_output_activation(output_activation_, z);
            a = std::move(z);
        }
    }
    return a;
}

const Eigen::MatrixXd& Mlp::forward(const Eigen::MatrixXd& x, Tape& tape, double dropout_p, Rng* rng) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim())
        throw ShapeError("input has " + std::to_string(x.cols()) + " columns, network expects " +
                         std::to_string(input_dim()));
    const bool dropout = dropout_p > 0.0 && rng != nullptr;
    tape.activations.resize(layers_.size() + 1);
    tape.dropout_scale.resize(dropout ? layers_.size() - 1 : 0);
    tape.activations[0] = x;
    const double keep_scale = dropout ? 1.0 / (1.0 - dropout_p) : 1.0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& a = tape.activations[l];
        auto& z = tape.activations[l + 1];
        row_stable_product(a, layers_[l].weight.transpose(), z);
        z.rowwise() += layers_[l].bias.transpose();
        if (l + 1 < layers_.size()) {
            z = z.cwiseMax(0.0);
            if (dropout) {
                auto& scale = tape.dropout_scale[l];
                scale.resize(z.rows(), z.cols());
                for (Eigen::Index c = 0; c < scale.cols(); ++c)
                    for (Eigen::Index r = 0; r < scale.rows(); ++r)
                        scale(r, c) = rng->bernoulli(dropout_p) ? 0.0 : keep_scale;
                z.array() *= scale.array();
            }
        } else {
            apply_output_activation(output_activation_, z);
        }
    }
    return tape.activations.back();
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& grad_output,
                              std::vector<DenseLayer>* grads) const {
    const std::size_t n_layers = layers_.size();
    if (tape.activations.size() != n_layers + 1) throw ShapeError("tape does not match network");
    const auto& out = tape.activations.back();
    if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols())
        throw ShapeError("output gradient shape does not match forward output");

    Eigen::MatrixXd delta = grad_output;
    if (output_activation_ == OutputActivation::Sigmoid)
        delta.array() *= out.array() * (1.0 - out.array());

    if (grads != nullptr) grads->resize(n_layers);
    Eigen::MatrixXd upstream;
    for (std::size_t l = n_layers; l-- > 0;) {
        const auto& a_in = tape.activations[l];
        if (grads != nullptr) {
            auto& g = (*grads)[l];
            g.weight.resize(layers_[l].weight.rows(), layers_[l].weight.cols());
            g.weight.noalias() = delta.transpose() * a_in;
            g.bias = delta.colwise().sum().transpose();
        }
        row_stable_product(delta, layers_[l].weight, upstream);
        if (l == 0) break;
        // a_in is the post-ReLU (and post-dropout) output of layer l-1.
        if (tape.dropout_scale.empty()) {
            delta = (a_in.array() > 0.0).select(upstream, 0.0);
        } else {
            delta = (a_in.array() > 0.0).select(upstream.cwiseProduct(tape.dropout_scale[l - 1]), 0.0);
        }
    }
    return upstream;
}

double loss_value(LossKind kind, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
    const auto diff = (prediction - target).array();
    const double n = static_cast<double>(diff.size());
    return kind == LossKind::L1 ? diff.abs().sum() / n : diff.square().sum() / n;
}

Eigen::MatrixXd loss_gradient(LossKind kind, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
    const Eigen::ArrayXXd diff = (prediction - target).array();
    const double n = static_cast<double>(diff.size());
    if (kind == LossKind::L1) return (diff.sign() / n).matrix();
    return (2.0 * diff / n).matrix();
}

void AdamOptimizer::step(std::vector<DenseLayer>& params, const std::vector<DenseLayer>& grads,
                         const AdamOptions& o) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.push_back({Eigen::MatrixXd::Zero(p.weight.rows(), p.weight.cols()), Eigen::VectorXd::Zero(p.bias.size())});
            v_.push_back(m_.back());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
    auto update = [&](auto& p, const auto& g_raw, auto& m, auto& v, bool decay) {
        auto g = (decay && o.weight_decay != 0.0) ? (g_raw.array() + o.weight_decay * p.array()).eval()
                                                   : g_raw.array().eval();
        m.array() = o.beta1 * m.array() + (1.0 - o.beta1) * g;
        v.array() = o.beta2 * v.array() + (1.0 - o.beta2) * g.square();
        p.array() -= o.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + o.epsilon);
    };
    for (std::size_t l = 0; l < params.size(); ++l) {
        update(params[l].weight, grads[l].weight, m_[l].weight, v_[l].weight, true);
        update(params[l].bias, grads[l].bias, m_[l].bias, v_[l].bias, false);
    }
}

namespace {

double evaluate_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, LossKind kind) {
    constexpr Eigen::Index kChunk = 4096;
    double total = 0.0;
    for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
        const Eigen::Index len = std::min(kChunk, x.rows() - start);
        const Eigen::MatrixXd pred = net.forward(x.middleRows(start, len));
        total += loss_value(kind, pred, y.middleRows(start, len)) * static_cast<double>(len);
    }
    return total / static_cast<double>(x.rows());
}

} // namespace

TrainReport fit(Mlp& net, const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val, const TrainOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    if (x_train.rows() == 0 || x_val.rows() == 0) throw EmptyDataset();
    if (x_train.rows() != y_train.rows() || x_val.rows() != y_val.rows())
        throw ShapeError("inputs and targets have different row counts");
    if (options.batch_size == 0) throw Error("batch size must be positive");
    if (!(options.dropout >= 0.0 && options.dropout < 1.0)) throw Error("dropout must lie in [0, 1)");

    Rng rng(options.seed);
    AdamOptimizer adam;
    AdamOptions adam_options{options.learning_rate, 0.9, 0.999, 1e-8, options.weight_decay};

    TrainReport report;
    report.best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<DenseLayer> best = net.layers();
    std::size_t stale_epochs = 0;
    double plateau_best = std::numeric_limits<double>::infinity();
    std::size_t plateau_stale = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Mlp::Tape tape;
    std::vector<DenseLayer> grads;
    Eigen::MatrixXd xb, yb;
    const auto batch = static_cast<Eigen::Index>(options.batch_size);

    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
        rng.shuffle(std::span(order));
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0; start < x_train.rows(); start += batch) {
            const Eigen::Index len = std::min(batch, x_train.rows() - start);
            xb.resize(len, x_train.cols());
            yb.resize(len, y_train.cols());
            for (Eigen::Index i = 0; i < len; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                xb.row(i) = x_train.row(src);
                yb.row(i) = y_train.row(src);
            }
            const auto& pred = net.forward(xb, tape, options.dropout, &rng);
            epoch_loss += loss_value(options.loss, pred, yb) * static_cast<double>(len);
            net.backward(tape, loss_gradient(options.loss, pred, yb), &grads);
            adam.step(net.layers(), grads, adam_options);
        }
        report.train_curve.push_back(epoch_loss / static_cast<double>(x_train.rows()));

        const double val = evaluate_loss(net, x_val, y_val, options.loss);
        report.val_curve.push_back(val);
        report.epochs_run = epoch;
        if (val < report.best_val_loss) {
            report.best_val_loss = val;
            report.best_epoch = epoch;
            best = net.layers();
            stale_epochs = 0;
        } else if (++stale_epochs > options.patience) {
            break;
        }

        if (options.scheduler) {
            const auto& s = *options.scheduler;
            if (val < plateau_best * (1.0 - s.threshold)) {
                plateau_best = val;
                plateau_stale = 0;
            } else if (++plateau_stale > s.patience) {
                adam_options.learning_rate *= s.factor;
                plateau_stale = 0;
            }
        }
    }
    net.layers() = std::move(best);
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

} // namespace disccal
