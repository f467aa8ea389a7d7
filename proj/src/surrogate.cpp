#include "disccal/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include <nlohmann/json.hpp>

#include "disccal/errors.hpp"
#include "disccal/rng.hpp"
#include "serialize.hpp"
#include "text_io.hpp"

namespace disccal {

using nlohmann::json;

NetConfig NetConfig::preset_n1024() { return NetConfig{}; }

NetConfig NetConfig::preset_n128() {
    NetConfig c;
    c.layer_widths = {128, 64, 32, 16, 8};
    c.learning_rate = 0.000559;
    c.batch_size = 14;
    c.max_epochs = 231;
    c.weight_decay = 5.16442e-06;
    c.early_stopping_patience = 26;
    c.dropout_p = 0.01;
    return c;
}

NetConfig NetConfig::preset(std::string_view name) {
    if (name == "n1024" || name == "n512") return preset_n1024();
    if (name == "n128") return preset_n128();
    throw Error("unknown preset '" + std::string(name) + "' (expected n1024 or n128)");
}

void NetConfig::validate() const {
    if (layer_widths.empty()) throw Error("network needs at least one hidden layer");
    for (auto w : layer_widths)
        if (w == 0) throw Error("layer widths must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error("dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (batch_size == 0) throw Error("batch size must be positive");
    if (!(weight_decay >= 0.0)) throw Error("weight decay must be non-negative");
}

SurrogateNet::SurrogateNet(Mlp mlp, NetConfig config, Normalizer normalizer)
    : mlp_(std::move(mlp)), config_(std::move(config)), normalizer_(normalizer) {
    if (mlp_.input_dim() != kInputDim || mlp_.output_dim() != 1)
        throw ShapeError("surrogate network must map 15 inputs to 1 output");
}

Eigen::VectorXd SurrogateNet::forward(const Eigen::MatrixXd& batch) const {
    return mlp_.forward(batch).col(0);
}

Eigen::MatrixXd SurrogateNet::input_vjp(const Eigen::MatrixXd& batch, const Eigen::VectorXd& upstream,
                                        Eigen::VectorXd* outputs) const {
    if (!frozen_) throw FrozenRequired();
    if (upstream.size() != batch.rows()) throw ShapeError("upstream gradient length must equal batch rows");
    Mlp::Tape tape;
    const auto& out = mlp_.forward(batch, tape);
    if (outputs != nullptr) *outputs = out.col(0);
    return mlp_.backward(tape, upstream);
}

Eigen::MatrixXd SurrogateNet::input_gradient(const Eigen::MatrixXd& batch) const {
    return input_vjp(batch, Eigen::VectorXd::Ones(batch.rows()));
}

Eigen::MatrixXd SurrogateNet::input_gradient(const Eigen::MatrixXd& batch, const Eigen::VectorXd& targets,
                                             LossKind loss) const {
    if (!frozen_) throw FrozenRequired();
    if (targets.size() != batch.rows()) throw ShapeError("targets length must equal batch rows");
    Mlp::Tape tape;
    const Eigen::MatrixXd out = mlp_.forward(batch, tape);
    return mlp_.backward(tape, loss_gradient(loss, out, targets));
}

Eigen::MatrixXd SurrogateNet::encode(const ParamVector& p, const LoadGrid& grid) const {
    const auto k = static_cast<Eigen::Index>(grid.cell_count());
    Eigen::MatrixXd x(k, static_cast<Eigen::Index>(kInputDim));
    for (Eigen::Index cell = 0; cell < k; ++cell) {
        const auto cond = normalizer_.condition(grid.cell_load_case(static_cast<std::size_t>(cell)),
                                                grid.cell_moment(static_cast<std::size_t>(cell)));
        x(cell, 0) = cond[0];
        x(cell, 1) = cond[1];
        for (std::size_t j = 0; j < kParamCount; ++j)
            x(cell, static_cast<Eigen::Index>(kConditionCount + j)) = normalizer_.input(kConditionCount + j, p[j]);
    }
    return x;
}

RomTable SurrogateNet::predict_table(const MaterialConfig& config, const LoadGrid& grid) const {
    if (config.space != Space::Normalized) throw Error("predict_table expects a normalized config");
    const Eigen::VectorXd y = forward(encode(config.values, grid));
    std::vector<double> values(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) values[static_cast<std::size_t>(i)] = normalizer_.output_inverse(y(i));
    return RomTable(grid, std::move(values));
}

namespace {

json config_to_json(const NetConfig& c) {
    return json{{"layer_widths", c.layer_widths},
                {"dropout_p", c.dropout_p},
                {"weight_decay", c.weight_decay},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"early_stopping_patience", c.early_stopping_patience},
                {"loss", c.loss == LossKind::L1 ? "l1" : "l2"},
                {"seed", c.seed}};
}

NetConfig config_from_json(const json& j) {
    NetConfig c;
    c.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.early_stopping_patience = j.at("early_stopping_patience").get<std::size_t>();
    c.loss = j.at("loss").get<std::string>() == "l2" ? LossKind::L2 : LossKind::L1;
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

json normalizer_to_json(const Normalizer& n) {
    return json{{"input_low", n.input_low},
                {"input_high", n.input_high},
                {"output_low", n.output_low},
                {"output_high", n.output_high}};
}

Normalizer normalizer_from_json(const json& j) {
    Normalizer n;
    n.input_low = j.at("input_low").get<std::array<double, kInputDim>>();
    n.input_high = j.at("input_high").get<std::array<double, kInputDim>>();
    n.output_low = j.at("output_low").get<double>();
    n.output_high = j.at("output_high").get<double>();
    return n;
}

constexpr std::string_view kSurrogateFormat = "disc-calib/surrogate";
constexpr int kSurrogateVersion = 1;

} // namespace

std::string SurrogateNet::to_json() const {
    json doc{{"format", kSurrogateFormat},
             {"version", kSurrogateVersion},
             {"config", config_to_json(config_)},
             {"normalizer", normalizer_to_json(normalizer_)},
             {"network", detail::mlp_to_json(mlp_)}};
    return doc.dump(1) + "\n";
}

SurrogateNet SurrogateNet::from_json(std::string_view text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<std::string>() != kSurrogateFormat)
            throw Error("not a surrogate model file");
        if (doc.at("version").get<int>() != kSurrogateVersion)
            throw Error("unsupported surrogate model version " + std::to_string(doc.at("version").get<int>()));
        SurrogateNet net(detail::mlp_from_json(doc.at("network")), config_from_json(doc.at("config")),
                         normalizer_from_json(doc.at("normalizer")));
        net.freeze();
        return net;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed surrogate model: ") + e.what());
    }
}

void SurrogateNet::save(const std::filesystem::path& path) const { detail::write_file(path, to_json()); }

SurrogateNet SurrogateNet::load(const std::filesystem::path& path) {
    try {
        return from_json(detail::read_file(path));
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_dataset(const Dataset& dataset, const Normalizer& normalizer) {
    const auto n = static_cast<Eigen::Index>(dataset.records.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(kInputDim));
    Eigen::MatrixXd y(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = dataset.records[static_cast<std::size_t>(i)];
        const auto cond = normalizer.condition(r.load_case, r.moment);
        x(i, 0) = cond[0];
        x(i, 1) = cond[1];
        for (std::size_t j = 0; j < kParamCount; ++j)
            x(i, static_cast<Eigen::Index>(kConditionCount + j)) = normalizer.input(kConditionCount + j, r.config[j]);
        y(i, 0) = normalizer.output(r.rom);
    }
    return {std::move(x), std::move(y)};
}

std::pair<Dataset, Dataset> split_by_config(const Dataset& dataset, double val_fraction, std::uint64_t seed) {
    if (dataset.empty()) throw EmptyDataset();
    if (!(val_fraction > 0.0 && val_fraction <= 0.5)) throw Error("validation fraction must lie in (0, 0.5]");
    auto ids = dataset.config_ids();
    if (ids.size() < 2) throw Error("need at least two configs to split off a validation set");
    Rng rng(seed);
    rng.shuffle(std::span(ids));
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(ids.size()))));
    std::vector<std::int64_t> train_ids(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::int64_t> val_ids(ids.end() - static_cast<std::ptrdiff_t>(n_val), ids.end());
    return {dataset.subset(train_ids), dataset.subset(val_ids)};
}

std::pair<SurrogateNet, TrainReport> train_surrogate(const Dataset& train, const Dataset& validation,
                                                     const NetConfig& config) {
    if (train.empty() || validation.empty()) throw EmptyDataset();
    config.validate();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& r : train.records) {
        lo = std::min(lo, r.rom);
        hi = std::max(hi, r.rom);
    }
    const Normalizer normalizer = Normalizer::for_rom_range(lo, hi);
    auto [x_train, y_train] = encode_dataset(train, normalizer);
    auto [x_val, y_val] = encode_dataset(validation, normalizer);

    Mlp mlp(kInputDim, config.layer_widths, 1, OutputActivation::Identity, derive_seed(config.seed, 1));
    TrainOptions options;
    options.learning_rate = config.learning_rate;
    options.batch_size = config.batch_size;
    options.max_epochs = config.max_epochs;
    options.weight_decay = config.weight_decay;
    options.patience = config.early_stopping_patience;
    options.dropout = config.dropout_p;
    options.loss = config.loss;
    options.seed = derive_seed(config.seed, 2);
    TrainReport report = fit(mlp, x_train, y_train, x_val, y_val, options);

    SurrogateNet net(std::move(mlp), config, normalizer);
    net.freeze();
    return {std::move(net), std::move(report)};
}

std::pair<SurrogateNet, TrainReport> train_surrogate(const Dataset& dataset, const NetConfig& config,
                                                     double val_fraction) {
    if (dataset.empty()) throw EmptyDataset();
    auto [train, val] = split_by_config(dataset, val_fraction, derive_seed(config.seed, 0));
    return train_surrogate(train, val, config);
}

LinearBaseline LinearBaseline::fit(const Dataset& dataset) {
    if (dataset.empty()) throw EmptyDataset();
    LinearBaseline model;
    model.normalizer_ = Normalizer::for_rom_range(0.0, 1.0);
    auto [x, y] = encode_dataset(dataset, model.normalizer_);
    Eigen::MatrixXd design(x.rows(), x.cols() + 1);
    design << x, Eigen::VectorXd::Ones(x.rows());
    // output map is the identity for the [0,1] range, so y is in degrees
    model.coef_ = design.colPivHouseholderQr().solve(y.col(0));
    return model;
}

RomTable LinearBaseline::predict_table(const MaterialConfig& config, const LoadGrid& grid) const {
    std::vector<double> values(grid.cell_count());
    for (std::size_t cell = 0; cell < values.size(); ++cell) {
        const auto cond = normalizer_.condition(grid.cell_load_case(cell), grid.cell_moment(cell));
        double v = coef_(static_cast<Eigen::Index>(kInputDim)) + coef_(0) * cond[0] + coef_(1) * cond[1];
        for (std::size_t j = 0; j < kParamCount; ++j)
            v += coef_(static_cast<Eigen::Index>(kConditionCount + j)) * config.values[j];
        values[cell] = v;
    }
    return RomTable(grid, std::move(values));
}

} // namespace disccal
