#include "disccal/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "disccal/errors.hpp"
#include "disccal/metrics.hpp"
#include "disccal/parallel.hpp"
#include "disccal/rng.hpp"
#include "disccal/sampling.hpp"
#include "serialize.hpp"
#include "text_io.hpp"

namespace disccal {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Individual {
    ParamVector genes{};
    double r2 = -std::numeric_limits<double>::infinity();
    double mae = std::numeric_limits<double>::infinity();
};

bool fitter(const Individual& a, const Individual& b) {
    if (a.r2 != b.r2) return a.r2 > b.r2;
    return a.mae < b.mae;
}

void evaluate(std::vector<Individual>& pop, const SurrogateNet& net, const RomTable& targets) {
    const std::size_t n_cases = targets.grid.load_cases().size();
    const std::size_t n_moments = targets.grid.moments().size();
    parallel_for(pop.size(), [&](std::size_t i) {
        const RomTable pred = net.predict_table(MaterialConfig{pop[i].genes, Space::Normalized}, targets.grid);
        double r2 = 0.0;
        pop[i].r2 = detail::r2_mean_raw(targets.values, pred.values, n_cases, n_moments, r2)
                        ? r2
                        : -std::numeric_limits<double>::infinity();
        pop[i].mae = detail::mae_raw(targets.values, pred.values);
    });
}

ParamVector random_genes(Rng& rng) {
    ParamVector p{};
    for (auto& v : p) v = rng.uniform();
    return p;
}

} // namespace

void GaConfig::validate() const {
    if (population == 0) throw Error("population must be positive");
    if (n_select + n_crossover + n_mutation + n_immigration != population)
        throw Error("selection, crossover, mutation and immigration counts must sum to the population");
    if (n_select == 0) throw Error("need at least one elite");
    if (n_crossover > 0 && n_select < 2) throw Error("crossover needs at least two elites");
}

CalibrationResult ga_calibrate(const SurrogateNet& net, const RomTable& targets, const GaConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    if (!net.frozen()) throw FrozenRequired();
    r2_per_case(targets, targets);

    Rng rng(config.seed);
    std::vector<Individual> pop(config.population);
    for (auto& ind : pop) ind.genes = random_genes(rng);
    evaluate(pop, net, targets);
    std::stable_sort(pop.begin(), pop.end(), fitter);

    std::vector<double> history{pop.front().r2};
    std::size_t generation = 0;
    while (pop.front().r2 < config.r2_stop && generation < config.max_generations) {
        ++generation;
        std::vector<Individual> next(pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(config.n_select));
        for (std::size_t i = 0; i < config.n_crossover; ++i) {
            const std::size_t a = rng.below(config.n_select);
            std::size_t b = rng.below(config.n_select - 1);
            if (b >= a) ++b;
            Individual child;
            for (std::size_t j = 0; j < kParamCount; ++j)
                child.genes[j] = rng.bernoulli(0.5) ? pop[a].genes[j] : pop[b].genes[j];
            next.push_back(child);
        }
        for (std::size_t i = 0; i < config.n_mutation; ++i) {
            Individual child;
            child.genes = pop[rng.below(config.n_select)].genes;
            const std::size_t gene = rng.below(kParamCount);
            child.genes[gene] = rng.uniform();
            next.push_back(child);
        }
        for (std::size_t i = 0; i < config.n_immigration; ++i) {
            Individual child;
            child.genes = random_genes(rng);
            next.push_back(child);
        }
        // Elites keep their scores; only the new members are evaluated.
        std::vector<Individual> fresh(next.begin() + static_cast<std::ptrdiff_t>(config.n_select), next.end());
        evaluate(fresh, net, targets);
        std::copy(fresh.begin(), fresh.end(), next.begin() + static_cast<std::ptrdiff_t>(config.n_select));
        std::stable_sort(next.begin(), next.end(), fitter);
        pop = std::move(next);
        history.push_back(pop.front().r2);
    }

    CalibrationResult res = score_parameters(net, targets, pop.front().genes, "ga");
    res.generations_run = generation;
    res.best_fitness = std::move(history);
    res.wall_time_s = seconds_since(started);
    return res;
}

void InverseNetConfig::validate() const {
    if (layer_widths.empty()) throw Error("inverse network needs at least one hidden layer");
    for (auto w : layer_widths)
        if (w == 0) throw Error("layer widths must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error("dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (batch_size == 0) throw Error("batch size must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw Error("validation fraction must lie in (0, 1)");
    if (train_set_size < 2) throw Error("inverse training needs at least two samples");
}

InverseNet::InverseNet(Mlp mlp, InverseNetConfig config, std::vector<double> input_low, std::vector<double> input_high)
    : mlp_(std::move(mlp)), config_(std::move(config)), input_low_(std::move(input_low)),
      input_high_(std::move(input_high)) {
    if (mlp_.input_dim() != kRomInputs || mlp_.output_dim() != kParamCount)
        throw ShapeError("inverse network must map 20 inputs to 13 outputs");
    if (input_low_.size() != kRomInputs || input_high_.size() != kRomInputs)
        throw ShapeError("inverse input scaling needs 20 ranges");
}

Eigen::MatrixXd InverseNet::predict(const Eigen::MatrixXd& rom) const {
    if (rom.cols() != static_cast<Eigen::Index>(kRomInputs)) throw ShapeError("inverse input must have 20 columns");
    Eigen::MatrixXd x(rom.rows(), rom.cols());
    for (Eigen::Index j = 0; j < rom.cols(); ++j) {
        const auto c = static_cast<std::size_t>(j);
        x.col(j) = (rom.col(j).array() - input_low_[c]) / (input_high_[c] - input_low_[c]);
    }
    return mlp_.forward(x);
}

ParamVector InverseNet::predict(const RomTable& targets) const {
    if (!(targets.grid == LoadGrid::standard()))
        throw GridMismatch("the inverse model only accepts the standard 4x5 grid");
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(kRomInputs));
    for (std::size_t i = 0; i < kRomInputs; ++i) row(0, static_cast<Eigen::Index>(i)) = targets.values[i];
    const Eigen::MatrixXd out = predict(row);
    ParamVector p{};
    for (std::size_t j = 0; j < kParamCount; ++j) p[j] = out(0, static_cast<Eigen::Index>(j));
    return p;
}

namespace {

constexpr std::string_view kInverseFormat = "disc-calib/inverse";
constexpr int kInverseVersion = 1;

json inverse_config_to_json(const InverseNetConfig& c) {
    return json{{"layer_widths", c.layer_widths},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"weight_decay", c.weight_decay},
                {"patience", c.patience},
                {"dropout_p", c.dropout_p},
                {"scheduler_patience", c.scheduler_patience},
                {"scheduler_factor", c.scheduler_factor},
                {"train_set_size", c.train_set_size},
                {"val_fraction", c.val_fraction},
                {"seed", c.seed}};
}

InverseNetConfig inverse_config_from_json(const json& j) {
    InverseNetConfig c;
    c.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.patience = j.at("patience").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.scheduler_patience = j.at("scheduler_patience").get<std::size_t>();
    c.scheduler_factor = j.at("scheduler_factor").get<double>();
    c.train_set_size = j.at("train_set_size").get<std::size_t>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

// Surrogate RoM tables for many configs, in fixed-size chunks.
Eigen::MatrixXd rom_tables(const SurrogateNet& net, const Eigen::MatrixXd& params) {
    constexpr Eigen::Index kChunk = 256;
    const LoadGrid grid = LoadGrid::standard();
    const auto k = static_cast<Eigen::Index>(grid.cell_count());
    const Eigen::Index n = params.rows();
    Eigen::MatrixXd out(n, k);
    const auto n_chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
    parallel_for(n_chunks, [&](std::size_t c) {
        const Eigen::Index first = static_cast<Eigen::Index>(c) * kChunk;
        const Eigen::Index count = std::min(kChunk, n - first);
        Eigen::MatrixXd batch(count * k, static_cast<Eigen::Index>(kInputDim));
        for (Eigen::Index i = 0; i < count; ++i) {
            ParamVector p{};
            for (std::size_t j = 0; j < kParamCount; ++j) p[j] = params(first + i, static_cast<Eigen::Index>(j));
            batch.middleRows(i * k, k) = net.encode(p, grid);
        }
        const Eigen::VectorXd y = net.forward(batch);
        for (Eigen::Index i = 0; i < count; ++i)
            for (Eigen::Index cell = 0; cell < k; ++cell)
                out(first + i, cell) = net.normalizer().output_inverse(y(i * k + cell));
    });
    return out;
}

} // namespace

std::string InverseNet::to_json() const {
    json doc{{"format", kInverseFormat},
             {"version", kInverseVersion},
             {"config", inverse_config_to_json(config_)},
             {"input_low", input_low_},
             {"input_high", input_high_},
             {"network", detail::mlp_to_json(mlp_)}};
    return doc.dump(1) + "\n";
}

InverseNet InverseNet::from_json(std::string_view text) {
    try {
        const json doc = json::parse(text);
        if (doc.at("format").get<std::string>() != kInverseFormat) throw Error("not an inverse model file");
        if (doc.at("version").get<int>() != kInverseVersion)
            throw Error("unsupported inverse model version " + std::to_string(doc.at("version").get<int>()));
        return InverseNet(detail::mlp_from_json(doc.at("network")), inverse_config_from_json(doc.at("config")),
                          doc.at("input_low").get<std::vector<double>>(),
                          doc.at("input_high").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw Error(std::string("malformed inverse model: ") + e.what());
    }
}

void InverseNet::save(const std::filesystem::path& path) const { detail::write_file(path, to_json()); }

InverseNet InverseNet::load(const std::filesystem::path& path) {
    try {
        return from_json(detail::read_file(path));
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::pair<InverseNet, TrainReport> train_inverse(const SurrogateNet& net, const InverseNetConfig& config) {
    config.validate();
    if (!net.frozen()) throw FrozenRequired();
    const auto n = static_cast<Eigen::Index>(config.train_set_size);
    const Eigen::MatrixXd params = uniform_unit(config.train_set_size, kParamCount, derive_seed(config.seed, 0));
    const Eigen::MatrixXd rom = rom_tables(net, params);

    const auto n_val = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(config.val_fraction * static_cast<double>(n))), 1, n - 1);
    const Eigen::Index n_train = n - n_val;

    std::vector<double> low(InverseNet::kRomInputs);
    std::vector<double> high(InverseNet::kRomInputs);
    for (std::size_t j = 0; j < InverseNet::kRomInputs; ++j) {
        const auto col = rom.col(static_cast<Eigen::Index>(j)).head(n_train);
        low[j] = col.minCoeff();
        high[j] = col.maxCoeff();
        if (!(high[j] > low[j])) high[j] = low[j] + 1.0;
    }

    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(InverseNet::kRomInputs));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto c = static_cast<std::size_t>(j);
        x.col(j) = (rom.col(j).array() - low[c]) / (high[c] - low[c]);
    }

    Mlp mlp(InverseNet::kRomInputs, config.layer_widths, kParamCount, OutputActivation::Sigmoid,
            derive_seed(config.seed, 1));
    TrainOptions options;
    options.learning_rate = config.learning_rate;
    options.batch_size = config.batch_size;
    options.max_epochs = config.max_epochs;
    options.weight_decay = config.weight_decay;
    options.patience = config.patience;
    options.dropout = config.dropout_p;
    options.loss = LossKind::L1;
    options.seed = derive_seed(config.seed, 2);
    options.scheduler = PlateauSchedule{config.scheduler_patience, config.scheduler_factor};
    TrainReport report = fit(mlp, x.topRows(n_train), params.topRows(n_train), x.bottomRows(n_val),
                             params.bottomRows(n_val), options);
    return {InverseNet(std::move(mlp), config, std::move(low), std::move(high)), std::move(report)};
}

CalibrationResult inverse_calibrate(const InverseNet& inverse, const SurrogateNet& net, const RomTable& targets) {
    const auto started = std::chrono::steady_clock::now();
    const ParamVector p = inverse.predict(targets);
    const double elapsed = seconds_since(started);
    CalibrationResult res = score_parameters(net, targets, p, "inverse");
    res.wall_time_s = elapsed;
    return res;
}

std::vector<SimilarPair> find_similar_pairs(const SurrogateNet& net, std::size_t n_samples, double min_param_distance,
                                            std::size_t top, std::uint64_t seed) {
    const Eigen::MatrixXd params = uniform_unit(n_samples, kParamCount, seed);
    const Eigen::MatrixXd rom = rom_tables(net, params);
    std::vector<SimilarPair> pairs;
    for (Eigen::Index a = 0; a < params.rows(); ++a)
        for (Eigen::Index b = a + 1; b < params.rows(); ++b) {
            const double dist = (params.row(a) - params.row(b)).cwiseAbs().maxCoeff();
            if (dist < min_param_distance) continue;
            SimilarPair pr;
            pr.param_distance = dist;
            pr.rom_mae = (rom.row(a) - rom.row(b)).cwiseAbs().mean();
            for (std::size_t j = 0; j < kParamCount; ++j) {
                pr.a[j] = params(a, static_cast<Eigen::Index>(j));
                pr.b[j] = params(b, static_cast<Eigen::Index>(j));
            }
            pairs.push_back(pr);
        }
    const std::size_t keep = std::min(top, pairs.size());
    std::partial_sort(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(keep), pairs.end(),
                      [](const SimilarPair& x, const SimilarPair& y) { return x.rom_mae < y.rom_mae; });
    pairs.resize(keep);
    return pairs;
}

} // namespace disccal
