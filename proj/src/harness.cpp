#include "disccal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "disccal/errors.hpp"
#include "disccal/metrics.hpp"
#include "disccal/parallel.hpp"
#include "disccal/rng.hpp"
#include "disccal/sampling.hpp"
#include "text_io.hpp"

namespace disccal {

using detail::format_double;

namespace {

// Seed streams derived from the experiment seed.
enum Stream : std::uint64_t {
    kNetSeed = 10,
    kPgdSeed = 11,
    kGaSeed = 12,
    kInverseSeed = 13,
    kTrainData = 20,
    kTrainDataL2 = 21,
    kEvalConfigs = 30,
    kTargets = 40,
    kOodTargets = 50,
    kCvData = 100,
    kCvFolds = 200,
    kCvTrain = 300,
};

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void check_keys(const toml::table& table, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, node] : table) {
        (void)node;
        if (!allowed.contains(std::string(key.str())))
            throw Error("unknown key '" + std::string(key.str()) + "' in " + where);
    }
}

template <typename T>
void read(const toml::table& t, std::string_view key, T& out) {
    const auto* node = t.get(key);
    if (node == nullptr) return;
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        auto v = node->value<std::int64_t>();
        if (!v || *v < 0) throw Error("'" + std::string(key) + "' must be a non-negative integer");
        out = static_cast<T>(*v);
    } else if constexpr (std::is_same_v<T, double>) {
        auto v = node->value<double>();
        if (!v) throw Error("'" + std::string(key) + "' must be a number");
        out = *v;
    } else if constexpr (std::is_same_v<T, bool>) {
        auto v = node->value<bool>();
        if (!v) throw Error("'" + std::string(key) + "' must be a boolean");
        out = *v;
    } else {
        auto v = node->value<std::string>();
        if (!v) throw Error("'" + std::string(key) + "' must be a string");
        out = *v;
    }
}

std::filesystem::path resolve_path(const std::string& text, const std::filesystem::path& base) {
    std::filesystem::path p(text);
    return p.is_absolute() || base.empty() ? p : base / p;
}

LossKind parse_loss(std::string_view text) {
    if (text == "l1") return LossKind::L1;
    if (text == "l2") return LossKind::L2;
    throw Error("unknown loss '" + std::string(text) + "' (expected l1 or l2)");
}

const toml::table* sub_table(const toml::table& doc, std::string_view key) {
    const auto* node = doc.get(key);
    if (node == nullptr) return nullptr;
    const auto* t = node->as_table();
    if (t == nullptr) throw Error("'" + std::string(key) + "' must be a table");
    return t;
}

RomTable truth_of(const Dataset& ds, std::size_t config_index) {
    const std::size_t k = ds.grid.cell_count();
    std::vector<double> values(k);
    for (std::size_t i = 0; i < k; ++i) values[i] = ds.records[config_index * k + i].rom;
    return RomTable(ds.grid, std::move(values));
}

std::vector<std::string> case_columns(const std::string& prefix) {
    std::vector<std::string> out;
    for (auto c : kAllLoadCases) out.push_back(prefix + std::string(to_string(c)));
    return out;
}

double r2_for(const std::vector<std::pair<LoadCase, double>>& per_case, LoadCase c) {
    for (const auto& [lc, v] : per_case)
        if (lc == c) return v;
    return std::nan("");
}

TargetOutcome outcome_of(std::size_t target, const CalibrationResult& r) {
    return TargetOutcome{target, r.method, r.mae_deg, r.r2_mean, r.per_load_case_r2, r.sum_exceeding, r.wall_time_s};
}

std::vector<MethodSummary> summarize(const std::vector<TargetOutcome>& outcomes,
                                     const std::vector<std::string>& methods) {
    std::vector<MethodSummary> out;
    for (const auto& m : methods) {
        MethodSummary s;
        s.method = m;
        std::vector<double> maes;
        std::vector<double> r2s;
        std::vector<double> exceed;
        std::map<LoadCase, std::vector<double>> per_case;
        for (const auto& o : outcomes) {
            if (o.method != m) continue;
            maes.push_back(o.mae_deg);
            r2s.push_back(o.r2_mean);
            exceed.push_back(o.sum_exceeding);
            s.total_wall_time_s += o.wall_time_s;
            for (const auto& [c, v] : o.r2_per_load_case) per_case[c].push_back(v);
        }
        s.mae_mean = mean_of(maes);
        s.mae_std = std_of(maes);
        s.r2_mean = mean_of(r2s);
        s.r2_std = std_of(r2s);
        s.sum_exceeding_mean = mean_of(exceed);
        for (auto c : kAllLoadCases)
            if (per_case.contains(c)) s.r2_per_load_case.emplace_back(c, mean_of(per_case[c]));
        out.push_back(std::move(s));
    }
    return out;
}

void add_table_series(std::vector<PlotPoint>& plot, const std::string& prefix, const RomTable& table) {
    for (std::size_t cell = 0; cell < table.values.size(); ++cell)
        plot.push_back({prefix + "_" + std::string(to_string(table.grid.cell_load_case(cell))),
                        table.grid.cell_moment(cell), table.values[cell]});
}

std::vector<double> moment_ladder(double step, double max) {
    std::vector<double> out;
    for (std::size_t i = 1;; ++i) {
        const double m = step * static_cast<double>(i);
        if (m > max + 1e-9) break;
        out.push_back(m);
    }
    return out;
}

} // namespace

std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::SurrogateCV: return "surrogate_cv";
        case ExperimentKind::InterExtra: return "inter_extra";
        case ExperimentKind::CalibSynthetic: return "calib_synthetic";
        case ExperimentKind::Ablation: return "ablation";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view text) {
    for (auto k : {ExperimentKind::SurrogateCV, ExperimentKind::InterExtra, ExperimentKind::CalibSynthetic,
                   ExperimentKind::Ablation})
        if (text == to_string(k)) return k;
    throw Error("unknown experiment kind '" + std::string(text) + "'");
}

void ExperimentSpec::validate() const {
    if (kind == ExperimentKind::SurrogateCV) {
        if (folds < 2) throw Error("cross-validation needs at least two folds");
        if (dataset_sizes.empty()) throw Error("cross-validation needs at least one dataset size");
    }
    if (train_size < 2) throw Error("training needs at least two configs");
    if (eval_configs == 0) throw Error("evaluation needs at least one config");
    if (!(moment_step > 0.0) || !(moment_max >= moment_step)) throw Error("moment ladder is empty");
    if (n_targets == 0) throw Error("need at least one calibration target");
    if (!(ood_scale > 0.0)) throw Error("ood scale must be positive");
    net.validate();
    pgd.validate();
    ga.validate();
    inverse.validate();
}

ExperimentSpec ExperimentSpec::parse_toml(std::string_view text, const std::filesystem::path& base_dir) {
    toml::table doc;
    try {
        doc = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw ParseError(static_cast<std::size_t>(e.source().begin.line), std::string(e.description()));
    }
    check_keys(doc,
               {"kind", "name", "seed", "output_dir", "surrogate", "cv", "inter_extra", "targets", "pgd", "ga",
                "inverse", "ablation"},
               "experiment");
    ExperimentSpec s;
    std::string kind;
    read(doc, "kind", kind);
    if (kind.empty()) throw Error("experiment needs a 'kind'");
    s.kind = parse_experiment_kind(kind);
    read(doc, "name", s.name);
    read(doc, "seed", s.seed);
    std::string out_dir;
    read(doc, "output_dir", out_dir);
    s.output_dir = out_dir.empty() ? std::filesystem::path("results") / s.name : resolve_path(out_dir, base_dir);

    s.net.seed = derive_seed(s.seed, kNetSeed);
    s.pgd.seed = derive_seed(s.seed, kPgdSeed);
    s.ga.seed = derive_seed(s.seed, kGaSeed);
    s.inverse.seed = derive_seed(s.seed, kInverseSeed);

    if (const auto* t = sub_table(doc, "surrogate")) {
        check_keys(*t, {"model", "model_l2", "train_size", "preset", "max_epochs", "patience"}, "[surrogate]");
        std::string model;
        std::string model_l2;
        std::string preset;
        read(*t, "model", model);
        read(*t, "model_l2", model_l2);
        read(*t, "preset", preset);
        if (!model.empty()) s.model_path = resolve_path(model, base_dir);
        if (!model_l2.empty()) s.model_path_l2 = resolve_path(model_l2, base_dir);
        if (!preset.empty()) {
            const auto seed = s.net.seed;
            s.net = NetConfig::preset(preset);
            s.net.seed = seed;
        }
        read(*t, "train_size", s.train_size);
        read(*t, "max_epochs", s.net.max_epochs);
        read(*t, "patience", s.net.early_stopping_patience);
    }
    if (const auto* t = sub_table(doc, "cv")) {
        check_keys(*t, {"folds", "sizes", "datasets"}, "[cv]");
        read(*t, "folds", s.folds);
        if (const auto* arr = t->get_as<toml::array>("sizes")) {
            s.dataset_sizes.clear();
            for (const auto& n : *arr) {
                auto v = n.value<std::int64_t>();
                if (!v || *v <= 0) throw Error("cv sizes must be positive integers");
                s.dataset_sizes.push_back(static_cast<std::size_t>(*v));
            }
        }
        if (const auto* ds = sub_table(*t, "datasets")) {
            for (const auto& [key, node] : *ds) {
                auto path = node.value<std::string>();
                if (!path) throw Error("cv dataset paths must be strings");
                s.dataset_paths[static_cast<std::size_t>(std::stoul(std::string(key.str())))] =
                    resolve_path(*path, base_dir);
            }
        }
    }
    if (const auto* t = sub_table(doc, "inter_extra")) {
        check_keys(*t, {"configs", "moment_step", "moment_max"}, "[inter_extra]");
        read(*t, "configs", s.eval_configs);
        read(*t, "moment_step", s.moment_step);
        read(*t, "moment_max", s.moment_max);
    }
    if (const auto* t = sub_table(doc, "targets")) {
        check_keys(*t, {"count", "source"}, "[targets]");
        read(*t, "count", s.n_targets);
        std::string source = "surrogate";
        read(*t, "source", source);
        if (source == "surrogate")
            s.target_source = TargetSource::Surrogate;
        else if (source == "oracle")
            s.target_source = TargetSource::Oracle;
        else
            throw Error("target source must be surrogate or oracle");
    }
    if (const auto* t = sub_table(doc, "pgd")) {
        check_keys(*t, {"eta", "steps", "restarts", "loss", "mode", "penalty_weight", "optimizer"}, "[pgd]");
        read(*t, "eta", s.pgd.eta);
        read(*t, "steps", s.pgd.steps);
        read(*t, "restarts", s.pgd.restarts);
        read(*t, "penalty_weight", s.pgd.penalty_weight);
        std::string loss;
        std::string mode;
        std::string opt;
        read(*t, "loss", loss);
        read(*t, "mode", mode);
        read(*t, "optimizer", opt);
        if (!loss.empty()) s.pgd.loss = parse_loss(loss);
        if (!mode.empty()) s.pgd.constraint = parse_constraint_mode(mode);
        if (opt == "sgd")
            s.pgd.optimizer = StepRule::VanillaGD;
        else if (!opt.empty() && opt != "adam")
            throw Error("optimizer must be adam or sgd");
    }
    if (const auto* t = sub_table(doc, "ga")) {
        check_keys(*t, {"enabled", "max_generations", "r2_stop"}, "[ga]");
        read(*t, "enabled", s.run_ga);
        read(*t, "max_generations", s.ga.max_generations);
        read(*t, "r2_stop", s.ga.r2_stop);
    }
    if (const auto* t = sub_table(doc, "inverse")) {
        check_keys(*t, {"enabled", "model", "train_set_size", "max_epochs", "patience", "batch_size"}, "[inverse]");
        read(*t, "enabled", s.run_inverse);
        std::string model;
        read(*t, "model", model);
        if (!model.empty()) s.inverse_model_path = resolve_path(model, base_dir);
        read(*t, "train_set_size", s.inverse.train_set_size);
        read(*t, "max_epochs", s.inverse.max_epochs);
        read(*t, "patience", s.inverse.patience);
        read(*t, "batch_size", s.inverse.batch_size);
    }
    if (const auto* t = sub_table(doc, "ablation")) {
        check_keys(*t, {"load_case", "scale"}, "[ablation]");
        std::string lc;
        read(*t, "load_case", lc);
        if (!lc.empty()) s.ood_load_case = parse_load_case(lc);
        read(*t, "scale", s.ood_scale);
    }
    s.validate();
    return s;
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    try {
        return parse_toml(text, path.parent_path());
    } catch (const ParseError& e) {
        throw ParseError(path.string(), e);
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::vector<std::vector<std::int64_t>> make_folds(const std::vector<std::int64_t>& ids, std::size_t folds,
                                                  std::uint64_t seed) {
    if (folds < 2) throw Error("need at least two folds");
    if (ids.size() < folds) throw Error("fewer configs than folds");
    std::vector<std::int64_t> shuffled = ids;
    Rng rng(seed);
    rng.shuffle(std::span(shuffled));
    std::vector<std::vector<std::int64_t>> out(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t lo = f * shuffled.size() / folds;
        const std::size_t hi = (f + 1) * shuffled.size() / folds;
        out[f].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(lo),
                      shuffled.begin() + static_cast<std::ptrdiff_t>(hi));
        std::sort(out[f].begin(), out[f].end());
    }
    return out;
}

CvReport run_surrogate_cv(const ExperimentSpec& spec) {
    spec.validate();
    CvReport report;
    for (const std::size_t n : spec.dataset_sizes) {
        Dataset ds;
        if (auto it = spec.dataset_paths.find(n); it != spec.dataset_paths.end())
            ds = load_dataset(it->second);
        else
            ds = generate_dataset(n, LoadGrid::standard(), derive_seed(spec.seed, kCvData + n));
        const auto folds = make_folds(ds.config_ids(), spec.folds, derive_seed(spec.seed, kCvFolds + n));

        NetConfig cfg = n <= 128 ? NetConfig::preset_n128() : spec.net;
        if (n <= 128) {
            cfg.max_epochs = std::min(cfg.max_epochs, spec.net.max_epochs);
            cfg.loss = spec.net.loss;
        }
        std::vector<CvFold> nn_rows(folds.size());
        std::vector<CvFold> lin_rows(folds.size());
        parallel_for(folds.size(), [&](std::size_t f) {
            std::vector<std::int64_t> train_ids;
            for (std::size_t g = 0; g < folds.size(); ++g)
                if (g != f) train_ids.insert(train_ids.end(), folds[g].begin(), folds[g].end());
            std::sort(train_ids.begin(), train_ids.end());
            const Dataset train = ds.subset(train_ids);
            const Dataset test = ds.subset(folds[f]);
            NetConfig fold_cfg = cfg;
            fold_cfg.seed = derive_seed(spec.seed, kCvTrain + n * 64 + f);
            const auto net = train_surrogate(train, fold_cfg, 0.1).first;
            const auto lin = LinearBaseline::fit(train);

            std::vector<double> nn_mae;
            std::vector<double> nn_r2;
            std::vector<double> lin_mae;
            std::vector<double> lin_r2;
            const std::size_t k = test.grid.cell_count();
            for (std::size_t c = 0; c < test.config_count(); ++c) {
                const RomTable truth = truth_of(test, c);
                const MaterialConfig cfg_c{test.records[c * k].config, Space::Normalized};
                const RomTable p_nn = net.predict_table(cfg_c, test.grid);
                const RomTable p_lin = lin.predict_table(cfg_c, test.grid);
                nn_mae.push_back(mae(truth, p_nn));
                nn_r2.push_back(r2_mean(truth, p_nn));
                lin_mae.push_back(mae(truth, p_lin));
                lin_r2.push_back(r2_mean(truth, p_lin));
            }
            nn_rows[f] = {"nn", ds.config_count(), f, mean_of(nn_mae), mean_of(nn_r2)};
            lin_rows[f] = {"linear", ds.config_count(), f, mean_of(lin_mae), mean_of(lin_r2)};
        });
        for (const auto* rows : {&nn_rows, &lin_rows}) {
            std::vector<double> maes;
            std::vector<double> r2s;
            for (const auto& r : *rows) {
                report.folds.push_back(r);
                maes.push_back(r.mae_deg);
                r2s.push_back(r.r2_mean);
            }
            CvSummary s{rows->front().model, ds.config_count(), mean_of(maes), std_of(maes), mean_of(r2s),
                        std_of(r2s)};
            report.summary.push_back(s);
            report.plot.push_back({s.model + "_mae", static_cast<double>(s.n_configs), s.mae_mean});
            report.plot.push_back({s.model + "_r2", static_cast<double>(s.n_configs), s.r2_mean});
        }
    }
    return report;
}

std::string moment_band(double moment, const std::vector<double>& trained) {
    for (double t : trained)
        if (std::abs(moment - t) < 1e-9) return "trained";
    if (moment < trained.front()) return "low_extrapolation";
    if (moment > trained.back()) return "high_extrapolation";
    return "interpolated";
}

InterExtraReport run_inter_extra(const ExperimentSpec& spec, const SurrogateNet& net) {
    const std::vector<double> trained = LoadGrid::standard().moments();
    const std::vector<double> ladder = moment_ladder(spec.moment_step, spec.moment_max);
    const LoadGrid grid(std::vector<LoadCase>(kAllLoadCases.begin(), kAllLoadCases.end()), ladder);
    const auto configs = uniform_sample(spec.eval_configs, derive_seed(spec.seed, kEvalConfigs));

    std::vector<RomTable> truth;
    std::vector<RomTable> pred;
    for (const auto& c : configs) {
        truth.push_back(oracle_table(c.values, grid));
        pred.push_back(net.predict_table(c, grid));
    }

    InterExtraReport report;
    const std::vector<std::string> names{"trained", "low_extrapolation", "interpolated", "high_extrapolation"};
    for (const auto& name : names) {
        BandResult band;
        band.band = name;
        for (double m : ladder)
            if (moment_band(m, trained) == name) band.moments.push_back(m);
        if (band.moments.empty()) continue;
        double abs_total = 0.0;
        std::size_t count = 0;
        double r2_total = 0.0;
        for (std::size_t ci = 0; ci < grid.load_cases().size(); ++ci) {
            std::vector<double> y;
            std::vector<double> yh;
            for (std::size_t mi = 0; mi < ladder.size(); ++mi) {
                if (moment_band(ladder[mi], trained) != name) continue;
                const std::size_t cell = ci * ladder.size() + mi;
                for (std::size_t i = 0; i < configs.size(); ++i) {
                    y.push_back(truth[i].values[cell]);
                    yh.push_back(pred[i].values[cell]);
                }
            }
            double mean = 0.0;
            for (double v : y) mean += v;
            mean /= static_cast<double>(y.size());
            double ss_res = 0.0;
            double ss_tot = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                abs_total += std::abs(y[i] - yh[i]);
                ss_res += (y[i] - yh[i]) * (y[i] - yh[i]);
                ss_tot += (y[i] - mean) * (y[i] - mean);
            }
            count += y.size();
            r2_total += ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::nan("");
        }
        band.mae_deg = abs_total / static_cast<double>(count);
        band.r2_mean = r2_total / static_cast<double>(grid.load_cases().size());
        report.bands.push_back(std::move(band));
    }
    for (std::size_t mi = 0; mi < ladder.size(); ++mi) {
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t ci = 0; ci < grid.load_cases().size(); ++ci)
            for (std::size_t i = 0; i < configs.size(); ++i) {
                const std::size_t cell = ci * ladder.size() + mi;
                total += std::abs(truth[i].values[cell] - pred[i].values[cell]);
                ++count;
            }
        report.plot.push_back({"mae_by_moment", ladder[mi], total / static_cast<double>(count)});
    }
    add_table_series(report.plot, "oracle", truth.front());
    add_table_series(report.plot, "surrogate", pred.front());
    return report;
}

const MethodSummary& CalibReport::method(std::string_view name) const {
    for (const auto& s : summary)
        if (s.method == name) return s;
    throw Error("no results for method '" + std::string(name) + "'");
}

std::vector<RomTable> synthetic_targets(const ExperimentSpec& spec, const SurrogateNet& net) {
    const auto configs = uniform_sample(spec.n_targets, derive_seed(spec.seed, kTargets));
    std::vector<RomTable> out;
    for (const auto& c : configs)
        out.push_back(spec.target_source == TargetSource::Surrogate ? net.predict_table(c, LoadGrid::standard())
                                                                    : oracle_table(c.values, LoadGrid::standard()));
    return out;
}

std::vector<RomTable> ood_targets(const ExperimentSpec& spec) {
    const auto configs = uniform_sample(spec.n_targets, derive_seed(spec.seed, kOodTargets));
    const LoadGrid grid = LoadGrid::standard();
    std::vector<RomTable> out;
    for (const auto& c : configs) {
        RomTable t = oracle_table(c.values, grid);
        for (std::size_t cell = 0; cell < t.values.size(); ++cell)
            if (grid.cell_load_case(cell) == spec.ood_load_case) t.values[cell] *= spec.ood_scale;
        out.push_back(std::move(t));
    }
    return out;
}

CalibReport run_calib_synthetic(const ExperimentSpec& spec, const SurrogateNet& net, const InverseNet* inverse) {
    const auto targets = synthetic_targets(spec, net);
    CalibReport report;
    std::vector<std::string> methods{"pgd"};
    if (spec.run_ga) methods.emplace_back("ga");
    if (spec.run_inverse && inverse != nullptr) methods.emplace_back("inverse");

    std::vector<CalibrationResult> first;
    for (const auto& method : methods) {
        for (std::size_t i = 0; i < targets.size(); ++i) {
            CalibrationResult r;
            if (method == "pgd") {
                PgdConfig cfg = spec.pgd;
                cfg.seed = derive_seed(spec.pgd.seed, i);
                r = calibrate(net, targets[i], cfg);
            } else if (method == "ga") {
                GaConfig cfg = spec.ga;
                cfg.seed = derive_seed(spec.ga.seed, i);
                r = ga_calibrate(net, targets[i], cfg);
            } else {
                r = inverse_calibrate(*inverse, net, targets[i]);
            }
            report.outcomes.push_back(outcome_of(i, r));
            if (i == 0) first.push_back(std::move(r));
        }
    }
    report.summary = summarize(report.outcomes, methods);

    add_table_series(report.plot, "target", targets.front());
    for (const auto& r : first) {
        add_table_series(report.plot, r.method, r.predicted);
        for (std::size_t t = 0; t < r.loss_curve.size(); ++t)
            report.plot.push_back({r.method + "_loss", static_cast<double>(t), r.loss_curve[t]});
        for (std::size_t g = 0; g < r.best_fitness.size(); ++g)
            report.plot.push_back({r.method + "_best_r2", static_cast<double>(g), r.best_fitness[g]});
    }
    return report;
}

CalibReport run_ablation(const ExperimentSpec& spec, const SurrogateNet& net_l1, const SurrogateNet& net_l2) {
    const auto targets = ood_targets(spec);
    struct Variant {
        std::string name;
        LossKind loss;
        ConstraintMode mode;
        const SurrogateNet* net;
    };
    const std::vector<Variant> variants{
        {"l1_none", LossKind::L1, ConstraintMode::None, &net_l1},
        {"l1_penalty", LossKind::L1, ConstraintMode::PenaltyLoss, &net_l1},
        {"l1_projection", LossKind::L1, ConstraintMode::Projection, &net_l1},
        {"l2_projection", LossKind::L2, ConstraintMode::Projection, &net_l2},
    };
    CalibReport report;
    std::vector<std::string> names;
    for (const auto& v : variants) {
        names.push_back(v.name);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            PgdConfig cfg = spec.pgd;
            cfg.loss = v.loss;
            cfg.constraint = v.mode;
            cfg.seed = derive_seed(spec.pgd.seed, i);
            CalibrationResult r = calibrate(*v.net, targets[i], cfg);
            r.method = v.name;
            report.outcomes.push_back(outcome_of(i, r));
            report.plot.push_back({v.name + "_sum_exceeding", static_cast<double>(i), r.sum_exceeding});
        }
    }
    report.summary = summarize(report.outcomes, names);
    return report;
}

SurrogateNet resolve_surrogate(const ExperimentSpec& spec, LossKind loss) {
    const auto& path = loss == LossKind::L1 ? spec.model_path : spec.model_path_l2;
    if (path) return SurrogateNet::load(*path);
    NetConfig cfg = spec.net;
    cfg.loss = loss;
    const Dataset ds = generate_dataset(spec.train_size, LoadGrid::standard(),
                                        derive_seed(spec.seed, loss == LossKind::L1 ? kTrainData : kTrainDataL2));
    return train_surrogate(ds, cfg, 0.1).first;
}

InverseNet resolve_inverse(const ExperimentSpec& spec, const SurrogateNet& net) {
    if (spec.inverse_model_path) return InverseNet::load(*spec.inverse_model_path);
    return train_inverse(net, spec.inverse).first;
}

std::string cv_to_csv(const CvReport& report) {
    std::string out = "model,n_configs,mae_mean,mae_std,r2_mean,r2_std\n";
    for (const auto& s : report.summary)
        out += s.model + "," + std::to_string(s.n_configs) + "," + format_double(s.mae_mean) + "," +
               format_double(s.mae_std) + "," + format_double(s.r2_mean) + "," + format_double(s.r2_std) + "\n";
    return out;
}

std::string cv_folds_to_csv(const CvReport& report) {
    std::string out = "model,n_configs,fold,mae,r2_mean\n";
    for (const auto& f : report.folds)
        out += f.model + "," + std::to_string(f.n_configs) + "," + std::to_string(f.fold) + "," +
               format_double(f.mae_deg) + "," + format_double(f.r2_mean) + "\n";
    return out;
}

std::string bands_to_csv(const InterExtraReport& report) {
    std::string out = "band,moments,mae,r2_mean\n";
    for (const auto& b : report.bands) {
        std::string moments;
        for (std::size_t i = 0; i < b.moments.size(); ++i) moments += (i ? " " : "") + format_double(b.moments[i]);
        out += b.band + "," + moments + "," + format_double(b.mae_deg) + "," + format_double(b.r2_mean) + "\n";
    }
    return out;
}

std::string calib_summary_to_csv(const CalibReport& report) {
    std::string out = "method,mae_mean,mae_std,r2_mean,r2_std";
    for (const auto& c : case_columns("r2_")) out += "," + c;
    out += ",sum_exceeding_mean\n";
    for (const auto& s : report.summary) {
        out += s.method + "," + format_double(s.mae_mean) + "," + format_double(s.mae_std) + "," +
               format_double(s.r2_mean) + "," + format_double(s.r2_std);
        for (auto c : kAllLoadCases) out += "," + format_double(r2_for(s.r2_per_load_case, c));
        out += "," + format_double(s.sum_exceeding_mean) + "\n";
    }
    return out;
}

std::string calib_targets_to_csv(const CalibReport& report) {
    std::string out = "target,method,mae,r2_mean";
    for (const auto& c : case_columns("r2_")) out += "," + c;
    out += ",sum_exceeding\n";
    for (const auto& o : report.outcomes) {
        out += std::to_string(o.target) + "," + o.method + "," + format_double(o.mae_deg) + "," +
               format_double(o.r2_mean);
        for (auto c : kAllLoadCases) out += "," + format_double(r2_for(o.r2_per_load_case, c));
        out += "," + format_double(o.sum_exceeding) + "\n";
    }
    return out;
}

std::string plot_to_csv(const std::vector<PlotPoint>& plot) {
    std::string out = "series,x,y\n";
    for (const auto& p : plot) out += p.series + "," + format_double(p.x) + "," + format_double(p.y) + "\n";
    return out;
}

std::string gnuplot_script(const std::vector<PlotPoint>& plot, const std::string& plot_csv, const std::string& title) {
    std::vector<std::string> series;
    for (const auto& p : plot)
        if (std::find(series.begin(), series.end(), p.series) == series.end()) series.push_back(p.series);
    std::ostringstream os;
    os << "# gnuplot -p " << "plot.gp\n"
       << "set datafile separator ','\n"
       << "set key outside right\n"
       << "set title '" << title << "'\n"
       << "set xlabel 'x'\nset ylabel 'y'\n";
    os << "plot ";
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (i) os << ", \\\n     ";
        os << "'" << plot_csv << "' using (strcol(1) eq '" << series[i] << "' ? $2 : NaN):3 with linespoints title '"
           << series[i] << "'";
    }
    os << "\n";
    return os.str();
}

std::string timings_to_json(const CalibReport& report) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& s : report.summary) doc[s.method] = {{"total_wall_time_s", s.total_wall_time_s}};
    return doc.dump(2) + "\n";
}

std::vector<std::filesystem::path> run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<std::filesystem::path> written;
    const auto put = [&](const std::string& name, const std::string& content) {
        const auto path = spec.output_dir / name;
        detail::write_file(path, content);
        written.push_back(path);
    };
    const auto put_plot = [&](const std::vector<PlotPoint>& plot) {
        put("plot.csv", plot_to_csv(plot));
        put("plot.gp", gnuplot_script(plot, "plot.csv", spec.name));
    };
    const auto surrogate = [&](LossKind loss) {
        SurrogateNet net = resolve_surrogate(spec, loss);
        const bool trained = loss == LossKind::L1 ? !spec.model_path : !spec.model_path_l2;
        if (trained) put(loss == LossKind::L1 ? "surrogate.json" : "surrogate_l2.json", net.to_json());
        return net;
    };

    switch (spec.kind) {
        case ExperimentKind::SurrogateCV: {
            const auto report = run_surrogate_cv(spec);
            put("cv_summary.csv", cv_to_csv(report));
            put("cv_folds.csv", cv_folds_to_csv(report));
            put_plot(report.plot);
            break;
        }
        case ExperimentKind::InterExtra: {
            const auto net = surrogate(LossKind::L1);
            const auto report = run_inter_extra(spec, net);
            put("bands.csv", bands_to_csv(report));
            put_plot(report.plot);
            break;
        }
        case ExperimentKind::CalibSynthetic: {
            const auto net = surrogate(LossKind::L1);
            std::optional<InverseNet> inverse;
            if (spec.run_inverse) {
                inverse = resolve_inverse(spec, net);
                if (!spec.inverse_model_path) put("inverse.json", inverse->to_json());
            }
            const auto report = run_calib_synthetic(spec, net, inverse ? &*inverse : nullptr);
            put("calib_summary.csv", calib_summary_to_csv(report));
            put("calib_targets.csv", calib_targets_to_csv(report));
            put_plot(report.plot);
            put("timings.json", timings_to_json(report));
            break;
        }
        case ExperimentKind::Ablation: {
            const auto net_l1 = surrogate(LossKind::L1);
            const auto net_l2 = surrogate(LossKind::L2);
            const auto report = run_ablation(spec, net_l1, net_l2);
            put("ablation.csv", calib_summary_to_csv(report));
            put("ablation_targets.csv", calib_targets_to_csv(report));
            put_plot(report.plot);
            put("timings.json", timings_to_json(report));
            break;
        }
    }
    return written;
}

} // namespace disccal
