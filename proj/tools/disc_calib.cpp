// disc-calib: command line front end for the calibration pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "disccal/baselines.hpp"
#include "disccal/calibrate.hpp"
#include "disccal/domain.hpp"
#include "disccal/errors.hpp"
#include "disccal/harness.hpp"
#include "disccal/metrics.hpp"
#include "disccal/oracle.hpp"
#include "disccal/parallel.hpp"
#include "disccal/sampling.hpp"
#include "disccal/surrogate.hpp"

namespace fs = std::filesystem;
using namespace disccal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct Globals {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    int verbosity = 0;
    bool quiet = false;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("DISC_CALIB_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw Error(std::string("DISC_CALIB_SEED is not an unsigned integer: ") + env);
    }
    return 0;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string(), "write failed");
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-")
        std::cout << text;
    else
        write_text(out_path, text);
}

LossKind parse_loss(const std::string& s) { return s == "l2" ? LossKind::L2 : LossKind::L1; }

LoadGrid parse_grid(const std::string& spec) {
    if (spec == "standard") return LoadGrid::standard();
    std::vector<double> moments;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            moments.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error("--grid expects 'standard' or a comma separated moment list, got '" + spec + "'");
        }
    }
    return LoadGrid(std::vector<LoadCase>(kAllLoadCases.begin(), kAllLoadCases.end()), moments);
}

std::string score_json(const ScoreReport& s) {
    nlohmann::json r2 = nlohmann::json::object();
    for (const auto& [c, v] : s.r2_per_load_case) r2[std::string(to_string(c))] = v;
    return nlohmann::json{{"mae_deg", s.mae_deg}, {"r2_per_load_case", r2}, {"r2_mean", s.r2_mean}}.dump(2) + "\n";
}

std::string train_report_json(const TrainReport& r, bool timing) {
    nlohmann::json doc{{"epochs_run", r.epochs_run},
                       {"best_epoch", r.best_epoch},
                       {"best_val_loss", r.best_val_loss},
                       {"train_curve", r.train_curve},
                       {"val_curve", r.val_curve}};
    if (timing) doc["wall_time_s"] = r.wall_time_s;
    return doc.dump(2) + "\n";
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("disc-calib");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");

    Globals g;
    try {
        g.seed = default_seed();
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    }

    CLI::App app{"Surrogate-based material calibration pipeline", "disc-calib"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "disc-calib 0.1.0");
    app.add_option("--seed", g.seed, "Global seed (default: $DISC_CALIB_SEED or 0)");
    app.add_option("--threads", g.threads, "Worker threads for batch work (0 = all cores)");
    app.add_flag("-v,--verbose", g.verbosity, "More logging (repeatable)");
    app.add_flag("-q,--quiet", g.quiet, "Only log errors");

    // sample
    std::size_t sample_n = 0;
    std::string sample_method = "lhs";
    std::string sample_out;
    bool sample_physical = false;
    std::string sample_bounds;
    auto* sample = app.add_subcommand("sample", "Draw normalized material configs");
    sample->add_option("--n", sample_n, "Number of configs")->required()->check(CLI::PositiveNumber);
    sample->add_option("--method", sample_method, "lhs or uniform")->check(CLI::IsMember({"lhs", "uniform"}));
    sample->add_option("--out", sample_out, "Output CSV (default stdout)");
    sample->add_flag("--physical", sample_physical, "Write physical values instead of normalized ones");
    sample->add_option("--bounds", sample_bounds, "Bounds file (TOML or JSON)")->check(CLI::ExistingFile);

    // gen-data
    std::size_t gen_n = 0;
    std::string gen_grid = "standard";
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "Generate an oracle dataset");
    gen->add_option("--n", gen_n, "Number of configs")->required()->check(CLI::PositiveNumber);
    gen->add_option("--grid", gen_grid, "'standard' or comma separated moments in Nm");
    gen->add_option("--out", gen_out, "Output CSV")->required();

    // train
    std::string train_data;
    std::string train_preset = "n1024";
    std::string train_out = "model.json";
    std::string train_loss = "l1";
    std::optional<std::size_t> train_epochs;
    double train_val_fraction = 0.1;
    std::string train_report;
    auto* train = app.add_subcommand("train", "Train the surrogate network");
    train->add_option("--data", train_data, "Dataset CSV")->required();
    train->add_option("--preset", train_preset, "Hyperparameter preset")->check(CLI::IsMember({"n1024", "n128"}));
    train->add_option("--out", train_out, "Model file");
    train->add_option("--loss", train_loss, "Training loss")->check(CLI::IsMember({"l1", "l2"}));
    train->add_option("--max-epochs", train_epochs, "Override the preset's epoch limit");
    train->add_option("--val-fraction", train_val_fraction, "Validation share of configs")->check(CLI::Range(0.0, 0.5));
    train->add_option("--report", train_report, "Write the training curves as JSON");

    // train-inverse
    std::string inv_model;
    std::string inv_out = "inverse.json";
    std::optional<std::size_t> inv_samples;
    std::optional<std::size_t> inv_epochs;
    auto* train_inv = app.add_subcommand("train-inverse", "Train the RoM-to-parameter baseline network");
    train_inv->add_option("--model", inv_model, "Surrogate model file")->required();
    train_inv->add_option("--out", inv_out, "Inverse model file");
    train_inv->add_option("--samples", inv_samples, "Training set size (default 50000)");
    train_inv->add_option("--max-epochs", inv_epochs, "Epoch limit (default 776)");

    // calibrate
    std::string cal_model;
    std::string cal_targets;
    std::string cal_out;
    std::string cal_method = "pgd";
    std::string cal_mode = "projection";
    std::string cal_loss = "l1";
    std::string cal_optimizer = "adam";
    std::string cal_inverse;
    std::string cal_bounds;
    PgdConfig pgd;
    GaConfig ga;
    bool cal_timings = false;
    auto* cal = app.add_subcommand("calibrate", "Fit material parameters to a RoM table");
    cal->add_option("--model", cal_model, "Surrogate model file")->required();
    cal->add_option("--targets", cal_targets, "Targets CSV (load_case,moment,rom)")->required();
    cal->add_option("--out", cal_out, "Result JSON (default stdout)");
    cal->add_option("--method", cal_method, "Search method")->check(CLI::IsMember({"pgd", "ga", "inverse"}));
    cal->add_option("--eta", pgd.eta, "PGD step size")->check(CLI::NonNegativeNumber);
    cal->add_option("--steps", pgd.steps, "PGD steps per restart");
    cal->add_option("--restarts", pgd.restarts, "PGD restarts")->check(CLI::PositiveNumber);
    cal->add_option("--mode", cal_mode, "Constraint handling")->check(CLI::IsMember({"projection", "penalty", "none"}));
    cal->add_option("--penalty-weight", pgd.penalty_weight, "Weight of the bound penalty")->check(CLI::NonNegativeNumber);
    cal->add_option("--loss", cal_loss, "Search loss")->check(CLI::IsMember({"l1", "l2"}));
    cal->add_option("--optimizer", cal_optimizer, "Step rule")->check(CLI::IsMember({"adam", "sgd"}));
    cal->add_option("--max-generations", ga.max_generations, "GA generation limit");
    cal->add_option("--inverse-model", cal_inverse, "Inverse model file (method inverse)");
    cal->add_option("--bounds", cal_bounds, "Bounds file for physical output")->check(CLI::ExistingFile);
    cal->add_flag("--timings", cal_timings, "Include wall time in the result");

    // evaluate
    std::string eval_pred;
    std::string eval_targets;
    std::string eval_out;
    auto* eval = app.add_subcommand("evaluate", "Score predictions against targets");
    eval->add_option("--predictions", eval_pred, "Predictions CSV (load_case,moment,rom)")->required();
    eval->add_option("--targets", eval_targets, "Targets CSV (load_case,moment,rom)")->required();
    eval->add_option("--out", eval_out, "Report JSON (default stdout)");

    // bench / ablate
    std::string bench_spec;
    std::string bench_out;
    auto* bench = app.add_subcommand("bench", "Run an experiment file");
    bench->add_option("spec", bench_spec, "Experiment TOML")->required();
    bench->add_option("--out", bench_out, "Override the output directory");

    std::string ablate_spec;
    std::string ablate_out;
    auto* ablate = app.add_subcommand("ablate", "Run an ablation experiment file");
    ablate->add_option("spec", ablate_spec, "Experiment TOML (kind = \"ablation\")")->required();
    ablate->add_option("--out", ablate_out, "Override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (g.quiet)
        spdlog::set_level(spdlog::level::err);
    else if (g.verbosity > 0)
        spdlog::set_level(spdlog::level::debug);
    set_thread_limit(g.threads);
    spdlog::info("seed={} threads={}", g.seed, thread_limit());

    try {
        if (*sample) {
            const auto bounds = sample_bounds.empty() ? MaterialBounds::defaults() : MaterialBounds::load(sample_bounds);
            auto configs = sample_method == "lhs" ? lhs_sample(sample_n, g.seed) : uniform_sample(sample_n, g.seed);
            if (sample_physical)
                for (auto& c : configs) c = denormalize(c, bounds).config;
            spdlog::info("sample n={} method={} physical={}", sample_n, sample_method, sample_physical);
            emit(sample_out, configs_to_csv(configs, bounds));
        } else if (*gen) {
            const LoadGrid grid = parse_grid(gen_grid);
            spdlog::info("gen-data n={} cells={} out={}", gen_n, grid.cell_count(), gen_out);
            save_dataset(generate_dataset(gen_n, grid, g.seed), gen_out);
        } else if (*train) {
            NetConfig cfg = NetConfig::preset(train_preset);
            cfg.seed = g.seed;
            cfg.loss = parse_loss(train_loss);
            if (train_epochs) cfg.max_epochs = *train_epochs;
            const Dataset ds = load_dataset(train_data);
            spdlog::info("train data={} configs={} preset={} loss={} epochs<={} out={}", train_data, ds.config_count(),
                         train_preset, train_loss, cfg.max_epochs, train_out);
            auto [net, report] = train_surrogate(ds, cfg, train_val_fraction);
            net.save(train_out);
            spdlog::info("trained {} epochs, best epoch {}, val loss {:.6g}", report.epochs_run, report.best_epoch,
                         report.best_val_loss);
            if (!train_report.empty()) write_text(train_report, train_report_json(report, false));
        } else if (*train_inv) {
            const auto net = SurrogateNet::load(inv_model);
            InverseNetConfig cfg;
            cfg.seed = g.seed;
            if (inv_samples) cfg.train_set_size = *inv_samples;
            if (inv_epochs) cfg.max_epochs = *inv_epochs;
            spdlog::info("train-inverse samples={} epochs<={} out={}", cfg.train_set_size, cfg.max_epochs, inv_out);
            auto [inv, report] = train_inverse(net, cfg);
            inv.save(inv_out);
            spdlog::info("trained {} epochs, val loss {:.6g}", report.epochs_run, report.best_val_loss);
        } else if (*cal) {
            const auto net = SurrogateNet::load(cal_model);
            const RomTable targets = RomTable::load_csv(cal_targets);
            const auto bounds = cal_bounds.empty() ? MaterialBounds::defaults() : MaterialBounds::load(cal_bounds);
            CalibrationResult result;
            if (cal_method == "pgd") {
                pgd.seed = g.seed;
                pgd.constraint = parse_constraint_mode(cal_mode);
                pgd.loss = parse_loss(cal_loss);
                pgd.optimizer = cal_optimizer == "sgd" ? StepRule::VanillaGD : StepRule::Adam;
                spdlog::info("calibrate pgd eta={} steps={} restarts={} mode={} loss={} seed={}", pgd.eta, pgd.steps,
                             pgd.restarts, cal_mode, cal_loss, pgd.seed);
                result = calibrate(net, targets, pgd);
            } else if (cal_method == "ga") {
                ga.seed = g.seed;
                spdlog::info("calibrate ga generations<={} seed={}", ga.max_generations, ga.seed);
                result = ga_calibrate(net, targets, ga);
            } else {
                if (cal_inverse.empty()) throw Error("--method inverse requires --inverse-model");
                const auto inverse = InverseNet::load(cal_inverse);
                spdlog::info("calibrate inverse model={}", cal_inverse);
                result = inverse_calibrate(inverse, net, targets);
            }
            spdlog::info("R2 mean {:.6f}, MAE {:.6f} deg", result.r2_mean, result.mae_deg);
            emit(cal_out, result_to_json(result, bounds, cal_timings));
        } else if (*eval) {
            const RomTable pred = RomTable::load_csv(eval_pred);
            const RomTable targets = RomTable::load_csv(eval_targets);
            emit(eval_out, score_json(score(targets, pred)));
        } else if (*bench || *ablate) {
            const bool is_ablate = ablate->parsed();
            ExperimentSpec spec = ExperimentSpec::load(is_ablate ? ablate_spec : bench_spec);
            if (is_ablate && spec.kind != ExperimentKind::Ablation)
                throw Error("ablate expects an experiment with kind = \"ablation\"");
            const std::string& out = is_ablate ? ablate_out : bench_out;
            if (!out.empty()) spec.output_dir = out;
            spdlog::info("experiment {} kind={} seed={} output={}", spec.name, to_string(spec.kind), spec.seed,
                         spec.output_dir.string());
            for (const auto& path : run_experiment(spec)) spdlog::info("wrote {}", path.string());
        }
    } catch (const Error& e) {
        spdlog::error("{}: {}", e.kind(), e.what());
        return kExitError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitError;
    }
    return kExitOk;
}
