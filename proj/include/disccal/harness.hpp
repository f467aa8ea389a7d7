#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disccal/baselines.hpp"
#include "disccal/calibrate.hpp"
#include "disccal/domain.hpp"
#include "disccal/oracle.hpp"
#include "disccal/surrogate.hpp"

namespace disccal {

enum class ExperimentKind { SurrogateCV, InterExtra, CalibSynthetic, Ablation };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view text);

enum class TargetSource { Surrogate, Oracle };

/// Everything an experiment needs. Unset model paths mean "train one from
/// an oracle dataset of `train_size` configs".
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::CalibSynthetic;
    std::string name = "experiment";
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "results";

    // Surrogate used by inter/extra, calibration and ablation runs.
    std::optional<std::filesystem::path> model_path;
    std::optional<std::filesystem::path> model_path_l2;
    std::size_t train_size = 1024;
    NetConfig net = NetConfig::preset_n1024();

    // Cross-validation.
    std::size_t folds = 4;
    std::vector<std::size_t> dataset_sizes{128, 512, 1024};
    /// Optional CSV per dataset size; a listed path that does not exist is an error.
    std::map<std::size_t, std::filesystem::path> dataset_paths;

    // Inter/extrapolation.
    std::size_t eval_configs = 64;
    double moment_step = 0.5;
    double moment_max = 10.0;

    // Calibration benchmarks.
    std::size_t n_targets = 64;
    TargetSource target_source = TargetSource::Surrogate;
    PgdConfig pgd;
    GaConfig ga;
    bool run_ga = true;
    bool run_inverse = true;
    std::optional<std::filesystem::path> inverse_model_path;
    InverseNetConfig inverse;

    // Ablation.
    LoadCase ood_load_case = LoadCase::AxialRotation;
    double ood_scale = 2.5;

    /// Throws Error on inconsistent settings.
    void validate() const;

    /// TOML experiment file; relative paths resolve against the file's directory.
    static ExperimentSpec load(const std::filesystem::path& path);
    static ExperimentSpec parse_toml(std::string_view text, const std::filesystem::path& base_dir = {});
};

/// Long-format plot data (series, x, y).
struct PlotPoint {
    std::string series;
    double x = 0.0;
    double y = 0.0;
};

struct CvFold {
    std::string model;  ///< "nn" or "linear"
    std::size_t n_configs = 0;
    std::size_t fold = 0;
    double mae_deg = 0.0;
    double r2_mean = 0.0;
};

struct CvSummary {
    std::string model;
    std::size_t n_configs = 0;
    double mae_mean = 0.0;
    double mae_std = 0.0;
    double r2_mean = 0.0;
    double r2_std = 0.0;
};

struct CvReport {
    std::vector<CvFold> folds;
    std::vector<CvSummary> summary;
    std::vector<PlotPoint> plot;
};

/// Config-id fold assignment: ids shuffled with `seed`, then dealt into
/// `folds` contiguous groups. Every id lands in exactly one fold.
std::vector<std::vector<std::int64_t>> make_folds(const std::vector<std::int64_t>& ids, std::size_t folds,
                                                  std::uint64_t seed);

/// k-fold CV of the network and the linear reference for each dataset size.
CvReport run_surrogate_cv(const ExperimentSpec& spec);

struct BandResult {
    std::string band;  ///< trained, low_extrapolation, interpolated, high_extrapolation
    std::vector<double> moments;
    double mae_deg = 0.0;
    double r2_mean = 0.0;
};

struct InterExtraReport {
    std::vector<BandResult> bands;
    std::vector<PlotPoint> plot;
};

/// Band of a ladder moment relative to the training moments.
std::string moment_band(double moment, const std::vector<double>& trained_moments);

/// Evaluates `net` against the oracle on fresh configs over the full moment
/// ladder. R2 per band is pooled per load case over configs and band moments.
InterExtraReport run_inter_extra(const ExperimentSpec& spec, const SurrogateNet& net);

struct TargetOutcome {
    std::size_t target = 0;
    std::string method;
    double mae_deg = 0.0;
    double r2_mean = 0.0;
    std::vector<std::pair<LoadCase, double>> r2_per_load_case;
    double sum_exceeding = 0.0;
    double wall_time_s = 0.0;
};

struct MethodSummary {
    std::string method;
    double mae_mean = 0.0;
    double mae_std = 0.0;
    double r2_mean = 0.0;
    double r2_std = 0.0;
    std::vector<std::pair<LoadCase, double>> r2_per_load_case;  ///< mean over targets
    double sum_exceeding_mean = 0.0;
    double total_wall_time_s = 0.0;
};

struct CalibReport {
    std::vector<TargetOutcome> outcomes;
    std::vector<MethodSummary> summary;
    std::vector<PlotPoint> plot;

    const MethodSummary& method(std::string_view name) const;
};

/// Synthetic calibration targets: surrogate or oracle tables at uniform configs.
std::vector<RomTable> synthetic_targets(const ExperimentSpec& spec, const SurrogateNet& net);

/// Oracle tables at uniform configs with one load case scaled by `ood_scale`.
std::vector<RomTable> ood_targets(const ExperimentSpec& spec);

/// PGD, GA and inverse-model calibration on the same targets.
CalibReport run_calib_synthetic(const ExperimentSpec& spec, const SurrogateNet& net, const InverseNet* inverse);

/// Rows: L1 none, L1 penalty, L1 projection (on `net_l1`), L2 projection (on `net_l2`).
CalibReport run_ablation(const ExperimentSpec& spec, const SurrogateNet& net_l1, const SurrogateNet& net_l2);

/// Loads the spec's model for `loss`, or trains one on a generated dataset.
SurrogateNet resolve_surrogate(const ExperimentSpec& spec, LossKind loss);

/// Loads the spec's inverse model, or trains one against `net`.
InverseNet resolve_inverse(const ExperimentSpec& spec, const SurrogateNet& net);

std::string cv_to_csv(const CvReport& report);
std::string cv_folds_to_csv(const CvReport& report);
std::string bands_to_csv(const InterExtraReport& report);
std::string calib_summary_to_csv(const CalibReport& report);
std::string calib_targets_to_csv(const CalibReport& report);
std::string plot_to_csv(const std::vector<PlotPoint>& plot);
/// gnuplot script drawing every series of `plot_csv` as its own line.
std::string gnuplot_script(const std::vector<PlotPoint>& plot, const std::string& plot_csv, const std::string& title);
/// Wall times only; the other outputs exclude them so reruns compare equal.
std::string timings_to_json(const CalibReport& report);

/// Runs the spec's experiment and writes its files to `output_dir`.
/// Returns the written paths in order.
std::vector<std::filesystem::path> run_experiment(const ExperimentSpec& spec);

} // namespace disccal
