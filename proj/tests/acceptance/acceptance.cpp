// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "disccal/baselines.hpp"
#include "disccal/calibrate.hpp"
#include "disccal/errors.hpp"
#include "disccal/harness.hpp"
#include "disccal/metrics.hpp"
#include "disccal/oracle.hpp"
#include "disccal/rng.hpp"
#include "disccal/sampling.hpp"
#include "disccal/surrogate.hpp"

using namespace disccal;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
    std::printf("[%s] %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++g_failures;
}

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
    try {
        report(id, name, body());
    } catch (const std::exception& e) {
        report(id, name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto widths = NetConfig::preset_n1024().layer_widths;
        SurrogateNet net(Mlp(15, widths, 1, OutputActivation::Identity, gen()), NetConfig{},
                         Normalizer::for_rom_range(1.0, 10.0));
        net.freeze();
        Eigen::MatrixXd x(1, 15);
        for (Eigen::Index j = 0; j < 15; ++j) x(0, j) = u(gen);
        const Eigen::RowVectorXd g = net.input_gradient(x);
        Eigen::RowVectorXd fd(15);
        for (Eigen::Index j = 0; j < 15; ++j) {
            Eigen::MatrixXd a = x, b = x;
            a(0, j) += h;
            b(0, j) -= h;
            fd(j) = (net.forward(a)(0) - net.forward(b)(0)) / (2.0 * h);
        }
        worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-12));
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-4 && t < 10.0, fmt("max rel err %.2e", worst) + fmt(", %.2f s", t)};
}

Outcome projection_suite() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(gen() % 20);
        Eigen::MatrixXd x(k, 15);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < 15; ++j) x(i, j) = u(gen);
        const auto y = project(x);
        if (project(y) != y) return {false, "not idempotent at trial " + std::to_string(trial)};
        if (y.leftCols(2) != x.leftCols(2)) return {false, "condition columns changed"};
        for (Eigen::Index i = 0; i < k; ++i) {
            std::vector<double> row(13);
            for (Eigen::Index j = 0; j < 13; ++j) row[static_cast<std::size_t>(j)] = y(i, 2 + j);
            if (sum_exceeding(row) != 0.0) return {false, "infeasible row"};
            if (y.row(i).tail(13) != y.row(0).tail(13)) return {false, "rows differ"};
        }
    }
    const double t = seconds_since(t0);
    return {t < 5.0, "10000 matrices" + fmt(", %.2f s", t)};
}

Outcome lhs_stratification() {
    const auto t0 = Clock::now();
    for (std::size_t n : {4u, 128u, 1024u}) {
        const auto x = lhs_unit({n, 13, 42 + n});
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            std::vector<int> counts(n, 0);
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                const double v = x(i, j);
                if (!(v >= 0.0 && v < 1.0)) return {false, "value outside [0,1)"};
                const double nd = static_cast<double>(n);
                auto bin = std::min(n - 1, static_cast<std::size_t>(v * nd));
                while (bin > 0 && static_cast<double>(bin) / nd > v) --bin;
                while (bin + 1 < n && static_cast<double>(bin + 1) / nd <= v) ++bin;
                ++counts[bin];
            }
            for (int c : counts)
                if (c != 1) return {false, "n=" + std::to_string(n) + " has a stratum count of " + std::to_string(c)};
        }
    }
    const double t = seconds_since(t0);
    return {t < 5.0, "n = 4, 128, 1024" + fmt(", %.2f s", t)};
}

struct HeldOut {
    double mae = 0.0;
    double r2 = 0.0;
};

HeldOut held_out_score(const SurrogateNet& net, const std::vector<MaterialConfig>& configs) {
    HeldOut h;
    for (const auto& c : configs) {
        const auto truth = oracle_table(c.values, LoadGrid::standard());
        const auto pred = net.predict_table(c, LoadGrid::standard());
        h.mae += mae(truth, pred);
        h.r2 += r2_mean(truth, pred);
    }
    h.mae /= static_cast<double>(configs.size());
    h.r2 /= static_cast<double>(configs.size());
    return h;
}

/// Shared state built by the surrogate criterion and reused afterwards.
struct Pipeline {
    std::optional<SurrogateNet> net;
};

Outcome surrogate_accuracy(Pipeline& p) {
    const auto t0 = Clock::now();
    const auto held = uniform_sample(64, 901);
    auto cfg = NetConfig::preset_n1024();
    cfg.seed = 1;
    auto big = train_surrogate(generate_dataset(1024, LoadGrid::standard(), 11), cfg, 0.1).first;
    const double t_big = seconds_since(t0);
    const auto s_big = held_out_score(big, held);
    auto cfg_small = NetConfig::preset_n128();
    cfg_small.seed = 1;
    const auto small = train_surrogate(generate_dataset(128, LoadGrid::standard(), 12), cfg_small, 0.1).first;
    const auto s_small = held_out_score(small, held);
    p.net = std::move(big);
    const bool ok = s_big.mae <= 0.15 && s_big.r2 >= 0.98 && s_small.mae > s_big.mae && t_big < 300.0;
    return {ok, fmt("n1024 MAE %.4f", s_big.mae) + fmt(" R2 %.4f", s_big.r2) + fmt(" (%.0f s)", t_big) +
                    fmt("; n128 MAE %.4f", s_small.mae)};
}

ExperimentSpec calib_spec() {
    ExperimentSpec spec;
    spec.seed = 5;
    spec.n_targets = 16;
    spec.target_source = TargetSource::Surrogate;
    spec.pgd.restarts = 64;
    spec.pgd.steps = 300;
    spec.pgd.eta = 0.05;
    spec.pgd.seed = 6;
    spec.ga.seed = 7;
    spec.inverse.train_set_size = 5000;
    spec.inverse.max_epochs = 30;
    spec.inverse.seed = 8;
    return spec;
}

std::optional<CalibReport> g_calib;

Outcome synthetic_calibration(const Pipeline& p) {
    const auto spec = calib_spec();
    const auto inverse = train_inverse(*p.net, spec.inverse).first;
    g_calib = run_calib_synthetic(spec, *p.net, &inverse);
    const auto& pgd = g_calib->method("pgd");
    const bool ok = pgd.mae_mean <= 0.10 && pgd.r2_mean >= 0.99 && pgd.total_wall_time_s <= 60.0;
    return {ok, fmt("PGD MAE %.4f", pgd.mae_mean) + fmt(" R2 %.4f", pgd.r2_mean) +
                    fmt(" over 16 targets in %.1f s", pgd.total_wall_time_s)};
}

Outcome method_ordering() {
    if (!g_calib) return {false, "calibration run unavailable"};
    const auto& pgd = g_calib->method("pgd");
    const auto& ga = g_calib->method("ga");
    const auto& inv = g_calib->method("inverse");
    const bool ok = pgd.mae_mean < ga.mae_mean && ga.mae_mean < inv.mae_mean &&
                    inv.total_wall_time_s < pgd.total_wall_time_s;
    return {ok, fmt("MAE pgd %.4f", pgd.mae_mean) + fmt(" < ga %.4f", ga.mae_mean) +
                    fmt(" < inverse %.4f", inv.mae_mean) + fmt("; time inverse %.4f s", inv.total_wall_time_s) +
                    fmt(" < pgd %.1f s", pgd.total_wall_time_s)};
}

Outcome ablation_feasibility(const Pipeline& p) {
    auto cfg = NetConfig::preset_n1024();
    cfg.loss = LossKind::L2;
    cfg.seed = 2;
    const auto l2 = train_surrogate(generate_dataset(1024, LoadGrid::standard(), 11), cfg, 0.1).first;
    auto spec = calib_spec();
    spec.kind = ExperimentKind::Ablation;
    const auto rep = run_ablation(spec, *p.net, l2);
    const double none = rep.method("l1_none").sum_exceeding_mean;
    const double pen = rep.method("l1_penalty").sum_exceeding_mean;
    const double proj = rep.method("l1_projection").sum_exceeding_mean;
    const double proj_l2 = rep.method("l2_projection").sum_exceeding_mean;
    const bool ok = none > pen && pen > 0.0 && proj == 0.0 && proj_l2 == 0.0;
    return {ok, fmt("sum exceeding none %.4f", none) + fmt(" > penalty %.4f", pen) + fmt(" > 0; projection %.1f", proj) +
                    fmt(" / %.1f", proj_l2)};
}

Outcome inter_extra(const Pipeline& p) {
    ExperimentSpec spec;
    spec.seed = 9;
    spec.eval_configs = 64;
    const auto rep = run_inter_extra(spec, *p.net);
    const BandResult* trained = nullptr;
    const BandResult* interp = nullptr;
    const BandResult* high = nullptr;
    bool finite = true;
    std::string detail;
    for (const auto& b : rep.bands) {
        finite = finite && std::isfinite(b.mae_deg) && std::isfinite(b.r2_mean);
        if (b.band == "trained") trained = &b;
        if (b.band == "interpolated") interp = &b;
        if (b.band == "high_extrapolation") high = &b;
        detail += (detail.empty() ? "" : ", ") + b.band + fmt(" %.4f", b.mae_deg);
    }
    if (!trained || !interp || !high) return {false, "missing band: " + detail};
    const bool ok = finite && std::abs(trained->mae_deg - interp->mae_deg) <= 0.02 && high->mae_deg >= trained->mae_deg;
    return {ok, detail};
}

Outcome metric_examples() {
    const LoadGrid g({LoadCase::Flexion}, {1.0, 2.0, 3.0, 4.0});
    const RomTable y(g, {1, 2, 3, 4});
    struct Case {
        std::vector<double> yhat;
        double mae;
        double r2;
    };
    // Hand sums: SS_tot = 5 for y = 1..4.
    const std::vector<Case> cases{{{1, 2, 3, 4}, 0.0, 1.0},
                                  {{2, 2, 3, 4}, 0.25, 0.8},
                                  {{2.5, 2.5, 2.5, 2.5}, 1.0, 0.0},
                                  {{4, 3, 2, 1}, 2.0, -3.0},
                                  {{1.5, 2.5, 3.5, 4.5}, 0.5, 0.8},
                                  {{3, 4, 5, 6}, 2.0, -2.2}};
    for (const auto& c : cases) {
        const RomTable yhat(g, c.yhat);
        if (std::abs(mae(y, yhat) - c.mae) > 1e-15 || std::abs(r2_mean(y, yhat) - c.r2) > 1e-15)
            return {false, fmt("mismatch at expected R2 %.2f", c.r2)};
    }
    const LoadGrid g2({LoadCase::Extension, LoadCase::Flexion}, {1.0, 2.0});
    if (r2_mean(RomTable(g2, {1, 3, 1, 3}), RomTable(g2, {1, 3, 2, 2})) != 0.5) return {false, "two-case mean"};
    bool threw = false;
    try {
        r2_mean(RomTable(g, {2, 2, 2, 2}), y);
    } catch (const DegenerateVariance&) {
        threw = true;
    }
    return {threw, "7 examples, degenerate variance rejected"};
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / ("disccal_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::string toml =
        "kind = \"calib_synthetic\"\nname = \"det\"\nseed = 17\n"
        "[surrogate]\npreset = \"n128\"\ntrain_size = 128\nmax_epochs = 20\n"
        "[targets]\ncount = 4\n[pgd]\nrestarts = 16\nsteps = 50\n[ga]\nmax_generations = 10\n"
        "[inverse]\ntrain_set_size = 1000\nmax_epochs = 5\n";
    std::vector<std::vector<fs::path>> runs;
    for (const char* name : {"a", "b"}) {
        auto spec = ExperimentSpec::parse_toml(toml);
        spec.output_dir = root / name;
        runs.push_back(run_experiment(spec));
    }
    std::size_t compared = 0;
    bool ok = runs[0].size() == runs[1].size() && !runs[0].empty();
    for (std::size_t i = 0; ok && i < runs[0].size(); ++i) {
        if (runs[0][i].filename() == "timings.json") continue;
        ok = runs[0][i].filename() == runs[1][i].filename() && slurp(runs[0][i]) == slurp(runs[1][i]);
        ++compared;
    }
    // A calibration JSON from the saved model must also repeat.
    if (ok) {
        const auto net = SurrogateNet::load(root / "a" / "surrogate.json");
        const auto t = oracle_table(uniform_sample(1, 3)[0].values, LoadGrid::standard());
        PgdConfig cfg;
        cfg.restarts = 8;
        cfg.steps = 50;
        const auto j1 = result_to_json(calibrate(net, t, cfg), MaterialBounds::defaults(), false);
        const auto j2 = result_to_json(calibrate(net, t, cfg), MaterialBounds::defaults(), false);
        ok = j1 == j2;
        ++compared;
    }
    fs::remove_all(root);
    return {ok, std::to_string(compared) + " artifacts byte-identical"};
}

} // namespace

int main() {
    Pipeline p;
    run(1, "gradient correctness", gradient_check);
    run(2, "projection suite", projection_suite);
    run(3, "lhs stratification", lhs_stratification);
    run(4, "surrogate accuracy", [&] { return surrogate_accuracy(p); });
    const bool have_net = p.net.has_value();
    run(5, "synthetic calibration", [&] { return have_net ? synthetic_calibration(p) : Outcome{false, "no surrogate"}; });
    run(6, "method ordering", method_ordering);
    run(7, "ablation feasibility", [&] { return have_net ? ablation_feasibility(p) : Outcome{false, "no surrogate"}; });
    run(8, "interpolation/extrapolation", [&] { return have_net ? inter_extra(p) : Outcome{false, "no surrogate"}; });
    run(9, "metric examples", metric_examples);
    run(10, "determinism", determinism);
    std::printf("%d of 10 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
