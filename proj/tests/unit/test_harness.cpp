#include <doctest.h>

#include <algorithm>
#include <set>

#include "disccal/errors.hpp"
#include "disccal/harness.hpp"
#include "disccal/rng.hpp"
#include "disccal/sampling.hpp"
#include "helpers.hpp"

using namespace disccal;

namespace {

std::string small_calib_toml(const std::filesystem::path& out) {
    return "kind = \"calib_synthetic\"\nname = \"tiny\"\nseed = 3\noutput_dir = \"" + out.string() +
           "\"\n"
           "[surrogate]\npreset = \"n128\"\ntrain_size = 40\nmax_epochs = 4\n"
           "[targets]\ncount = 2\n"
           "[pgd]\nrestarts = 4\nsteps = 10\n"
           "[ga]\nmax_generations = 3\n"
           "[inverse]\ntrain_set_size = 200\nmax_epochs = 2\n";
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("folds partition the ids") {
    for (std::size_t n : {5u, 17u, 64u}) {
        std::vector<std::int64_t> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i * 3);
        for (std::size_t k : {2u, 4u, 5u}) {
            const auto folds = make_folds(ids, k, 9);
            REQUIRE(folds.size() == k);
            std::multiset<std::int64_t> seen;
            std::size_t lo = n, hi = 0;
            for (const auto& f : folds) {
                seen.insert(f.begin(), f.end());
                lo = std::min(lo, f.size());
                hi = std::max(hi, f.size());
                CHECK(std::is_sorted(f.begin(), f.end()));
            }
            CHECK(seen == std::multiset<std::int64_t>(ids.begin(), ids.end()));
            CHECK(hi - lo <= 1);
            CHECK(make_folds(ids, k, 9) == folds);
        }
    }
}

TEST_CASE("moment bands partition the ladder") {
    const std::vector<double> trained{1, 2, 3, 4, 5};
    CHECK(moment_band(0.5, trained) == "low_extrapolation");
    CHECK(moment_band(3.0, trained) == "trained");
    CHECK(moment_band(3.5, trained) == "interpolated");
    CHECK(moment_band(5.5, trained) == "high_extrapolation");
    CHECK(moment_band(10.0, trained) == "high_extrapolation");
    std::size_t count = 0;
    for (int i = 1; i <= 20; ++i) {
        const auto b = moment_band(0.5 * i, trained);
        CHECK((b == "trained" || b == "interpolated" || b == "low_extrapolation" || b == "high_extrapolation"));
        if (b == "trained") ++count;
    }
    CHECK(count == 5);
}

TEST_CASE("toml parsing and validation") {
    const auto s = ExperimentSpec::parse_toml(
        "kind = \"ablation\"\nname = \"x\"\nseed = 5\n[pgd]\nmode = \"penalty\"\nloss = \"l2\"\neta = 0.1\n"
        "[ablation]\nload_case = \"flexion\"\nscale = 2.0\n[surrogate]\nmodel = \"m.json\"\n",
        "/base");
    CHECK(s.kind == ExperimentKind::Ablation);
    CHECK(s.seed == 5);
    CHECK(s.pgd.constraint == ConstraintMode::PenaltyLoss);
    CHECK(s.pgd.loss == LossKind::L2);
    CHECK(s.pgd.eta == 0.1);
    CHECK(s.ood_load_case == LoadCase::Flexion);
    CHECK(s.ood_scale == 2.0);
    REQUIRE(s.model_path);
    CHECK(*s.model_path == std::filesystem::path("/base/m.json"));
    CHECK(s.output_dir == std::filesystem::path("results") / "x");

    CHECK_THROWS_AS(ExperimentSpec::parse_toml("kind = \"nope\"\n"), Error);
    CHECK_THROWS_AS(ExperimentSpec::parse_toml("kind = \"ablation\"\ncolour = 1\n"), Error);
    CHECK_THROWS_AS(ExperimentSpec::parse_toml("kind = \"ablation\"\n[pgd]\nrestart = 3\n"), Error);
    CHECK_THROWS_AS(ExperimentSpec::parse_toml("kind = = 3"), Error);
    CHECK_THROWS_AS(ExperimentSpec::parse_toml("kind = \"surrogate_cv\"\n[cv]\nfolds = 1\n"), Error);
    CHECK(parse_experiment_kind(to_string(ExperimentKind::InterExtra)) == ExperimentKind::InterExtra);
}

TEST_CASE("small cross-validation run") {
    ExperimentSpec spec;
    spec.kind = ExperimentKind::SurrogateCV;
    spec.dataset_sizes = {24};
    spec.folds = 3;
    spec.net.max_epochs = 3;
    const auto rep = run_surrogate_cv(spec);
    CHECK(rep.folds.size() == 6);
    REQUIRE(rep.summary.size() == 2);
    for (const auto& s : rep.summary) {
        CHECK(s.n_configs == 24);
        CHECK(s.mae_mean > 0.0);
        CHECK(s.mae_std >= 0.0);
    }
    CHECK(cv_to_csv(rep) == cv_to_csv(run_surrogate_cv(spec)));

    spec.dataset_paths[24] = "/nonexistent/cv24.csv";
    CHECK_THROWS_AS(run_surrogate_cv(spec), DatasetMissing);
}

TEST_CASE("inter and extrapolation bands") {
    ExperimentSpec spec;
    spec.eval_configs = 8;
    const auto rep = run_inter_extra(spec, test::small_net());
    REQUIRE(rep.bands.size() == 4);
    std::size_t moments = 0;
    for (const auto& b : rep.bands) {
        moments += b.moments.size();
        CHECK(b.mae_deg > 0.0);
    }
    CHECK(moments == 20);
    CHECK(bands_to_csv(rep).rfind("band,", 0) == 0);
}

TEST_CASE("ood targets scale one load case") {
    ExperimentSpec spec;
    spec.n_targets = 3;
    spec.seed = 4;
    const auto ood = ood_targets(spec);
    REQUIRE(ood.size() == 3);
    // Out-of-distribution configs come from seed stream 50.
    const auto configs = uniform_sample(3, derive_seed(4, 50));
    const auto& g = LoadGrid::standard();
    for (std::size_t t = 0; t < 3; ++t) {
        const auto plain = oracle_table(configs[t].values, g);
        for (std::size_t cell = 0; cell < 20; ++cell) {
            const double f = g.cell_load_case(cell) == LoadCase::AxialRotation ? 2.5 : 1.0;
            CHECK(ood[t].values[cell] == doctest::Approx(plain.values[cell] * f).epsilon(1e-14));
        }
    }
}

TEST_CASE("experiment reruns give identical files") {
    test::TempDir dir;
    const auto a = run_experiment(ExperimentSpec::parse_toml(small_calib_toml(dir / "a")));
    const auto b = run_experiment(ExperimentSpec::parse_toml(small_calib_toml(dir / "b")));
    REQUIRE(a.size() == b.size());
    REQUIRE_FALSE(a.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].filename() == b[i].filename());
        if (a[i].filename() != "timings.json") CHECK(test::slurp(a[i]) == test::slurp(b[i]));
    }
    const auto summary = test::slurp(dir / "a" / "calib_summary.csv");
    CHECK(summary.find("pgd") != std::string::npos);
    CHECK(summary.find("ga") != std::string::npos);
    CHECK(summary.find("inverse") != std::string::npos);
}

}

TEST_SUITE("harness") {

TEST_CASE("shipped experiment files parse") {
    const auto dir = std::filesystem::path(DISCCAL_SOURCE_DIR) / "experiments";
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".toml") continue;
        CHECK_NOTHROW(ExperimentSpec::load(entry.path()).validate());
        ++n;
    }
    CHECK(n == 4);
}

}
