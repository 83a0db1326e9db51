#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"

#include "dcr/acquisition.hpp"
#include "dcr/metrics.hpp"
#include "dcr/phantom.hpp"
#include "dcr/prior.hpp"
#include "dcr/projector.hpp"
#include "dcr/solver.hpp"
#include "dcr/wtv.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dcr;

namespace {

double residual_norm(const Volume& f, const Sinogram& targets, bool measured) {
    const Sinogram p = forward_project(f, targets.geometry);
    double s = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i)
        if (targets.mask.is_measured(i) == measured) {
            const double d = p.values[i] - targets.values[i];
            s += d * d;
        }
    return std::sqrt(s);
}

struct SmallCase {
    ImageGrid grid = ImageGrid::centered_2d(48, 1.0);
    ScanGeometry geom = fixture::fan(72, 64, 3.3, 400.0, 200.0);
    Volume truth;
    Sinogram full;

    SmallCase() {
        truth = make_phantom(shepp_logan(22.0), grid, 2);
        full = forward_project(truth, geom);
    }
};

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("soft threshold cases") {
    CHECK(soft_threshold(0.3, 0.5) == 0.0);
    CHECK(soft_threshold(1.2, 0.5) == doctest::Approx(0.7));
    CHECK(soft_threshold(-1.2, 0.5) == doctest::Approx(-0.7));
    CHECK(soft_threshold(0.5, 0.5) == 0.0);
    CHECK(soft_threshold(-0.5, 0.5) == 0.0);
    for (double x : {-3.0, -1e-9, 0.0, 2e-7, 11.0}) CHECK(soft_threshold(x, 0.0) == x);
    static_assert(soft_threshold(2.0, 0.5) == 1.5);
}

TEST_CASE("wtv value") {
    const auto grid = ImageGrid::centered_2d(16, 1.0);
    const WtvState unit{grid, std::vector<float>(grid.size(), 1.0f)};
    CHECK(wtv_value(Volume(grid, 0.7f), unit) == 0.0);

    const float h = 0.25f;
    Volume step(grid);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 8; x < 16; ++x) step.at(x, y) = h;
    CHECK(wtv_value(step, unit) == doctest::Approx(h * 16.0));

    const Volume r = fixture::random_volume(grid, 5);
    const WtvState half{grid, std::vector<float>(grid.size(), 0.5f)};
    CHECK(wtv_value(r, half) == doctest::Approx(0.5 * wtv_value(r, unit)));
    std::vector<double> f(r.values.begin(), r.values.end());
    CHECK(wtv_value(r, unit) == doctest::Approx(oracle::smoothed_wtv(f, unit.weights, 16, 16, 0.0)).epsilon(1e-9));
}

TEST_CASE("wtv weights") {
    const auto grid = ImageGrid::centered_2d(8, 1.0);
    const double eps = 1e-4;
    const WtvState flat = wtv_update_weights(Volume(grid, 0.02f), eps);
    for (float w : flat.weights) CHECK(w == doctest::Approx(1.0 / eps));

    const Volume r = fixture::random_volume(grid, 6);
    const WtvState s = wtv_update_weights(r, eps);
    const WtvState s2 = wtv_update_weights(r, 10 * eps);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            const std::size_t i = grid.index(x, y);
            const double dx = x + 1 < 8 ? r.values[i + 1] - r.values[i] : 0.0;
            const double dy = y + 1 < 8 ? r.values[i + 8] - r.values[i] : 0.0;
            CHECK(s.weights[i] == doctest::Approx(1.0 / (std::hypot(dx, dy) + eps)).epsilon(1e-6));
            CHECK(s.weights[i] <= 1.0 / eps * (1 + 1e-6));
            CHECK(s2.weights[i] < s.weights[i]);
        }
    CHECK_THROWS_AS(wtv_update_weights(r, 0.0), Error);
}

TEST_CASE("wtv gradient matches finite differences") {
    const auto grid = ImageGrid::centered_2d(8, 1.0);
    const Volume img = fixture::random_volume(grid, 7);
    const WtvState st = wtv_update_weights(fixture::random_volume(grid, 8), 1e-4);
    std::vector<double> f(img.values.begin(), img.values.end());

    for (double delta : {1e-5, 1e-12}) {
        const auto g = wtv_gradient(img, st, delta);
        const double h = 1e-7;
        double peak = 0.0;
        std::vector<double> fd(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            auto p = f, m = f;
            p[i] += h;
            m[i] -= h;
            fd[i] = (oracle::smoothed_wtv(p, st.weights, 8, 8, delta) - oracle::smoothed_wtv(m, st.weights, 8, 8, delta)) /
                    (2 * h);
            peak = std::max(peak, std::abs(fd[i]));
        }
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (std::abs(fd[i]) < 1e-3 * peak) continue;
            CHECK(std::abs(g[i] - fd[i]) <= 1e-4 * std::abs(fd[i]));
        }
    }
}

TEST_CASE("wtv descent") {
    const auto grid = ImageGrid::centered_2d(32, 1.0);
    const LineSearch ls{};
    const double unit = 1.0 * 0.02 / 1000.0;

    const Volume flat(grid, 0.02f);
    const WtvState fs = wtv_update_weights(flat, 1e-4);
    CHECK(wtv_gradient_step(flat, fs, ls, 5, unit, 1e-5).values == flat.values);

    Volume noisy = make_phantom(water_disk(10.0), grid);
    const Volume noise = fixture::random_volume(grid, 10, 0.002f);
    for (std::size_t i = 0; i < noisy.values.size(); ++i) noisy.values[i] += noise.values[i];
    const WtvState st = wtv_update_weights(noisy, 1e-4);
    WtvStepStats stats;
    const Volume out = wtv_gradient_step(noisy, st, ls, 10, 5.0 * unit, 1e-5, &stats);
    REQUIRE(stats.values.size() == 11);
    CHECK(stats.values[1] < stats.values[0]);
    for (std::size_t k = 1; k < stats.values.size(); ++k) CHECK(stats.values[k] <= stats.values[k - 1]);
    CHECK(stats.accepted + stats.exhausted == 10);
    CHECK(wtv_value(out, st) == doctest::Approx(stats.values.back()));
    CHECK(wtv_value(out, st) < wtv_value(noisy, st));
}

TEST_CASE("inpainting") {
    SmallCase c;
    const Sinogram trunc = restrict_truncation(c.full, 36);
    const Sinogram filled = inpaint_unmeasured(c.truth, trunc);
    CHECK(filled.mask == trunc.mask);
    const double peak = *std::max_element(c.full.values.begin(), c.full.values.end());
    for (std::size_t i = 0; i < filled.values.size(); ++i) {
        if (trunc.mask.is_measured(i)) CHECK(filled.values[i] == trunc.values[i]);
        CHECK(std::abs(filled.values[i] - c.full.values[i]) <= 0.01 * std::max<double>(c.full.values[i], 1e-3 * peak));
    }
    const Sinogram zero = inpaint_unmeasured(Volume(c.grid), trunc);
    for (std::size_t i = 0; i < zero.values.size(); ++i)
        if (!trunc.mask.is_measured(i)) CHECK(zero.values[i] == 0.0f);
    // All-measured input is passed through with a warning.
    CHECK(inpaint_unmeasured(c.truth, c.full).values == c.full.values);
}

TEST_CASE("sart sweep contracts") {
    SmallCase c;
    SolverConfig cfg;
    const Sinogram rs = ray_row_sum(c.geom, c.grid);

    Volume start = fixture::random_volume(c.grid, 12);
    start.values[10] = -0.01f;
    Volume clamped = start;
    clamped.values[10] = 0.0f;

    cfg.lambda = 0.0;
    CHECK(sart_sweep(start, c.full, cfg, rs).values == clamped.values);

    cfg.lambda = 0.8;
    cfg.e1 = cfg.e2 = 1e6;
    CHECK(sart_sweep(start, c.full, cfg, rs).values == clamped.values);

    cfg.e1 = cfg.e2 = 0.0;
    const double before = residual_norm(Volume(c.grid), c.full, true);
    const Volume one = sart_sweep(Volume(c.grid), c.full, cfg, rs);
    const double after = residual_norm(one, c.full, true);
    const double after2 = residual_norm(sart_sweep(one, c.full, cfg, rs), c.full, true);
    CHECK(after < before);
    CHECK(after2 < after);
    CHECK(std::all_of(one.values.begin(), one.values.end(), [](float v) { return v >= 0.0f; }));

    Sinogram short_rs = rs;
    short_rs.values.pop_back();
    CHECK_THROWS_AS(sart_sweep(start, c.full, cfg, short_rs), Error);
}

TEST_CASE("dcr trace and nonnegativity") {
    SmallCase c;
    const Sinogram trunc = restrict_truncation(c.full, 36);
    Volume prior = c.truth;
    for (float& v : prior.values) v *= 1.03f;
    SolverConfig cfg;
    cfg.n_max = 3;
    cfg.l_max = 4;
    const RegionMask fov = fov_disk_mask(c.grid, 15.0);
    const auto res = reconstruct_dcr(trunc, prior, cfg, TraceReference{c.truth, fov});
    REQUIRE(res.trace.records.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(res.trace.records[k].iteration == k + 1);
        CHECK(res.trace.records[k].rmse_hu.has_value());
    }
    CHECK(std::all_of(res.image.values.begin(), res.image.values.end(), [](float v) { return v >= 0.0f; }));
    CHECK(*res.trace.records.back().rmse_hu < rmse_hu(prior, c.truth, fov));
    CHECK(res.trace.records.back().residual_measured < residual_norm(prior, trunc, true));

    const auto path = std::filesystem::temp_directory_path() / "dcr_test_trace.csv";
    res.trace.write_csv(path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "iteration,residual_measured,residual_unmeasured,wtv,rmse");
    std::size_t rows = 0;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("large e2 equals ignoring the inpainted rays") {
    SmallCase c;
    const Sinogram trunc = restrict_truncation(c.full, 36);
    DegradationSpec d;
    d.bias_amplitude_hu = 80.0;
    d.seed = 2;
    d.fake_lesions.push_back({{3.0, -6.0, 0.0}, 3.0, 100.0});
    const Volume prior = degrade(c.truth, d);
    SolverConfig cfg;
    cfg.n_max = 3;
    cfg.l_max = 3;
    const RegionMask fov = fov_disk_mask(c.grid, 15.0);
    cfg.e2 = 5.0;
    const auto a = reconstruct_dcr(trunc, prior, cfg, TraceReference{c.truth, fov});
    cfg.e2 = std::numeric_limits<double>::infinity();
    const auto b = reconstruct_dcr(trunc, prior, cfg, TraceReference{c.truth, fov});
    CHECK(a.image.values == b.image.values);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(a.trace.records[k].residual_measured == b.trace.records[k].residual_measured);
        CHECK(a.trace.records[k].wtv == b.trace.records[k].wtv);
        CHECK(*a.trace.records[k].rmse_hu == *b.trace.records[k].rmse_hu);
    }
    // Unmeasured residuals here are a few 0.01, so only a tolerance below that acts.
    cfg.e2 = 0.01;
    const auto tight = reconstruct_dcr(trunc, prior, cfg, TraceReference{c.truth, fov});
    CHECK(tight.image.values != b.image.values);
}

TEST_CASE("wtv-only baseline is dcr from zero with e2 infinite") {
    SmallCase c;
    const Sinogram trunc = restrict_truncation(c.full, 36);
    SolverConfig cfg;
    cfg.n_max = 2;
    cfg.l_max = 2;
    const auto a = reconstruct_wtv_only(trunc, c.grid, cfg);
    cfg.e2 = std::numeric_limits<double>::infinity();
    const auto b = reconstruct_dcr(trunc, Volume(c.grid), cfg);
    CHECK(a.image.values == b.image.values);
}

TEST_CASE("solver config") {
    SolverConfig cfg;
    CHECK(cfg.diagnostics().empty());
    CHECK(cfg.e1 == 0.005);
    CHECK(cfg.e2 == 0.5);
    CHECK(cfg.epsilon_hu == 5.0);
    CHECK(cfg.lambda == 0.8);
    CHECK(cfg.n_max == 10);
    CHECK(cfg.l_max == 10);
    CHECK(cfg.ls_alpha == 0.3);
    CHECK(cfg.ls_gamma == 0.6);
    CHECK(cfg.ls_t0 == 1.0);
    CHECK(cfg.sampling_per_mm == 7.5);
    CHECK(SolverConfig::defaults(true).e1 == 0.05);
    CHECK(SolverConfig::defaults(false).e1 == 0.005);
    CHECK(cfg.epsilon_mu() == doctest::Approx(5.0 * 0.02 / 1000.0));

    cfg.lambda = 2.5;
    cfg.e1 = -1.0;
    cfg.n_max = 0;
    const auto d = cfg.diagnostics();
    CHECK(d.size() == 3);
    CHECK_THROWS_AS(cfg.validate(), Error);

    SolverConfig inf;
    inf.e2 = std::numeric_limits<double>::infinity();
    const nlohmann::json j = inf;
    CHECK(j.at("e2") == "inf");
    CHECK(std::isinf(j.get<SolverConfig>().e2));
    CHECK(nlohmann::json::parse(R"({"e1": null})").get<SolverConfig>().e1 == std::numeric_limits<double>::infinity());
    CHECK_THROWS(nlohmann::json::parse(R"({"e1": "big"})").get<SolverConfig>());
}

}
