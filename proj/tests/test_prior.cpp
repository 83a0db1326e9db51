#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "dcr/io.hpp"
#include "dcr/metrics.hpp"
#include "dcr/phantom.hpp"
#include "dcr/prior.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dcr;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dcr_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double disk_mean_hu(const Volume& v, double cx, double cy, double r) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < v.grid.dims[1]; ++y)
        for (std::size_t x = 0; x < v.grid.dims[0]; ++x) {
            const auto c = v.grid.voxel_center(x, y);
            if (std::hypot(c[0] - cx, c[1] - cy) > r) continue;
            s += oracle::to_hu(v.at(x, y));
            ++n;
        }
    return s / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("prior") {

TEST_CASE("file priors") {
    const auto dir = scratch_dir("prior_files");
    const auto grid = ImageGrid::centered_2d(24, 2.0);
    const Volume v = fixture::random_volume(grid, 9);
    save_volume(dir / "p.json", v);
    PriorSource src;
    src.path = dir / "p.json";
    CHECK(load_prior(src, grid).values == v.values);

    // HU payloads are converted back to attenuation.
    save_volume(dir / "hu.json", v, VolumeUnit::hu, {0.025});
    const VolumeFile raw = read_volume_file(dir / "hu.json");
    CHECK(raw.unit == VolumeUnit::hu);
    CHECK(raw.volume.values[5] == doctest::Approx(1000.0 * (v.values[5] - 0.025) / 0.025).epsilon(1e-5));
    src.path = dir / "hu.json";
    const Volume back = load_prior(src, grid);
    for (std::size_t i = 0; i < v.values.size(); ++i) CHECK(back.values[i] == doctest::Approx(v.values[i]).epsilon(1e-5));

    // Without a calibration in the header an HU file cannot be interpreted.
    auto h = read_json_file(dir / "hu.json");
    h.erase("mu_water_per_mm");
    write_json_file(dir / "hu.json", h);
    CHECK_THROWS_AS(load_volume(dir / "hu.json"), Error);
    CHECK_NOTHROW(load_volume(dir / "hu.json", HuCalibration{0.025}));

    // Negative values are clamped.
    Volume neg = v;
    neg.values[3] = -0.01f;
    save_volume(dir / "neg.json", neg);
    src.path = dir / "neg.json";
    CHECK(load_prior(src, grid).values[3] == 0.0f);

    src.path = dir / "missing.json";
    CHECK_THROWS_AS(load_prior(src, grid), Error);
}

TEST_CASE("resampling") {
    const auto coarse = ImageGrid::centered_2d(20, 3.0);
    const auto fine = ImageGrid::centered_2d(64, 1.0);
    const Volume c = resample(Volume(coarse, 0.017f), fine);
    CHECK(c.grid == fine);
    for (float x : c.values) CHECK(x == doctest::Approx(0.017f).epsilon(1e-6));

    // A linear ramp is reproduced exactly inside the source support.
    Volume ramp(coarse);
    for (std::size_t y = 0; y < 20; ++y)
        for (std::size_t x = 0; x < 20; ++x) ramp.at(x, y) = static_cast<float>(0.001 * static_cast<double>(x) + 0.002 * static_cast<double>(y));
    const Volume r = resample(ramp, fine);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
            const auto p = fine.voxel_center(x, y);
            const double fx = (p[0] - coarse.origin_mm[0]) / 3.0, fy = (p[1] - coarse.origin_mm[1]) / 3.0;
            if (fx < 0 || fy < 0 || fx > 19 || fy > 19) continue;
            CHECK(r.at(x, y) == doctest::Approx(0.001 * fx + 0.002 * fy).epsilon(1e-4));
        }
}

TEST_CASE("empty degradation is the identity") {
    const auto grid = ImageGrid::centered_2d(64, 2.0);
    const Volume truth = make_phantom(shepp_logan(55.0), grid);
    CHECK(degrade(truth, DegradationSpec{}).values == truth.values);
}

TEST_CASE("fake lesion raises the disk mean by its contrast") {
    const auto grid = ImageGrid::centered_2d(128, 1.0);
    const Volume truth = make_phantom(water_disk(50.0), grid);
    DegradationSpec spec;
    spec.fake_lesions.push_back({{10.0, -12.0, 0.0}, 5.0, 100.0});
    const Volume out = degrade(truth, spec);
    const double raised = disk_mean_hu(out, 10.0, -12.0, 5.0) - disk_mean_hu(truth, 10.0, -12.0, 5.0);
    CHECK(raised == doctest::Approx(100.0).epsilon(0.05));
    // Nothing changes away from the lesion.
    CHECK(out.at(64, 100) == truth.at(64, 100));
}

TEST_CASE("removed lesion takes the annulus median") {
    const auto grid = ImageGrid::centered_2d(96, 1.0);
    auto spec = water_disk(40.0);
    spec.lesions.push_back({{-8.0, 6.0, 0.0}, 4.0, 60.0});
    const Volume truth = make_phantom(spec, grid);
    DegradationSpec d;
    d.removed_lesions.push_back({{-8.0, 6.0, 0.0}, 4.0, 0.0});
    const Volume out = degrade(truth, d);
    // The annulus around the lesion is pure water, so the median is water.
    CHECK(disk_mean_hu(out, -8.0, 6.0, 4.0) == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(disk_mean_hu(truth, -8.0, 6.0, 4.0) == doctest::Approx(60.0).epsilon(1e-4));
}

TEST_CASE("bias field stays inside the body and within its amplitude") {
    const auto grid = ImageGrid::centered_2d(96, 2.0);
    const Volume truth = make_phantom(water_disk(70.0), grid);
    DegradationSpec d;
    d.bias_amplitude_hu = 50.0;
    d.seed = 4;
    const Volume a = degrade(truth, d);
    CHECK(a.values == degrade(truth, d).values);
    d.seed = 5;
    CHECK(a.values != degrade(truth, d).values);
    double peak = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double diff = std::abs(oracle::to_hu(a.values[i]) - oracle::to_hu(truth.values[i]));
        if (truth.values[i] == 0.0f) CHECK(a.values[i] == 0.0f);
        peak = std::max(peak, diff);
    }
    CHECK(peak <= 50.0 + 1e-3);
    CHECK(peak >= 25.0);
}

TEST_CASE("blur preserves the mean and locality") {
    const auto grid = ImageGrid::centered_2d(64, 1.0);
    Volume spike(grid);
    spike.at(32, 32) = 1.0f;
    const Volume b = gaussian_blur(spike, 4.0);
    double total = 0.0;
    for (float v : b.values) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
    const double sigma = 4.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    CHECK(b.at(33, 32) / b.at(32, 32) == doctest::Approx(std::exp(-0.5 / (sigma * sigma))).epsilon(0.02));
    // Kernel support ends at ceil(3 sigma) voxels.
    const auto reach = static_cast<std::size_t>(std::ceil(3.0 * sigma));
    CHECK(b.at(32 + reach, 32) > 0.0f);
    CHECK(b.at(32 + reach + 1, 32) == 0.0f);
}

TEST_CASE("degradation argument checks") {
    const auto grid = ImageGrid::centered_2d(32, 1.0);
    const Volume truth = make_phantom(water_disk(10.0), grid);
    DegradationSpec d;
    d.fake_lesions.push_back({{100.0, 0.0, 0.0}, 3.0, 100.0});
    CHECK_THROWS_AS(degrade(truth, d), Error);
    d.fake_lesions = {{{0.0, 0.0, 0.0}, -1.0, 100.0}};
    CHECK_THROWS_AS(degrade(truth, d), Error);
    d = {};
    d.blur_fwhm_mm = -1.0;
    CHECK_THROWS_AS(degrade(truth, d), Error);
    PriorSource oracle_src;
    oracle_src.kind = PriorKind::degraded_oracle;
    CHECK_THROWS_AS(load_prior(oracle_src, grid), Error);
}

}
