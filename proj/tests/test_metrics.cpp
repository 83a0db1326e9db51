#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "dcr/metrics.hpp"
#include "dcr/phantom.hpp"
#include "dcr/prior.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dcr;

TEST_SUITE("metrics") {

TEST_CASE("rmse") {
    const auto grid = ImageGrid::centered_2d(40, 1.0);
    const Volume a = fixture::random_volume(grid, 1);
    const Volume b = fixture::random_volume(grid, 2);
    const Volume c = fixture::random_volume(grid, 3);
    const RegionMask all(grid, RegionKind::custom, true);
    const RegionMask disk = fov_disk_mask(grid, 14.0);

    CHECK(rmse_hu(a, a, all) == 0.0);
    Volume shifted = a;
    for (float& v : shifted.values) v += static_cast<float>(hu_to_mu(50.0) - hu_to_mu(0.0));
    CHECK(rmse_hu(a, shifted, disk) == doctest::Approx(50.0).epsilon(1e-4));

    CHECK(rmse_hu(a, b, disk) == doctest::Approx(oracle::rmse_hu(a.values, b.values, disk.inside)).epsilon(1e-6));
    CHECK(rmse_hu(a, b, disk) == rmse_hu(b, a, disk));
    CHECK(rmse_hu(a, c, disk) <= rmse_hu(a, b, disk) + rmse_hu(b, c, disk));

    CHECK_THROWS_AS(rmse_hu(a, b, RegionMask(grid, RegionKind::custom)), Error);
    CHECK_THROWS_AS(rmse_hu(a, Volume(ImageGrid::centered_2d(8, 1.0)), all), Error);
}

TEST_CASE("ssim") {
    const auto grid = ImageGrid::centered_2d(32, 1.0);
    const Volume a = make_phantom(shepp_logan(15.0), grid);
    Volume b = gaussian_blur(a, 2.0);
    const Volume noise = fixture::random_volume(grid, 4, 0.004f);
    for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] += noise.values[i];
    const RegionMask all(grid, RegionKind::custom, true);
    const RegionMask disk = fov_disk_mask(grid, 12.0);

    CHECK(ssim(a, a, all) == 1.0);
    CHECK(ssim(a, b, disk) == doctest::Approx(oracle::ssim_hu(a, b, disk.inside)).epsilon(1e-6));
    CHECK(ssim(b, a, all) == doctest::Approx(oracle::ssim_hu(b, a, all.inside)).epsilon(1e-6));
    CHECK(ssim(a, b, disk) < 1.0);

    // Contrast reversal about a constant keeps luminance and flips structure.
    const Volume tex = fixture::random_volume(grid, 9);
    Volume rev = tex;
    for (float& v : rev.values) v = 0.02f - v;
    CHECK(ssim(tex, rev, disk) < -0.5);
    CHECK_THROWS_AS(ssim(a, b, RegionMask(grid, RegionKind::custom)), Error);
}

TEST_CASE("region masks") {
    const auto grid = ImageGrid::centered_2d(20, 1.0);
    const RegionMask d = fov_disk_mask(grid, 5.0);
    std::size_t expected = 0;
    for (std::size_t y = 0; y < 20; ++y)
        for (std::size_t x = 0; x < 20; ++x) {
            const double cx = static_cast<double>(x) - 9.5, cy = static_cast<double>(y) - 9.5;
            expected += std::hypot(cx, cy) <= 5.0;
        }
    CHECK(d.count() == expected);
    CHECK(d.kind == RegionKind::fov_disk);

    const RegionMask ring = ring_mask(grid, 3.0, 5.0);
    const RegionMask inner = fov_disk_mask(grid, 2.99);
    CHECK(subtract(d, ring).count() == inner.count());
    CHECK(intersect(d, ring).count() == ring.count());

    Volume v(grid);
    v.at(10, 10) = 1.0f;
    CHECK(body_mask(v, 0.5).count() == 1);
    const RegionMask band = edge_band_mask(v, 2);
    // The spike and its four neighbours are edge voxels, widened by two.
    CHECK(band.contains(grid.index(10, 10)));
    CHECK(band.contains(grid.index(13, 10)));
    CHECK(!band.contains(grid.index(14, 10)));
    CHECK(!band.contains(grid.index(13, 13)));
}

TEST_CASE("lesion probe") {
    const auto grid = ImageGrid::centered_2d(80, 1.0);
    auto spec = water_disk(35.0);
    spec.lesions.push_back({{5.0, -7.0, 0.0}, 4.0, 40.0});
    const Volume ref = make_phantom(spec, grid);
    const RegionMask lesion = lesion_mask(grid, {5.0, -7.0, 0.0}, 4.0);
    const LesionReport same = lesion_probe(ref, ref, lesion);
    CHECK(same.contrast_recovery_fraction == doctest::Approx(1.0));
    CHECK(same.contrast_hu == doctest::Approx(40.0).epsilon(1e-4));

    const Volume erased = make_phantom(water_disk(35.0), grid);
    CHECK(std::abs(lesion_probe(erased, ref, lesion).contrast_recovery_fraction) < 1e-6);

    // Annulus between 1.5 and 2.5 equivalent radii, lesion voxels excluded.
    const RegionMask ann = lesion_annulus(lesion);
    const double r_eq = std::sqrt(static_cast<double>(lesion.count()) / oracle::kPi);
    for (std::size_t y = 0; y < 80; ++y)
        for (std::size_t x = 0; x < 80; ++x) {
            const auto c = grid.voxel_center(x, y);
            const double r = std::hypot(c[0] - 5.0, c[1] + 7.0);
            if (std::abs(r - 1.5 * r_eq) < 0.05 || std::abs(r - 2.5 * r_eq) < 0.05) continue;
            CHECK(ann.contains(grid.index(x, y)) == (r >= 1.5 * r_eq && r <= 2.5 * r_eq));
        }

    CHECK_THROWS_AS(lesion_probe(ref, erased, lesion), Error);
    CHECK_THROWS_AS(lesion_probe(ref, ref, RegionMask(grid, RegionKind::lesion)), Error);
}

TEST_CASE("fov radius from the detector half fan angle") {
    ScanGeometry g = fixture::fan(620, 10, 1.0, 1200.0, 600.0);
    const double half = std::atan(150.0 / 1200.0);
    CHECK(g.fov_radius_mm(160, 300) == doctest::Approx(600.0 * std::sin(half)));
    CHECK(g.fov_radius_mm() == doctest::Approx(600.0 * std::sin(std::atan(310.0 / 1200.0))));
}

}
