// Small fixtures shared by the unit tests.
#pragma once

#include <cstdint>
#include <random>

#include "dcr/types.hpp"

namespace fixture {

inline dcr::ScanGeometry fan(std::size_t cols, std::size_t views, double step_deg, double sdd = 400.0,
                             double sid = 200.0, double pitch = 1.0, double start_deg = 0.0) {
    dcr::ScanGeometry g;
    g.source_to_detector_mm = sdd;
    g.source_to_isocenter_mm = sid;
    g.detector_cols = cols;
    g.detector_rows = 1;
    g.pixel_u_mm = pitch;
    g.pixel_v_mm = pitch;
    g.angles_deg = dcr::angle_range_deg(start_deg, step_deg, views);
    return g;
}

inline dcr::Volume random_volume(const dcr::ImageGrid& grid, std::uint32_t seed, float scale = 0.02f) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(0.0f, scale);
    dcr::Volume v(grid);
    for (float& x : v.values) x = d(rng);
    return v;
}

}  // namespace fixture
