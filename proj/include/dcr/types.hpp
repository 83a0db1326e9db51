// Core domain types: acquisition geometry, image grids, volumes and sinograms.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcr {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScanMode { fan_beam_2d, cone_beam_3d };

/// Circular trajectory with a flat detector.
///
/// Conventions: the source sits at `source_to_isocenter_mm * (cos b, sin b, 0)`
/// for view angle b; the detector center is on the opposite side of the
/// isocenter at distance `source_to_detector_mm` from the source. The detector
/// u axis (columns) points along `(-sin b, cos b, 0)` and the v axis (rows)
/// along +z. Every ray runs from the source to a detector pixel center;
/// pixel (row, col) sits at u = (col - (cols-1)/2) * pixel_u and
/// v = (row - (rows-1)/2) * pixel_v.
struct ScanGeometry {
    double source_to_detector_mm = 1200.0;
    double source_to_isocenter_mm = 600.0;
    std::size_t detector_cols = 620;
    std::size_t detector_rows = 1;
    double pixel_u_mm = 1.0;
    double pixel_v_mm = 1.0;
    std::vector<double> angles_deg;
    ScanMode mode = ScanMode::fan_beam_2d;

    std::size_t num_views() const { return angles_deg.size(); }
    std::size_t rays_per_view() const { return detector_cols * detector_rows; }
    std::size_t num_rays() const { return num_views() * rays_per_view(); }

    double column_u(std::size_t col) const;
    double row_v(std::size_t row) const;
    /// Angular span between first and last view in degrees.
    double angular_span_deg() const;
    /// Mean angular step in degrees (0 for a single view).
    double mean_step_deg() const;
    /// Radius of the isocentric disk seen by every view through columns
    /// [first_col, first_col + cols).
    double fov_radius_mm(std::size_t first_col, std::size_t cols) const;
    /// FOV radius of the whole detector.
    double fov_radius_mm() const { return fov_radius_mm(0, detector_cols); }

    /// Throws dcr::Error listing the first violated invariant.
    void validate() const;
};

/// Evenly spaced angles `start, start+step, ...` (count entries).
std::vector<double> angle_range_deg(double start_deg, double step_deg, std::size_t count);

struct ImageGrid {
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
    /// Position of the center of voxel (0,0,0).
    std::array<double, 3> origin_mm{0.0, 0.0, 0.0};

    std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z = 0) const {
        return (z * dims[1] + y) * dims[0] + x;
    }
    std::array<double, 3> voxel_center(std::size_t x, std::size_t y, std::size_t z = 0) const {
        return {origin_mm[0] + static_cast<double>(x) * spacing_mm[0],
                origin_mm[1] + static_cast<double>(y) * spacing_mm[1],
                origin_mm[2] + static_cast<double>(z) * spacing_mm[2]};
    }
    bool operator==(const ImageGrid&) const = default;

    void validate() const;

    /// Grid of the given size centered on the isocenter.
    static ImageGrid centered(std::size_t nx, std::size_t ny, std::size_t nz, double sx, double sy,
                              double sz);
    static ImageGrid centered_2d(std::size_t n, double spacing) {
        return centered(n, n, 1, spacing, spacing, 1.0);
    }
};

/// Dense attenuation image in 1/mm, x-fastest.
struct Volume {
    ImageGrid grid;
    std::vector<float> values;

    Volume() = default;
    explicit Volume(const ImageGrid& g, float fill = 0.0f) : grid(g), values(g.size(), fill) {}

    float& at(std::size_t x, std::size_t y, std::size_t z = 0) { return values[grid.index(x, y, z)]; }
    float at(std::size_t x, std::size_t y, std::size_t z = 0) const {
        return values[grid.index(x, y, z)];
    }
    void validate() const;
};

enum class RayState : std::uint8_t { unmeasured = 0, measured = 1, extrapolated = 2 };

/// Per-ray measurement flags in the same index space as the sinogram.
/// `extrapolated` rays carry synthetic data usable by analytic reconstruction
/// but count as unmeasured for data-consistent reconstruction.
struct MeasurementMask {
    std::vector<RayState> states;

    MeasurementMask() = default;
    MeasurementMask(std::size_t n, RayState s) : states(n, s) {}

    bool is_measured(std::size_t i) const { return states[i] == RayState::measured; }
    bool has_data(std::size_t i) const { return states[i] != RayState::unmeasured; }
    std::size_t count(RayState s) const;
    bool operator==(const MeasurementMask&) const = default;
};

/// Line integrals ordered column-fastest, then row, then view.
struct Sinogram {
    ScanGeometry geometry;
    std::vector<float> values;
    MeasurementMask mask;

    Sinogram() = default;
    explicit Sinogram(const ScanGeometry& g, float fill = 0.0f)
        : geometry(g), values(g.num_rays(), fill), mask(g.num_rays(), RayState::measured) {}

    std::size_t index(std::size_t view, std::size_t row, std::size_t col) const {
        return (view * geometry.detector_rows + row) * geometry.detector_cols + col;
    }
    std::span<float> view(std::size_t v) {
        return {values.data() + v * geometry.rays_per_view(), geometry.rays_per_view()};
    }
    std::span<const float> view(std::size_t v) const {
        return {values.data() + v * geometry.rays_per_view(), geometry.rays_per_view()};
    }
    /// Number of views with at least one measured ray.
    std::size_t measured_view_count() const;
    void validate() const;
};

struct HuCalibration {
    double mu_water_per_mm = 0.02;

    void validate() const {
        if (!(mu_water_per_mm > 0.0)) throw Error("mu_water_per_mm must be positive");
    }
    /// Attenuation change per Hounsfield unit.
    double mu_per_hu() const { return mu_water_per_mm / 1000.0; }
};

double hu_to_mu(double hu, const HuCalibration& cal = {});
double mu_to_hu(double mu, const HuCalibration& cal = {});

}  // namespace dcr
