#include "dcr/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dcr {

double ScanGeometry::column_u(std::size_t col) const {
    return (static_cast<double>(col) - 0.5 * static_cast<double>(detector_cols - 1)) * pixel_u_mm;
}

double ScanGeometry::row_v(std::size_t row) const {
    return (static_cast<double>(row) - 0.5 * static_cast<double>(detector_rows - 1)) * pixel_v_mm;
}

double ScanGeometry::angular_span_deg() const {
    if (angles_deg.size() < 2) return 0.0;
    return angles_deg.back() - angles_deg.front();
}

double ScanGeometry::mean_step_deg() const {
    if (angles_deg.size() < 2) return 0.0;
    return angular_span_deg() / static_cast<double>(angles_deg.size() - 1);
}

double ScanGeometry::fov_radius_mm(std::size_t first_col, std::size_t cols) const {
    if (cols == 0 || first_col + cols > detector_cols) throw Error("column band outside detector");
    const double u_lo = column_u(first_col) - 0.5 * pixel_u_mm;
    const double u_hi = column_u(first_col + cols - 1) + 0.5 * pixel_u_mm;
    if (u_lo >= 0.0 || u_hi <= 0.0) return 0.0;
    const double u = std::min(-u_lo, u_hi);
    return source_to_isocenter_mm * std::sin(std::atan(u / source_to_detector_mm));
}

void ScanGeometry::validate() const {
    if (!(source_to_isocenter_mm > 0.0)) throw Error("source_to_isocenter_mm must be positive");
    if (!(source_to_detector_mm > source_to_isocenter_mm))
        throw Error("source_to_detector_mm must exceed source_to_isocenter_mm");
    if (detector_cols == 0 || detector_rows == 0) throw Error("detector must have at least one pixel");
    if (!(pixel_u_mm > 0.0) || !(pixel_v_mm > 0.0)) throw Error("detector pixel size must be positive");
    if (angles_deg.empty()) throw Error("angle list is empty");
    for (std::size_t i = 1; i < angles_deg.size(); ++i)
        if (!(angles_deg[i] > angles_deg[i - 1])) throw Error("angles must be strictly increasing");
    if (mode == ScanMode::fan_beam_2d && detector_rows != 1)
        throw Error("fan_beam_2d mode requires detector_rows == 1");
    if (fov_radius_mm() <= 0.0) throw Error("detector does not cover the isocenter ray");
}

std::vector<double> angle_range_deg(double start_deg, double step_deg, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = start_deg + step_deg * static_cast<double>(i);
    return out;
}

void ImageGrid::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] == 0) throw Error("grid dimensions must be at least 1");
        if (!(spacing_mm[a] > 0.0)) throw Error("grid spacing must be positive");
    }
}

ImageGrid ImageGrid::centered(std::size_t nx, std::size_t ny, std::size_t nz, double sx, double sy,
                              double sz) {
    ImageGrid g;
    g.dims = {nx, ny, nz};
    g.spacing_mm = {sx, sy, sz};
    g.origin_mm = {-0.5 * static_cast<double>(nx - 1) * sx, -0.5 * static_cast<double>(ny - 1) * sy,
                   -0.5 * static_cast<double>(nz - 1) * sz};
    return g;
}

void Volume::validate() const {
    grid.validate();
    if (values.size() != grid.size()) throw Error("volume value count does not match grid");
    for (float v : values)
        if (!std::isfinite(v)) throw Error("volume contains non-finite values");
}

std::size_t MeasurementMask::count(RayState s) const {
    return static_cast<std::size_t>(std::count(states.begin(), states.end(), s));
}

std::size_t Sinogram::measured_view_count() const {
    const std::size_t per = geometry.rays_per_view();
    std::size_t n = 0;
    for (std::size_t v = 0; v < geometry.num_views(); ++v) {
        const auto first = mask.states.begin() + static_cast<std::ptrdiff_t>(v * per);
        if (std::find(first, first + static_cast<std::ptrdiff_t>(per), RayState::measured) !=
            first + static_cast<std::ptrdiff_t>(per))
            ++n;
    }
    return n;
}

void Sinogram::validate() const {
    geometry.validate();
    if (values.size() != geometry.num_rays()) throw Error("sinogram value count does not match geometry");
    if (mask.states.size() != values.size()) throw Error("mask size does not match sinogram");
    for (float v : values)
        if (!std::isfinite(v)) throw Error("sinogram contains non-finite values");
}

double hu_to_mu(double hu, const HuCalibration& cal) {
    return cal.mu_water_per_mm * (1.0 + hu / 1000.0);
}

double mu_to_hu(double mu, const HuCalibration& cal) {
    return 1000.0 * (mu - cal.mu_water_per_mm) / cal.mu_water_per_mm;
}

}  // namespace dcr
