#include "dcr/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dcr {
namespace {

struct Vec3 {
    double x, y, z;
};

struct ViewFrame {
    Vec3 source;
    Vec3 e_src;  // unit vector isocenter -> source
    Vec3 e_u;    // detector column axis
    Vec3 det_center;
};

ViewFrame view_frame(const ScanGeometry& g, std::size_t view) {
    const double beta = g.angles_deg[view] * std::numbers::pi / 180.0;
    const double c = std::cos(beta);
    const double s = std::sin(beta);
    ViewFrame f;
    f.e_src = {c, s, 0.0};
    f.e_u = {-s, c, 0.0};
    f.source = {g.source_to_isocenter_mm * c, g.source_to_isocenter_mm * s, 0.0};
    const double back = g.source_to_detector_mm - g.source_to_isocenter_mm;
    f.det_center = {-back * c, -back * s, 0.0};
    return f;
}

void check_compatible(const ScanGeometry& geom, const ImageGrid& grid) {
    geom.validate();
    grid.validate();
    if (geom.mode == ScanMode::fan_beam_2d && grid.dims[2] != 1)
        throw Error("fan_beam_2d geometry requires a single-slice grid");
}

// Intersects the parametric line p(t) = a + t*d (index coordinates) with the
// open interval (-1, n) on one axis, narrowing [t0, t1].
bool clip_axis(double a, double d, double n, double& t0, double& t1) {
    constexpr double lo = -1.0;
    if (std::abs(d) < 1e-15) return a > lo && a < n;
    double ta = (lo - a) / d;
    double tb = (n - a) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    return t0 < t1;
}

class RayIntegrator {
public:
    RayIntegrator(const Volume& vol, double sampling_per_mm, bool three_d)
        : vol_(vol), g_(vol.grid), rate_(sampling_per_mm), three_d_(three_d) {
        nx_ = static_cast<long>(g_.dims[0]);
        ny_ = static_cast<long>(g_.dims[1]);
        nz_ = static_cast<long>(g_.dims[2]);
    }

    double integrate(const Vec3& from, const Vec3& to) const {
        const Vec3 d{to.x - from.x, to.y - from.y, to.z - from.z};
        const double len = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
        const Vec3 dir{d.x / len, d.y / len, d.z / len};

        // Index-space line: q(t) = a + t * b, t in mm along the ray.
        const double ax = (from.x - g_.origin_mm[0]) / g_.spacing_mm[0];
        const double ay = (from.y - g_.origin_mm[1]) / g_.spacing_mm[1];
        const double az = (from.z - g_.origin_mm[2]) / g_.spacing_mm[2];
        const double bx = dir.x / g_.spacing_mm[0];
        const double by = dir.y / g_.spacing_mm[1];
        const double bz = dir.z / g_.spacing_mm[2];

        double t0 = 0.0;
        double t1 = std::numeric_limits<double>::infinity();
        if (!clip_axis(ax, bx, static_cast<double>(nx_), t0, t1)) return 0.0;
        if (!clip_axis(ay, by, static_cast<double>(ny_), t0, t1)) return 0.0;
        if (three_d_ && !clip_axis(az, bz, static_cast<double>(nz_), t0, t1)) return 0.0;

        const double length = t1 - t0;
        const auto n = static_cast<long>(std::ceil(length * rate_));
        if (n <= 0) return 0.0;
        const double step = length / static_cast<double>(n);

        double sum = 0.0;
        double t = t0 + 0.5 * step;
        if (three_d_) {
            for (long k = 0; k < n; ++k, t += step) sum += trilinear(ax + t * bx, ay + t * by, az + t * bz);
        } else {
            for (long k = 0; k < n; ++k, t += step) sum += bilinear(ax + t * bx, ay + t * by);
        }
        return sum * step;
    }

private:
    double bilinear(double qx, double qy) const {
        const double fx0 = std::floor(qx);
        const double fy0 = std::floor(qy);
        const long ix = static_cast<long>(fx0);
        const long iy = static_cast<long>(fy0);
        const double wx = qx - fx0;
        const double wy = qy - fy0;
        const float* v = vol_.values.data();
        if (ix >= 0 && iy >= 0 && ix + 1 < nx_ && iy + 1 < ny_) {
            const float* p = v + iy * nx_ + ix;
            const double top = (1.0 - wx) * p[0] + wx * p[1];
            const double bot = (1.0 - wx) * p[nx_] + wx * p[nx_ + 1];
            return (1.0 - wy) * top + wy * bot;
        }
        double s = 0.0;
        for (int j = 0; j < 2; ++j) {
            const long y = iy + j;
            if (y < 0 || y >= ny_) continue;
            const double wyj = j ? wy : 1.0 - wy;
            for (int i = 0; i < 2; ++i) {
                const long x = ix + i;
                if (x < 0 || x >= nx_) continue;
                s += wyj * (i ? wx : 1.0 - wx) * v[y * nx_ + x];
            }
        }
        return s;
    }

    double trilinear(double qx, double qy, double qz) const {
        const double fz0 = std::floor(qz);
        const long iz = static_cast<long>(fz0);
        const double wz = qz - fz0;
        double s = 0.0;
        for (int k = 0; k < 2; ++k) {
            const long z = iz + k;
            if (z < 0 || z >= nz_) continue;
            s += (k ? wz : 1.0 - wz) * bilinear_slice(qx, qy, z);
        }
        return s;
    }

    double bilinear_slice(double qx, double qy, long z) const {
        const double fx0 = std::floor(qx);
        const double fy0 = std::floor(qy);
        const long ix = static_cast<long>(fx0);
        const long iy = static_cast<long>(fy0);
        const double wx = qx - fx0;
        const double wy = qy - fy0;
        const float* v = vol_.values.data() + z * nx_ * ny_;
        double s = 0.0;
        for (int j = 0; j < 2; ++j) {
            const long y = iy + j;
            if (y < 0 || y >= ny_) continue;
            const double wyj = j ? wy : 1.0 - wy;
            for (int i = 0; i < 2; ++i) {
                const long x = ix + i;
                if (x < 0 || x >= nx_) continue;
                s += wyj * (i ? wx : 1.0 - wx) * v[y * nx_ + x];
            }
        }
        return s;
    }

    const Volume& vol_;
    const ImageGrid& g_;
    double rate_;
    bool three_d_;
    long nx_, ny_, nz_;
};

}  // namespace

void forward_project_view(const Volume& vol, const ScanGeometry& geom, std::size_t view,
                          double sampling_per_mm, std::span<float> out) {
    if (out.size() != geom.rays_per_view()) throw Error("view buffer has wrong size");
    const bool three_d = geom.mode == ScanMode::cone_beam_3d;
    const RayIntegrator integrator(vol, sampling_per_mm, three_d);
    const ViewFrame f = view_frame(geom, view);
    for (std::size_t r = 0; r < geom.detector_rows; ++r) {
        const double v = three_d ? geom.row_v(r) : 0.0;
        for (std::size_t c = 0; c < geom.detector_cols; ++c) {
            const double u = geom.column_u(c);
            const Vec3 pixel{f.det_center.x + u * f.e_u.x, f.det_center.y + u * f.e_u.y, v};
            out[r * geom.detector_cols + c] = static_cast<float>(integrator.integrate(f.source, pixel));
        }
    }
}

Sinogram forward_project(const Volume& vol, const ScanGeometry& geom, double sampling_per_mm) {
    if (!(sampling_per_mm > 0.0)) throw Error("sampling_per_mm must be positive");
    check_compatible(geom, vol.grid);
    if (vol.values.size() != vol.grid.size()) throw Error("volume value count does not match grid");
    Sinogram sino(geom);
    for (std::size_t v = 0; v < geom.num_views(); ++v)
        forward_project_view(vol, geom, v, sampling_per_mm, sino.view(v));
    return sino;
}

std::size_t backproject_view(std::span<const float> view_values, const ScanGeometry& geom,
                             std::size_t view, const ImageGrid& grid, std::span<float> out,
                             std::span<float> normalizer) {
    if (view_values.size() != geom.rays_per_view()) throw Error("view buffer has wrong size");
    if (out.size() != grid.size()) throw Error("output buffer does not match grid");
    const bool with_norm = !normalizer.empty();
    if (with_norm && normalizer.size() != grid.size()) throw Error("normalizer does not match grid");

    const bool three_d = geom.mode == ScanMode::cone_beam_3d;
    const ViewFrame f = view_frame(geom, view);
    const double sdd = geom.source_to_detector_mm;
    const double sid = geom.source_to_isocenter_mm;
    const double du = geom.pixel_u_mm;
    const double dv = geom.pixel_v_mm;
    const double c_mid = 0.5 * static_cast<double>(geom.detector_cols - 1);
    const double r_mid = 0.5 * static_cast<double>(geom.detector_rows - 1);
    const long cols = static_cast<long>(geom.detector_cols);
    const long rows = static_cast<long>(geom.detector_rows);
    const double voxel_measure = grid.spacing_mm[0] * grid.spacing_mm[1] * (three_d ? grid.spacing_mm[2] : 1.0);

    std::size_t touched = 0;
    for (std::size_t z = 0; z < grid.dims[2]; ++z) {
        for (std::size_t y = 0; y < grid.dims[1]; ++y) {
            for (std::size_t x = 0; x < grid.dims[0]; ++x) {
                const auto p = grid.voxel_center(x, y, z);
                const double depth = sid - (p[0] * f.e_src.x + p[1] * f.e_src.y);
                if (depth <= 0.0) continue;
                const double lateral = p[0] * f.e_u.x + p[1] * f.e_u.y;
                const double axial = three_d ? p[2] : 0.0;
                const double dist = std::sqrt(depth * depth + lateral * lateral + axial * axial);

                const double cu = sdd * lateral / depth / du + c_mid;
                const double fc = std::floor(cu);
                const long c0 = static_cast<long>(fc);
                const double wc = cu - fc;
                if (c0 + 1 < 0 || c0 >= cols) continue;

                double weight;
                long r0 = 0;
                double wr = 0.0;
                if (three_d) {
                    const double rv = sdd * axial / depth / dv + r_mid;
                    const double fr = std::floor(rv);
                    r0 = static_cast<long>(fr);
                    wr = rv - fr;
                    if (r0 + 1 < 0 || r0 >= rows) continue;
                    weight = voxel_measure * dist * sdd * sdd / (du * dv * depth * depth * depth);
                } else {
                    weight = voxel_measure * dist * sdd / (du * depth * depth);
                }

                double value = 0.0;
                double coverage = 0.0;
                for (int j = 0; j < (three_d ? 2 : 1); ++j) {
                    const long r = r0 + j;
                    if (r < 0 || r >= rows) continue;
                    const double wrj = three_d ? (j ? wr : 1.0 - wr) : 1.0;
                    for (int i = 0; i < 2; ++i) {
                        const long c = c0 + i;
                        if (c < 0 || c >= cols) continue;
                        const double w = wrj * (i ? wc : 1.0 - wc);
                        value += w * view_values[static_cast<std::size_t>(r * cols + c)];
                        coverage += w;
                    }
                }
                if (coverage <= 0.0) continue;
                const std::size_t idx = grid.index(x, y, z);
                out[idx] += static_cast<float>(weight * value);
                if (with_norm) normalizer[idx] += static_cast<float>(weight * coverage);
                ++touched;
            }
        }
    }
    return touched;
}

Volume backproject(const Sinogram& sino, const ImageGrid& grid) {
    check_compatible(sino.geometry, grid);
    if (sino.values.size() != sino.geometry.num_rays()) throw Error("sinogram value count does not match geometry");
    Volume out(grid);
    std::size_t touched = 0;
    for (std::size_t v = 0; v < sino.geometry.num_views(); ++v)
        touched += backproject_view(sino.view(v), sino.geometry, v, grid, out.values);
    if (touched == 0) throw Error("no voxel of the grid projects onto the detector");
    return out;
}

Sinogram ray_row_sum(const ScanGeometry& geom, const ImageGrid& grid, double sampling_per_mm) {
    return forward_project(Volume(grid, 1.0f), geom, sampling_per_mm);
}

}  // namespace dcr
