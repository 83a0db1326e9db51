#include "dcr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dcr {
namespace {

void check_pair(const Volume& a, const Volume& b, const RegionMask& mask) {
    if (!(a.grid == b.grid)) throw Error("images are on different grids");
    if (!(mask.grid == a.grid) || mask.inside.size() != a.values.size())
        throw Error("region mask does not match the image grid");
    if (mask.count() == 0) throw Error("region mask is empty");
}

// Separable filter along one axis of a slice with truncated, renormalised
// weights.
void filter_axis(const std::vector<double>& src, std::vector<double>& dst, std::size_t nx, std::size_t ny,
                 const std::vector<double>& kernel, bool along_x) {
    const long half = static_cast<long>(kernel.size() / 2);
    const long n = static_cast<long>(along_x ? nx : ny);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) {
            const long pos = static_cast<long>(along_x ? x : y);
            double s = 0.0;
            double w = 0.0;
            for (long k = -half; k <= half; ++k) {
                const long q = pos + k;
                if (q < 0 || q >= n) continue;
                const double kw = kernel[static_cast<std::size_t>(k + half)];
                const std::size_t idx = along_x ? y * nx + static_cast<std::size_t>(q)
                                                : static_cast<std::size_t>(q) * nx + x;
                s += kw * src[idx];
                w += kw;
            }
            dst[y * nx + x] = s / w;
        }
}

std::vector<double> gaussian_blur_slice(const std::vector<double>& img, std::size_t nx, std::size_t ny,
                                        const std::vector<double>& kernel) {
    std::vector<double> tmp(img.size());
    std::vector<double> out(img.size());
    filter_axis(img, tmp, nx, ny, kernel, true);
    filter_axis(tmp, out, nx, ny, kernel, false);
    return out;
}

}  // namespace

std::size_t RegionMask::count() const {
    return static_cast<std::size_t>(std::count_if(inside.begin(), inside.end(), [](auto v) { return v != 0; }));
}

RegionMask ring_mask(const ImageGrid& grid, double r_inner_mm, double r_outer_mm) {
    RegionMask m(grid, RegionKind::custom);
    for (std::size_t z = 0; z < grid.dims[2]; ++z)
        for (std::size_t y = 0; y < grid.dims[1]; ++y)
            for (std::size_t x = 0; x < grid.dims[0]; ++x) {
                const auto c = grid.voxel_center(x, y, z);
                const double r = std::hypot(c[0], c[1]);
                m.inside[grid.index(x, y, z)] = r >= r_inner_mm && r <= r_outer_mm;
            }
    return m;
}

RegionMask fov_disk_mask(const ImageGrid& grid, double radius_mm) {
    RegionMask m = ring_mask(grid, 0.0, radius_mm);
    m.kind = RegionKind::fov_disk;
    return m;
}

RegionMask lesion_mask(const ImageGrid& grid, const std::array<double, 3>& center_mm, double radius_mm) {
    RegionMask m(grid, RegionKind::lesion);
    const bool planar = grid.dims[2] == 1;
    for (std::size_t z = 0; z < grid.dims[2]; ++z)
        for (std::size_t y = 0; y < grid.dims[1]; ++y)
            for (std::size_t x = 0; x < grid.dims[0]; ++x) {
                const auto c = grid.voxel_center(x, y, z);
                const double dx = c[0] - center_mm[0];
                const double dy = c[1] - center_mm[1];
                const double dz = planar ? 0.0 : c[2] - center_mm[2];
                m.inside[grid.index(x, y, z)] = dx * dx + dy * dy + dz * dz <= radius_mm * radius_mm;
            }
    return m;
}

RegionMask body_mask(const Volume& vol, double threshold_mu) {
    RegionMask m(vol.grid, RegionKind::body);
    for (std::size_t i = 0; i < vol.values.size(); ++i) m.inside[i] = vol.values[i] > threshold_mu;
    return m;
}

RegionMask edge_band_mask(const Volume& vol, std::size_t width_voxels, double tolerance_mu) {
    const auto& g = vol.grid;
    const long n[3] = {static_cast<long>(g.dims[0]), static_cast<long>(g.dims[1]), static_cast<long>(g.dims[2])};
    auto idx = [&](long x, long y, long z) {
        return g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z));
    };
    auto inside = [&](long x, long y, long z) {
        return x >= 0 && y >= 0 && z >= 0 && x < n[0] && y < n[1] && z < n[2];
    };
    constexpr long step[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

    std::vector<std::uint8_t> edge(g.size(), 0);
    for (long z = 0; z < n[2]; ++z)
        for (long y = 0; y < n[1]; ++y)
            for (long x = 0; x < n[0]; ++x) {
                const float v = vol.values[idx(x, y, z)];
                for (const auto& s : step) {
                    const long xx = x + s[0], yy = y + s[1], zz = z + s[2];
                    if (inside(xx, yy, zz) && std::abs(vol.values[idx(xx, yy, zz)] - v) > tolerance_mu) {
                        edge[idx(x, y, z)] = 1;
                        break;
                    }
                }
            }

    RegionMask m(g, RegionKind::custom);
    const long w = static_cast<long>(width_voxels);
    const long wz = n[2] > 1 ? w : 0;
    for (long z = 0; z < n[2]; ++z)
        for (long y = 0; y < n[1]; ++y)
            for (long x = 0; x < n[0]; ++x) {
                if (!edge[idx(x, y, z)]) continue;
                for (long dz = -wz; dz <= wz; ++dz)
                    for (long dy = -w; dy <= w; ++dy)
                        for (long dx = -w; dx <= w; ++dx)
                            if (inside(x + dx, y + dy, z + dz)) m.inside[idx(x + dx, y + dy, z + dz)] = 1;
            }
    return m;
}

RegionMask intersect(const RegionMask& a, const RegionMask& b) {
    if (!(a.grid == b.grid)) throw Error("masks are on different grids");
    RegionMask m(a.grid, a.kind);
    for (std::size_t i = 0; i < m.inside.size(); ++i) m.inside[i] = a.inside[i] && b.inside[i];
    return m;
}

RegionMask subtract(const RegionMask& a, const RegionMask& b) {
    if (!(a.grid == b.grid)) throw Error("masks are on different grids");
    RegionMask m(a.grid, a.kind);
    for (std::size_t i = 0; i < m.inside.size(); ++i) m.inside[i] = a.inside[i] && !b.inside[i];
    return m;
}

RegionMask lesion_annulus(const RegionMask& lesion) {
    const auto& g = lesion.grid;
    const std::size_t n = lesion.count();
    if (n == 0) throw Error("lesion region is empty");
    const bool planar = g.dims[2] == 1;
    std::array<double, 3> c{0.0, 0.0, 0.0};
    for (std::size_t z = 0; z < g.dims[2]; ++z)
        for (std::size_t y = 0; y < g.dims[1]; ++y)
            for (std::size_t x = 0; x < g.dims[0]; ++x)
                if (lesion.contains(g.index(x, y, z))) {
                    const auto p = g.voxel_center(x, y, z);
                    for (int a = 0; a < 3; ++a) c[a] += p[a];
                }
    for (double& v : c) v /= static_cast<double>(n);
    const double r_eq = planar
        ? std::sqrt(static_cast<double>(n) * g.spacing_mm[0] * g.spacing_mm[1] / std::numbers::pi)
        : std::cbrt(3.0 * static_cast<double>(n) * g.spacing_mm[0] * g.spacing_mm[1] * g.spacing_mm[2] /
                    (4.0 * std::numbers::pi));
    RegionMask m(g, RegionKind::custom);
    const double r_in = kAnnulusInner * r_eq;
    const double r_out = kAnnulusOuter * r_eq;
    for (std::size_t z = 0; z < g.dims[2]; ++z)
        for (std::size_t y = 0; y < g.dims[1]; ++y)
            for (std::size_t x = 0; x < g.dims[0]; ++x) {
                const auto p = g.voxel_center(x, y, z);
                const double dz = planar ? 0.0 : p[2] - c[2];
                const double r = std::sqrt((p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]) + dz * dz);
                const std::size_t i = g.index(x, y, z);
                m.inside[i] = r >= r_in && r <= r_out && !lesion.contains(i);
            }
    return m;
}

double rmse_hu(const Volume& a, const Volume& b, const RegionMask& mask, const HuCalibration& cal) {
    check_pair(a, b, mask);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (!mask.contains(i)) continue;
        const double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(mask.count())) / cal.mu_per_hu();
}

double region_mean_hu(const Volume& img, const RegionMask& mask, const HuCalibration& cal) {
    if (mask.inside.size() != img.values.size()) throw Error("region mask does not match the image grid");
    const std::size_t n = mask.count();
    if (n == 0) throw Error("region mask is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < img.values.size(); ++i)
        if (mask.contains(i)) sum += img.values[i];
    return mu_to_hu(sum / static_cast<double>(n), cal);
}

double ssim(const Volume& a, const Volume& b, const RegionMask& mask, const HuCalibration& cal,
            const SsimParams& params) {
    check_pair(a, b, mask);
    const std::size_t nx = a.grid.dims[0];
    const std::size_t ny = a.grid.dims[1];
    const std::size_t plane = nx * ny;

    std::vector<double> kernel(static_cast<std::size_t>(params.window));
    const int half = params.window / 2;
    for (int k = -half; k <= half; ++k)
        kernel[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * k * k / (params.sigma_px * params.sigma_px));

    const double c1 = std::pow(params.k1 * params.dynamic_range_hu, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range_hu, 2);

    double total = 0.0;
    std::vector<double> ha(plane), hb(plane), aa(plane), bb(plane), ab(plane);
    for (std::size_t z = 0; z < a.grid.dims[2]; ++z) {
        const std::size_t off = z * plane;
        bool any = false;
        for (std::size_t i = 0; i < plane; ++i) any = any || mask.contains(off + i);
        if (!any) continue;
        for (std::size_t i = 0; i < plane; ++i) {
            // CT number shifted to [0, range] so air sits at zero intensity.
            ha[i] = mu_to_hu(a.values[off + i], cal) + 1000.0;
            hb[i] = mu_to_hu(b.values[off + i], cal) + 1000.0;
            aa[i] = ha[i] * ha[i];
            bb[i] = hb[i] * hb[i];
            ab[i] = ha[i] * hb[i];
        }
        const auto ma = gaussian_blur_slice(ha, nx, ny, kernel);
        const auto mb = gaussian_blur_slice(hb, nx, ny, kernel);
        const auto maa = gaussian_blur_slice(aa, nx, ny, kernel);
        const auto mbb = gaussian_blur_slice(bb, nx, ny, kernel);
        const auto mab = gaussian_blur_slice(ab, nx, ny, kernel);
        for (std::size_t i = 0; i < plane; ++i) {
            if (!mask.contains(off + i)) continue;
            const double va = maa[i] - ma[i] * ma[i];
            const double vb = mbb[i] - mb[i] * mb[i];
            const double cov = mab[i] - ma[i] * mb[i];
            total += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
                     ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
        }
    }
    return total / static_cast<double>(mask.count());
}

LesionReport lesion_probe(const Volume& img, const Volume& ref, const RegionMask& lesion, const HuCalibration& cal) {
    if (!(img.grid == ref.grid)) throw Error("images are on different grids");
    const RegionMask annulus = lesion_annulus(lesion);
    if (annulus.count() == 0) throw Error("lesion background annulus is empty");
    LesionReport r;
    r.contrast_hu = region_mean_hu(img, lesion, cal) - region_mean_hu(img, annulus, cal);
    r.reference_contrast_hu = region_mean_hu(ref, lesion, cal) - region_mean_hu(ref, annulus, cal);
    if (r.reference_contrast_hu == 0.0) throw Error("reference lesion contrast is zero");
    r.contrast_recovery_fraction = r.contrast_hu / r.reference_contrast_hu;
    return r;
}

}  // namespace dcr
