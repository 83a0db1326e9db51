#include "dcr/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dcr/io.hpp"
#include "dcr/metrics.hpp"

namespace dcr {
namespace {

void check_inside_grid(const ImageGrid& g, const Lesion& l) {
    for (int a = 0; a < 3; ++a) {
        if (a == 2 && g.dims[2] == 1) continue;
        const double lo = g.origin_mm[a] - 0.5 * g.spacing_mm[a];
        const double hi = g.origin_mm[a] + (static_cast<double>(g.dims[a]) - 0.5) * g.spacing_mm[a];
        if (l.center_mm[a] < lo || l.center_mm[a] > hi) throw Error("lesion lies outside the grid");
    }
}

void blur_axis(std::vector<float>& data, const ImageGrid& g, int axis, const std::vector<double>& kernel) {
    const long half = static_cast<long>(kernel.size() / 2);
    const long n = static_cast<long>(g.dims[static_cast<std::size_t>(axis)]);
    if (n == 1) return;
    const std::vector<float> src = data;
    const std::size_t stride = axis == 0 ? 1 : axis == 1 ? g.dims[0] : g.dims[0] * g.dims[1];
    for (std::size_t z = 0; z < g.dims[2]; ++z)
        for (std::size_t y = 0; y < g.dims[1]; ++y)
            for (std::size_t x = 0; x < g.dims[0]; ++x) {
                const std::size_t i = g.index(x, y, z);
                const long pos = static_cast<long>(axis == 0 ? x : axis == 1 ? y : z);
                double s = 0.0;
                for (long k = -half; k <= half; ++k) {
                    const long q = std::clamp(pos + k, 0L, n - 1);
                    const auto j = static_cast<std::ptrdiff_t>(i) + (q - pos) * static_cast<std::ptrdiff_t>(stride);
                    s += kernel[static_cast<std::size_t>(k + half)] * src[static_cast<std::size_t>(j)];
                }
                data[i] = static_cast<float>(s);
            }
}

}  // namespace

void DegradationSpec::validate() const {
    if (!(blur_fwhm_mm >= 0.0)) throw Error("blur_fwhm_mm must be non-negative");
    for (const auto& l : fake_lesions)
        if (!(l.radius_mm > 0.0)) throw Error("lesion radius must be positive");
    for (const auto& l : removed_lesions)
        if (!(l.radius_mm > 0.0)) throw Error("lesion radius must be positive");
}

Volume gaussian_blur(const Volume& vol, double fwhm_mm) {
    if (fwhm_mm <= 0.0) return vol;
    Volume out = vol;
    const double sigma_mm = fwhm_mm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    for (int axis = 0; axis < 3; ++axis) {
        const double sigma = sigma_mm / vol.grid.spacing_mm[static_cast<std::size_t>(axis)];
        const long half = std::max(1L, static_cast<long>(std::ceil(3.0 * sigma)));
        std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
        double sum = 0.0;
        for (long k = -half; k <= half; ++k) {
            const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
            kernel[static_cast<std::size_t>(k + half)] = w;
            sum += w;
        }
        for (double& w : kernel) w /= sum;
        blur_axis(out.values, out.grid, axis, kernel);
    }
    return out;
}

Volume resample(const Volume& src, const ImageGrid& target) {
    target.validate();
    if (src.grid == target) return src;
    const auto& g = src.grid;
    Volume out(target);
    auto coord = [&](double p, int a, long& i0, double& w) {
        const long n = static_cast<long>(g.dims[static_cast<std::size_t>(a)]);
        double q = (p - g.origin_mm[static_cast<std::size_t>(a)]) / g.spacing_mm[static_cast<std::size_t>(a)];
        q = std::clamp(q, 0.0, static_cast<double>(n - 1));
        i0 = std::min(static_cast<long>(std::floor(q)), std::max(0L, n - 2));
        w = n > 1 ? q - static_cast<double>(i0) : 0.0;
    };
    auto at = [&](long x, long y, long z) {
        x = std::min(x, static_cast<long>(g.dims[0]) - 1);
        y = std::min(y, static_cast<long>(g.dims[1]) - 1);
        z = std::min(z, static_cast<long>(g.dims[2]) - 1);
        return static_cast<double>(src.values[g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                                      static_cast<std::size_t>(z))]);
    };
    for (std::size_t z = 0; z < target.dims[2]; ++z)
        for (std::size_t y = 0; y < target.dims[1]; ++y)
            for (std::size_t x = 0; x < target.dims[0]; ++x) {
                const auto p = target.voxel_center(x, y, z);
                long ix, iy, iz;
                double wx, wy, wz;
                coord(p[0], 0, ix, wx);
                coord(p[1], 1, iy, wy);
                coord(p[2], 2, iz, wz);
                double v = 0.0;
                for (int k = 0; k < 2; ++k)
                    for (int j = 0; j < 2; ++j)
                        for (int i = 0; i < 2; ++i) {
                            const double w = (i ? wx : 1.0 - wx) * (j ? wy : 1.0 - wy) * (k ? wz : 1.0 - wz);
                            if (w != 0.0) v += w * at(ix + i, iy + j, iz + k);
                        }
                out.at(x, y, z) = static_cast<float>(v);
            }
    return out;
}

Volume load_prior(const PriorSource& src, const ImageGrid& grid, const Volume* truth, const HuCalibration& cal) {
    Volume prior;
    if (src.kind == PriorKind::file) {
        if (!std::filesystem::exists(src.path)) throw Error("prior file " + src.path.string() + " does not exist");
        prior = resample(load_volume(src.path, cal), grid);
    } else {
        if (truth == nullptr) throw Error("degraded_oracle prior needs a reference image");
        prior = resample(degrade(*truth, src.degradation, cal), grid);
    }
    for (float& v : prior.values) {
        if (!std::isfinite(v)) throw Error("prior contains non-finite values");
        v = std::max(v, 0.0f);
    }
    return prior;
}

Volume degrade(const Volume& truth, const DegradationSpec& spec, const HuCalibration& cal) {
    spec.validate();
    truth.validate();
    const auto& g = truth.grid;
    for (const auto& l : spec.fake_lesions) check_inside_grid(g, l);
    for (const auto& l : spec.removed_lesions) check_inside_grid(g, l);

    Volume out = gaussian_blur(truth, spec.blur_fwhm_mm);

    for (const auto& l : spec.removed_lesions) {
        const RegionMask inner = lesion_mask(g, l.center_mm, l.radius_mm);
        const RegionMask shell = subtract(lesion_mask(g, l.center_mm, kAnnulusOuter * l.radius_mm),
                                          lesion_mask(g, l.center_mm, kAnnulusInner * l.radius_mm));
        std::vector<float> ring;
        for (std::size_t i = 0; i < out.values.size(); ++i)
            if (shell.contains(i)) ring.push_back(out.values[i]);
        if (ring.empty()) throw Error("removed lesion has an empty background annulus");
        const auto mid = ring.begin() + static_cast<std::ptrdiff_t>(ring.size() / 2);
        std::nth_element(ring.begin(), mid, ring.end());
        const float median = *mid;
        for (std::size_t i = 0; i < out.values.size(); ++i)
            if (inner.contains(i)) out.values[i] = median;
    }

    if (spec.bias_amplitude_hu != 0.0) {
        // Sum of a few plane waves with wavelengths longer than the grid.
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double extent = 0.0;
        for (int a = 0; a < 2; ++a) extent = std::max(extent, static_cast<double>(g.dims[a]) * g.spacing_mm[a]);
        struct Wave {
            double kx, ky, kz, phase, amp;
        };
        std::vector<Wave> waves;
        for (int k = 0; k < 4; ++k) {
            const double theta = 2.0 * std::numbers::pi * unit(rng);
            const double lambda = extent * (1.0 + 1.5 * unit(rng));
            const double kmag = 2.0 * std::numbers::pi / lambda;
            const double kz = g.dims[2] > 1 ? kmag * (unit(rng) - 0.5) : 0.0;
            waves.push_back({kmag * std::cos(theta), kmag * std::sin(theta), kz,
                             2.0 * std::numbers::pi * unit(rng), 0.5 + unit(rng)});
        }
        std::vector<double> field(g.size(), 0.0);
        double peak = 0.0;
        for (std::size_t z = 0; z < g.dims[2]; ++z)
            for (std::size_t y = 0; y < g.dims[1]; ++y)
                for (std::size_t x = 0; x < g.dims[0]; ++x) {
                    const std::size_t i = g.index(x, y, z);
                    if (!(truth.values[i] > 0.0f)) continue;
                    const auto p = g.voxel_center(x, y, z);
                    double f = 0.0;
                    for (const auto& w : waves) f += w.amp * std::cos(w.kx * p[0] + w.ky * p[1] + w.kz * p[2] + w.phase);
                    field[i] = f;
                    peak = std::max(peak, std::abs(f));
                }
        if (peak > 0.0) {
            const double scale = spec.bias_amplitude_hu * cal.mu_per_hu() / peak;
            for (std::size_t i = 0; i < field.size(); ++i)
                out.values[i] = static_cast<float>(out.values[i] + scale * field[i]);
        }
    }

    for (const auto& l : spec.fake_lesions) {
        const RegionMask m = lesion_mask(g, l.center_mm, l.radius_mm);
        const double delta = l.contrast_hu * cal.mu_per_hu();
        for (std::size_t i = 0; i < out.values.size(); ++i)
            if (m.contains(i)) out.values[i] = static_cast<float>(out.values[i] + delta);
    }
    return out;
}

void to_json(nlohmann::json& j, const DegradationSpec& s) {
    j = {{"blur_fwhm_mm", s.blur_fwhm_mm},
         {"bias_amplitude_hu", s.bias_amplitude_hu},
         {"fake_lesions", s.fake_lesions},
         {"removed_lesions", s.removed_lesions},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, DegradationSpec& s) {
    s.blur_fwhm_mm = j.value("blur_fwhm_mm", 0.0);
    s.bias_amplitude_hu = j.value("bias_amplitude_hu", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.fake_lesions.clear();
    s.removed_lesions.clear();
    for (const auto& l : j.value("fake_lesions", nlohmann::json::array())) s.fake_lesions.push_back(l.get<Lesion>());
    for (const auto& l : j.value("removed_lesions", nlohmann::json::array()))
        s.removed_lesions.push_back(l.get<Lesion>());
}

}  // namespace dcr
