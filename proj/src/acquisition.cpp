#include "dcr/acquisition.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace dcr {
namespace {

// SplitMix64 as a UniformRandomBitGenerator; one instance per ray.
class RayStream {
public:
    using result_type = std::uint64_t;
    RayStream(std::uint64_t seed, std::uint64_t ray) : state_(mix(seed ^ mix(ray + 0x9e3779b97f4a7c15ull))) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return mix(state_ += 0x9e3779b97f4a7c15ull); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    std::uint64_t state_;
};

void flag_view(Sinogram& s, std::size_t view) {
    const std::size_t per = s.geometry.rays_per_view();
    for (std::size_t i = view * per; i < (view + 1) * per; ++i) {
        s.mask.states[i] = RayState::unmeasured;
        s.values[i] = 0.0f;
    }
}

}  // namespace

std::size_t truncation_first_col(std::size_t detector_cols, std::size_t kept_cols) {
    return (detector_cols - kept_cols) / 2;
}

Sinogram restrict_truncation(const Sinogram& sino, std::size_t kept_cols) {
    const auto& g = sino.geometry;
    if (kept_cols == 0 || kept_cols > g.detector_cols)
        throw Error("kept_cols must lie in [1, detector_cols]");
    Sinogram out = sino;
    const std::size_t first = truncation_first_col(g.detector_cols, kept_cols);
    for (std::size_t v = 0; v < g.num_views(); ++v)
        for (std::size_t r = 0; r < g.detector_rows; ++r)
            for (std::size_t c = 0; c < g.detector_cols; ++c) {
                if (c >= first && c < first + kept_cols) continue;
                const std::size_t i = out.index(v, r, c);
                out.mask.states[i] = RayState::unmeasured;
                out.values[i] = 0.0f;
            }
    return out;
}

Sinogram restrict_limited_angle(const Sinogram& sino, double range_deg) {
    const auto& a = sino.geometry.angles_deg;
    if (a.empty()) throw Error("angle list is empty");
    constexpr double tol = 1e-9;
    if (!(range_deg > 0.0) || range_deg > sino.geometry.angular_span_deg() + tol)
        throw Error("range_deg must lie in (0, angular coverage]");
    Sinogram out = sino;
    for (std::size_t v = 0; v < a.size(); ++v)
        if (a[v] - a.front() > range_deg + tol) flag_view(out, v);
    return out;
}

Sinogram restrict_sparse_view(const Sinogram& sino, std::size_t stride) {
    if (stride == 0) throw Error("stride must be at least 1");
    Sinogram out = sino;
    for (std::size_t v = 0; v < sino.geometry.num_views(); ++v)
        if (v % stride != 0) flag_view(out, v);
    return out;
}

Sinogram add_poisson_noise(const Sinogram& sino, const NoiseSpec& noise) {
    noise.validate();
    if (!noise.enabled) return sino;
    Sinogram out = sino;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (!out.mask.is_measured(i)) continue;
        const double p = out.values[i];
        if (p < 0.0) throw Error("negative line integral on a measured ray");
        RayStream rng(noise.seed, i);
        std::poisson_distribution<long long> draw(noise.photons_i0 * std::exp(-p));
        const long long count = draw(rng);
        out.values[i] = static_cast<float>(-std::log(static_cast<double>(std::max(count, 1LL)) / noise.photons_i0));
    }
    return out;
}

}  // namespace dcr
