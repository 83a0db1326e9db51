#include "dcr/analytic.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>

namespace dcr {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// Owns an r2c/c2r plan pair for one padded length.
class RampFilterPlan {
public:
    RampFilterPlan(std::size_t n, double tau, RampFilter filter) : n_(n) {
        in_ = fftw_alloc_real(n_);
        spec_ = fftw_alloc_complex(n_ / 2 + 1);
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), in_, spec_, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spec_, in_, FFTW_ESTIMATE);

        // Band-limited ramp kernel sampled at tau, laid out circularly.
        std::fill(in_, in_ + n_, 0.0);
        in_[0] = 1.0 / (4.0 * tau * tau);
        for (std::size_t k = 1; k < n_ / 2; ++k) {
            if (k % 2 == 0) continue;
            const double v = -1.0 / (static_cast<double>(k * k) * kPi * kPi * tau * tau);
            in_[k] = v;
            in_[n_ - k] = v;
        }
        fftw_execute(forward_);
        response_.resize(n_ / 2 + 1);
        for (std::size_t k = 0; k <= n_ / 2; ++k) {
            double h = spec_[k][0] * tau;  // the kernel is even, so the spectrum is real
            if (filter == RampFilter::shepp_logan_window && k > 0) {
                const double x = kPi * static_cast<double>(k) / static_cast<double>(n_);
                h *= std::sin(x) / x;
            }
            response_[k] = h / static_cast<double>(n_);
        }
    }
    RampFilterPlan(const RampFilterPlan&) = delete;
    RampFilterPlan& operator=(const RampFilterPlan&) = delete;
    ~RampFilterPlan() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(in_);
        fftw_free(spec_);
    }

    void apply(const double* row, std::size_t len, double* out) {
        std::fill(in_, in_ + n_, 0.0);
        std::copy(row, row + len, in_);
        fftw_execute(forward_);
        for (std::size_t k = 0; k <= n_ / 2; ++k) {
            spec_[k][0] *= response_[k];
            spec_[k][1] *= response_[k];
        }
        fftw_execute(backward_);
        std::copy(in_, in_ + len, out);
    }

private:
    std::size_t n_;
    double* in_;
    fftw_complex* spec_;
    fftw_plan forward_;
    fftw_plan backward_;
    std::vector<double> response_;
};

std::size_t padded_length(std::size_t cols) { return std::bit_ceil(std::max<std::size_t>(2 * cols, 8)); }

bool is_full_scan(double span_deg, double step_deg) { return span_deg + step_deg >= 360.0 - 1e-6; }

double redundancy_weight(const ScanGeometry& g, const FbpConfig& cfg, double beta_rel, double gamma) {
    const double span = g.angular_span_deg();
    const double step = g.mean_step_deg();
    if (is_full_scan(span, step)) return 0.5;
    if (cfg.short_scan_weighting && span > 180.0) return parker_weight(beta_rel, gamma, span * kDeg);
    return 180.0 / (span + step);
}

// Angular integration weights (radians) for the views that carry data.
std::vector<double> angular_weights(const Sinogram& sino, std::vector<std::size_t>& active) {
    const auto& g = sino.geometry;
    const std::size_t per = g.rays_per_view();
    active.clear();
    for (std::size_t v = 0; v < g.num_views(); ++v)
        for (std::size_t i = v * per; i < (v + 1) * per; ++i)
            if (sino.mask.has_data(i)) {
                active.push_back(v);
                break;
            }
    if (active.size() < 2) throw Error("filtered backprojection needs at least two views with data");

    const auto& a = g.angles_deg;
    const std::size_t n = active.size();
    const double span = a[active.back()] - a[active.front()];
    const bool wrap = is_full_scan(span, span / static_cast<double>(n - 1));
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double prev = k > 0 ? a[active[k - 1]] : (wrap ? a[active.back()] - 360.0 : a[active[k]]);
        const double next = k + 1 < n ? a[active[k + 1]] : (wrap ? a[active.front()] + 360.0 : a[active[k]]);
        w[k] = 0.5 * (next - prev) * kDeg;
    }
    return w;
}

}  // namespace

double parker_weight(double beta_rel, double gamma_geom, double span_rad) {
    // The textbook form pairs (b, g) with (b + pi + 2g, -g); with the u axis
    // along the source motion the conjugate is (b + pi - 2g, -g).
    const double gamma = -gamma_geom;
    const double delta = 0.5 * (span_rad - kPi);
    if (beta_rel < 0.0 || beta_rel > span_rad) return 0.0;
    const double rise_end = 2.0 * delta - 2.0 * gamma;
    const double fall_start = kPi - 2.0 * gamma;
    if (beta_rel < rise_end) {
        const double s = std::sin(0.25 * kPi * beta_rel / (delta - gamma));
        return s * s;
    }
    if (beta_rel > fall_start) {
        const double s = std::sin(0.25 * kPi * (kPi + 2.0 * delta - beta_rel) / (delta + gamma));
        return s * s;
    }
    return 1.0;
}

std::vector<double> ramp_filter_row(const std::vector<double>& row, double tau_mm, RampFilter filter) {
    RampFilterPlan plan(padded_length(row.size()), tau_mm, filter);
    std::vector<double> out(row.size());
    plan.apply(row.data(), row.size(), out.data());
    return out;
}

Volume fbp_reconstruct(const Sinogram& sino, const ImageGrid& grid, const FbpConfig& cfg) {
    cfg.validate();
    sino.validate();
    grid.validate();
    const auto& g = sino.geometry;
    const bool three_d = g.mode == ScanMode::cone_beam_3d;
    if (!three_d && grid.dims[2] != 1) throw Error("fan_beam_2d geometry requires a single-slice grid");

    std::vector<std::size_t> active;
    const std::vector<double> dbeta = angular_weights(sino, active);

    const double sdd = g.source_to_detector_mm;
    const double sid = g.source_to_isocenter_mm;
    const double mag = sid / sdd;
    const double tau = g.pixel_u_mm * mag;
    const double tau_v = g.pixel_v_mm * mag;
    const std::size_t cols = g.detector_cols;
    const std::size_t rows = g.detector_rows;
    const double c_mid = 0.5 * static_cast<double>(cols - 1);
    const double r_mid = 0.5 * static_cast<double>(rows - 1);
    const double fov = cfg.fov_radius_mm.value_or(g.fov_radius_mm());
    const double beta0 = g.angles_deg.front() * kDeg;

    RampFilterPlan plan(padded_length(cols), tau, cfg.filter);
    std::vector<double> weighted(cols);
    std::vector<double> filtered(rows * cols);
    std::vector<double> acc(grid.size(), 0.0);

    for (std::size_t k = 0; k < active.size(); ++k) {
        const std::size_t v = active[k];
        const double beta = g.angles_deg[v] * kDeg;
        for (std::size_t r = 0; r < rows; ++r) {
            const double vv = three_d ? g.row_v(r) : 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                const std::size_t i = sino.index(v, r, c);
                if (!sino.mask.has_data(i)) {
                    weighted[c] = 0.0;
                    continue;
                }
                const double u = g.column_u(c);
                const double cosine = sdd / std::sqrt(sdd * sdd + u * u + vv * vv);
                const double gamma = std::atan(u / sdd);
                weighted[c] = sino.values[i] * cosine * redundancy_weight(g, cfg, beta - beta0, gamma);
            }
            plan.apply(weighted.data(), cols, filtered.data() + r * cols);
        }

        const double cb = std::cos(beta);
        const double sb = std::sin(beta);
        for (std::size_t z = 0; z < grid.dims[2]; ++z)
            for (std::size_t y = 0; y < grid.dims[1]; ++y)
                for (std::size_t x = 0; x < grid.dims[0]; ++x) {
                    const auto p = grid.voxel_center(x, y, z);
                    if (p[0] * p[0] + p[1] * p[1] > fov * fov) continue;
                    const double depth = sid - (p[0] * cb + p[1] * sb);
                    if (depth <= 0.0) continue;
                    const double lateral = -p[0] * sb + p[1] * cb;
                    const double cu = sid * lateral / depth / tau + c_mid;
                    const double fc = std::floor(cu);
                    const auto c0 = static_cast<long>(fc);
                    const double wc = cu - fc;
                    if (c0 < 0 || c0 + 1 >= static_cast<long>(cols)) continue;
                    long r0 = 0;
                    double wr = 0.0;
                    if (three_d) {
                        const double rv = sid * p[2] / depth / tau_v + r_mid;
                        const double fr = std::floor(rv);
                        r0 = static_cast<long>(fr);
                        wr = rv - fr;
                        if (r0 < 0 || r0 + 1 >= static_cast<long>(rows)) {
                            if (rows == 1 && std::abs(rv - r_mid) < 0.5) {
                                r0 = 0;
                                wr = 0.0;
                            } else {
                                continue;
                            }
                        }
                    }
                    const double* q0 = filtered.data() + static_cast<std::size_t>(r0) * cols;
                    double q = (1.0 - wc) * q0[c0] + wc * q0[c0 + 1];
                    if (three_d && wr > 0.0) {
                        const double* q1 = q0 + cols;
                        q = (1.0 - wr) * q + wr * ((1.0 - wc) * q1[c0] + wc * q1[c0 + 1]);
                    }
                    const double scale = sid / depth;
                    acc[grid.index(x, y, z)] += dbeta[k] * scale * scale * q;
                }
    }

    Volume out(grid);
    for (std::size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(acc[i]);
    return out;
}

double ray_distance_from_isocenter(const ScanGeometry& g, double u_mm) {
    return g.source_to_isocenter_mm * std::sin(std::atan(u_mm / g.source_to_detector_mm));
}

namespace {

// Derivative at s[0] of the quadratic through (s[k], p[k]), k = 0..2.
double one_sided_slope(const double s[3], const double p[3]) {
    const double d01 = s[0] - s[1];
    const double d02 = s[0] - s[2];
    const double d12 = s[1] - s[2];
    return p[0] * (d01 + d02) / (d01 * d02) - p[1] * d02 / (d01 * d12) + p[2] * d01 / (d02 * d12);
}

}  // namespace

Sinogram wce_extrapolate(const Sinogram& sino, const HuCalibration& cal, WceReport* report) {
    sino.validate();
    cal.validate();
    const auto& g = sino.geometry;
    const std::size_t cols = g.detector_cols;
    const double mu = cal.mu_water_per_mm;
    constexpr std::size_t kRollOff = 50;

    std::vector<double> s(cols);
    for (std::size_t c = 0; c < cols; ++c) s[c] = ray_distance_from_isocenter(g, g.column_u(c));

    Sinogram out = sino;
    WceReport rep;
    for (std::size_t v = 0; v < g.num_views(); ++v)
        for (std::size_t r = 0; r < g.detector_rows; ++r) {
            const std::size_t base = out.index(v, r, 0);
            long first = -1;
            long last = -1;
            for (std::size_t c = 0; c < cols; ++c)
                if (sino.mask.is_measured(base + c)) {
                    if (first < 0) first = static_cast<long>(c);
                    last = static_cast<long>(c);
                }
            if (first < 0) continue;
            for (long c = first; c <= last; ++c)
                if (!sino.mask.is_measured(base + static_cast<std::size_t>(c)))
                    throw Error("measured band is not contiguous in view " + std::to_string(v));
            if (first == 0 && last == static_cast<long>(cols) - 1) continue;
            ++rep.rows_extrapolated;

            // dir = +1 extends past the last measured column, -1 before the first.
            for (int dir : {-1, +1}) {
                const long b = dir > 0 ? last : first;
                const long end = dir > 0 ? static_cast<long>(cols) : -1;
                if (b + dir == end) continue;
                auto fill = [&](long c, double value) {
                    const auto i = base + static_cast<std::size_t>(c);
                    out.values[i] = static_cast<float>(value);
                    out.mask.states[i] = RayState::extrapolated;
                };

                const double pb = std::max(0.0, static_cast<double>(sino.values[base + static_cast<std::size_t>(b)]));
                const long band = last - first + 1;
                double slope_out = 0.0;
                bool have_slope = false;
                if (band >= 3) {
                    const double ss[3] = {s[b], s[b - dir], s[b - 2 * dir]};
                    const double pp[3] = {pb, sino.values[base + static_cast<std::size_t>(b - dir)],
                                          sino.values[base + static_cast<std::size_t>(b - 2 * dir)]};
                    slope_out = dir * one_sided_slope(ss, pp);
                    have_slope = true;
                }

                const double half_chord = pb / (2.0 * mu);
                const double center_offset = have_slope ? -slope_out * half_chord / (2.0 * mu) : 0.0;
                if (pb > 0.0 && (!have_slope || center_offset <= 0.0)) {
                    ++rep.fallback_boundaries;
                    std::size_t k = 1;
                    for (long c = b + dir; c != end; c += dir, ++k) {
                        const double t = std::min(1.0, static_cast<double>(k) / kRollOff);
                        fill(c, pb * 0.5 * (1.0 + std::cos(kPi * t)));
                    }
                    continue;
                }
                const double r2 = half_chord * half_chord + center_offset * center_offset;
                for (long c = b + dir; c != end; c += dir) {
                    const double x = center_offset + dir * (s[c] - s[b]);
                    const double rem = r2 - x * x;
                    fill(c, pb > 0.0 && rem > 0.0 ? 2.0 * mu * std::sqrt(rem) : 0.0);
                }
            }
        }
    if (report) *report = rep;
    return out;
}

}  // namespace dcr
