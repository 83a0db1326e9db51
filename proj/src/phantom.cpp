#include "dcr/phantom.hpp"

#include <cmath>
#include <numbers>

namespace dcr {

bool Ellipse::contains(double x, double y, double z) const {
    const double th = rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th);
    const double s = std::sin(th);
    const double dx = x - center_mm[0];
    const double dy = y - center_mm[1];
    const double dz = z - center_mm[2];
    const double xr = c * dx + s * dy;
    const double yr = -s * dx + c * dy;
    const double a = xr / semi_axes_mm[0];
    const double b = yr / semi_axes_mm[1];
    const double e = dz / semi_axes_mm[2];
    return a * a + b * b + e * e <= 1.0;
}

bool Lesion::contains(double x, double y, double z, bool planar) const {
    const double dx = x - center_mm[0];
    const double dy = y - center_mm[1];
    const double dz = planar ? 0.0 : z - center_mm[2];
    return dx * dx + dy * dy + dz * dz <= radius_mm * radius_mm;
}

void EllipsePhantomSpec::validate() const {
    calibration.validate();
    for (const auto& e : ellipses)
        for (double a : e.semi_axes_mm)
            if (!(a > 0.0)) throw Error("ellipse semi-axes must be positive");
    for (const auto& l : lesions) {
        if (!(l.radius_mm > 0.0)) throw Error("lesion radius must be positive");
        bool inside = false;
        for (const auto& e : ellipses)
            if (e.mu_delta > 0.0 && e.contains(l.center_mm[0], l.center_mm[1], l.center_mm[2])) inside = true;
        if (!inside) throw Error("lesion center lies outside the body support");
    }
}

Volume make_phantom(const EllipsePhantomSpec& spec, const ImageGrid& grid, int supersample) {
    spec.validate();
    grid.validate();
    if (supersample < 1) throw Error("supersample must be at least 1");
    const bool planar = grid.dims[2] == 1;
    const int kz = planar ? 1 : supersample;
    const int k = supersample;
    const double inv = 1.0 / static_cast<double>(k * k * kz);
    const double mu_per_hu = spec.calibration.mu_per_hu();

    auto value_at = [&](double x, double y, double z) {
        double v = 0.0;
        for (const auto& e : spec.ellipses)
            if (e.contains(x, y, planar ? e.center_mm[2] : z)) v += e.mu_delta;
        for (const auto& l : spec.lesions)
            if (l.contains(x, y, z, planar)) v += l.contrast_hu * mu_per_hu;
        return v;
    };

    Volume vol(grid);
    for (std::size_t iz = 0; iz < grid.dims[2]; ++iz)
        for (std::size_t iy = 0; iy < grid.dims[1]; ++iy)
            for (std::size_t ix = 0; ix < grid.dims[0]; ++ix) {
                const auto c = grid.voxel_center(ix, iy, iz);
                double acc = 0.0;
                for (int sz = 0; sz < kz; ++sz)
                    for (int sy = 0; sy < k; ++sy)
                        for (int sx = 0; sx < k; ++sx) {
                            const double ox = ((sx + 0.5) / k - 0.5) * grid.spacing_mm[0];
                            const double oy = ((sy + 0.5) / k - 0.5) * grid.spacing_mm[1];
                            const double oz = planar ? 0.0 : ((sz + 0.5) / kz - 0.5) * grid.spacing_mm[2];
                            acc += value_at(c[0] + ox, c[1] + oy, c[2] + oz);
                        }
                vol.at(ix, iy, iz) = static_cast<float>(acc * inv);
            }
    return vol;
}

EllipsePhantomSpec shepp_logan(double half_extent_mm, const HuCalibration& cal) {
    struct Row {
        double x, y, a, b, phi, rho;
    };
    static constexpr Row table[] = {
        {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},
        {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
        {0.22, 0.0, 0.11, 0.31, -18.0, -0.02},
        {-0.22, 0.0, 0.16, 0.41, 18.0, -0.02},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},
        {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
        {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},
        {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
        {0.0, -0.606, 0.023, 0.023, 0.0, 0.01},
        {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
    };
    EllipsePhantomSpec spec;
    spec.calibration = cal;
    for (const auto& r : table) {
        Ellipse e;
        e.center_mm = {r.x * half_extent_mm, r.y * half_extent_mm, 0.0};
        e.semi_axes_mm = {r.a * half_extent_mm, r.b * half_extent_mm, 1.0e6};
        e.rotation_deg = r.phi;
        e.mu_delta = r.rho * cal.mu_water_per_mm;
        spec.ellipses.push_back(e);
    }
    return spec;
}

EllipsePhantomSpec water_disk(double radius_mm, const HuCalibration& cal) {
    EllipsePhantomSpec spec;
    spec.calibration = cal;
    Ellipse e;
    e.semi_axes_mm = {radius_mm, radius_mm, 1.0e6};
    e.mu_delta = cal.mu_water_per_mm;
    spec.ellipses.push_back(e);
    return spec;
}

void to_json(nlohmann::json& j, const Lesion& l) {
    j = {{"center_mm", l.center_mm}, {"radius_mm", l.radius_mm}, {"contrast_hu", l.contrast_hu}};
}

void from_json(const nlohmann::json& j, Lesion& l) {
    auto c = j.at("center_mm").get<std::vector<double>>();
    c.resize(3, 0.0);
    l.center_mm = {c[0], c[1], c[2]};
    l.radius_mm = j.at("radius_mm").get<double>();
    l.contrast_hu = j.value("contrast_hu", 0.0);
}

void to_json(nlohmann::json& j, const EllipsePhantomSpec& s) {
    nlohmann::json ell = nlohmann::json::array();
    for (const auto& e : s.ellipses)
        ell.push_back({{"center_mm", e.center_mm},
                       {"semi_axes_mm", e.semi_axes_mm},
                       {"rotation_deg", e.rotation_deg},
                       {"mu_delta", e.mu_delta}});
    j = {{"ellipses", ell}, {"lesions", s.lesions}, {"mu_water_per_mm", s.calibration.mu_water_per_mm}};
}

void from_json(const nlohmann::json& j, EllipsePhantomSpec& s) {
    s = {};
    s.calibration.mu_water_per_mm = j.value("mu_water_per_mm", 0.02);
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "shepp_logan")
            s = shepp_logan(j.value("half_extent_mm", 120.0), s.calibration);
        else if (preset == "water_disk")
            s = water_disk(j.value("radius_mm", 120.0), s.calibration);
        else
            throw Error("unknown phantom preset '" + preset + "'");
    }
    for (const auto& je : j.value("ellipses", nlohmann::json::array())) {
        Ellipse e;
        auto c = je.at("center_mm").get<std::vector<double>>();
        auto a = je.at("semi_axes_mm").get<std::vector<double>>();
        c.resize(3, 0.0);
        a.resize(3, 1.0e6);
        e.center_mm = {c[0], c[1], c[2]};
        e.semi_axes_mm = {a[0], a[1], a[2]};
        e.rotation_deg = je.value("rotation_deg", 0.0);
        if (je.contains("mu_delta"))
            e.mu_delta = je.at("mu_delta").get<double>();
        else
            e.mu_delta = je.at("hu_delta").get<double>() * s.calibration.mu_per_hu();
        s.ellipses.push_back(e);
    }
    for (const auto& jl : j.value("lesions", nlohmann::json::array())) s.lesions.push_back(jl.get<Lesion>());
}

}  // namespace dcr
