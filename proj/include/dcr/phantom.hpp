#pragma once

#include <array>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcr/types.hpp"

namespace dcr {

struct Ellipse {
    std::array<double, 3> center_mm{0.0, 0.0, 0.0};
    /// Semi-axes; in-plane axes are rotated by rotation_deg about z.
    std::array<double, 3> semi_axes_mm{1.0, 1.0, 1.0e6};
    double rotation_deg = 0.0;
    double mu_delta = 0.0;

    bool contains(double x, double y, double z) const;
};

/// Spherical (disk in 2D) insert with a contrast given in HU.
struct Lesion {
    std::array<double, 3> center_mm{0.0, 0.0, 0.0};
    double radius_mm = 1.0;
    double contrast_hu = 0.0;

    bool contains(double x, double y, double z, bool planar) const;
};

struct EllipsePhantomSpec {
    std::vector<Ellipse> ellipses;
    std::vector<Lesion> lesions;
    HuCalibration calibration;

    void validate() const;
};

/// Voxel value = sum of mu deltas of the shapes containing the voxel center.
/// With supersample > 1 each voxel averages supersample^2 (2D) or
/// supersample^3 (3D) sub-voxel samples instead.
Volume make_phantom(const EllipsePhantomSpec& spec, const ImageGrid& grid, int supersample = 1);

/// Shepp-Logan head phantom with the original 1974 densities scaled by
/// mu_water: skull 2.0 (+1000 HU), brain 1.02 (+20 HU), ventricles 1.0 and
/// small features 1.03-1.04. The phantom spans +-half_extent_mm.
EllipsePhantomSpec shepp_logan(double half_extent_mm, const HuCalibration& cal = {});

/// Centered water cylinder.
EllipsePhantomSpec water_disk(double radius_mm, const HuCalibration& cal = {});

void to_json(nlohmann::json& j, const EllipsePhantomSpec& s);
void from_json(const nlohmann::json& j, EllipsePhantomSpec& s);
void to_json(nlohmann::json& j, const Lesion& l);
void from_json(const nlohmann::json& j, Lesion& l);

}  // namespace dcr
