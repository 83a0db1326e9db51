// Masked image-quality metrics reported in Hounsfield units.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dcr/types.hpp"

namespace dcr {

enum class RegionKind { fov_disk, body, lesion, custom };

struct RegionMask {
    ImageGrid grid;
    std::vector<std::uint8_t> inside;
    RegionKind kind = RegionKind::custom;

    RegionMask() = default;
    RegionMask(const ImageGrid& g, RegionKind k, bool fill = false)
        : grid(g), inside(g.size(), fill ? 1 : 0), kind(k) {}

    std::size_t count() const;
    bool contains(std::size_t i) const { return inside[i] != 0; }
};

/// Voxels whose in-plane distance to the rotation axis is at most radius_mm.
RegionMask fov_disk_mask(const ImageGrid& grid, double radius_mm);
/// Voxels with in-plane distance to the axis in [r_inner, r_outer].
RegionMask ring_mask(const ImageGrid& grid, double r_inner_mm, double r_outer_mm);
/// Ball (disk on single-slice grids) around center_mm.
RegionMask lesion_mask(const ImageGrid& grid, const std::array<double, 3>& center_mm, double radius_mm);
/// Voxels whose value exceeds threshold.
RegionMask body_mask(const Volume& vol, double threshold_mu);
/// Voxels within width_voxels (Chebyshev distance) of any voxel whose
/// neighbour differs by more than tolerance.
RegionMask edge_band_mask(const Volume& vol, std::size_t width_voxels, double tolerance_mu = 1e-7);
RegionMask intersect(const RegionMask& a, const RegionMask& b);
RegionMask subtract(const RegionMask& a, const RegionMask& b);

/// Background annulus used by lesion statistics: in-plane (3D: spherical)
/// shell between 1.5 and 2.5 equivalent radii around the region centroid.
RegionMask lesion_annulus(const RegionMask& lesion);
inline constexpr double kAnnulusInner = 1.5;
inline constexpr double kAnnulusOuter = 2.5;

/// Root mean squared difference in HU over the masked voxels.
double rmse_hu(const Volume& a, const Volume& b, const RegionMask& mask, const HuCalibration& cal = {});

struct SsimParams {
    double sigma_px = 1.5;
    int window = 11;
    double dynamic_range_hu = 2000.0;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean of the local SSIM map over the masked voxels. Local statistics use a
/// truncated, renormalised Gaussian window within each z slice; images are
/// compared as HU + 1000 so that intensities are nonnegative.
double ssim(const Volume& a, const Volume& b, const RegionMask& mask, const HuCalibration& cal = {},
            const SsimParams& params = {});

struct LesionReport {
    double contrast_hu = 0.0;            // mean(lesion) - mean(annulus) in img
    double reference_contrast_hu = 0.0;  // same in ref
    double contrast_recovery_fraction = 0.0;
};

LesionReport lesion_probe(const Volume& img, const Volume& ref, const RegionMask& lesion,
                          const HuCalibration& cal = {});

/// Mean of the masked voxels, in HU.
double region_mean_hu(const Volume& img, const RegionMask& mask, const HuCalibration& cal = {});

}  // namespace dcr
