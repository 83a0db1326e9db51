// Filtered backprojection for circular flat-detector scans and water
// cylinder extrapolation of laterally truncated projections.
#pragma once

#include <optional>
#include <vector>

#include "dcr/types.hpp"

namespace dcr {

enum class RampFilter { ram_lak, shepp_logan_window };

struct FbpConfig {
    RampFilter filter = RampFilter::ram_lak;
    bool short_scan_weighting = true;
    /// Voxels farther than this from the rotation axis are set to zero. Unset
    /// means the radius covered by the whole detector.
    std::optional<double> fov_radius_mm;

    void validate() const {
        if (fov_radius_mm && !(*fov_radius_mm > 0.0)) throw Error("fov_radius_mm must be positive");
    }
};

/// Redundancy weight of the ray at fan angle gamma (radians) in the view at
/// beta_rel (radians past the first view) of a short scan spanning span_rad.
/// Smooth Parker-type partition: the weights of (beta, gamma) and its
/// conjugate (beta + pi - 2 gamma, -gamma) sum to one.
double parker_weight(double beta_rel, double gamma, double span_rad);

/// Cosine weighting, zero-padded frequency-domain ramp filtering and
/// distance-weighted voxel-driven backprojection. Unmeasured rays count as
/// zeros; views without any data are left out of the angular integration.
Volume fbp_reconstruct(const Sinogram& sino, const ImageGrid& grid, const FbpConfig& cfg = {});

/// Per-row filtered projection at the virtual isocentric detector (exposed
/// for tests). `row` holds detector_cols pre-weighted samples.
std::vector<double> ramp_filter_row(const std::vector<double>& row, double tau_mm, RampFilter filter);

struct WceReport {
    std::size_t rows_extrapolated = 0;
    /// Boundaries that fell back to the cosine roll-off.
    std::size_t fallback_boundaries = 0;
};

/// Fills the unmeasured columns of every (view, row) with the profile of a
/// water cylinder matched to the value and one-sided slope at each
/// truncation boundary. Extrapolated rays are flagged `extrapolated`.
Sinogram wce_extrapolate(const Sinogram& sino, const HuCalibration& cal = {},
                         WceReport* report = nullptr);

/// Detector column position mapped to the distance of its ray from the
/// isocenter (fan-beam "parallel" coordinate).
double ray_distance_from_isocenter(const ScanGeometry& g, double u_mm);

}  // namespace dcr
