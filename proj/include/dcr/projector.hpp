// Ray-driven forward projection and voxel-driven backprojection.
#pragma once

#include <span>

#include "dcr/types.hpp"

namespace dcr {

inline constexpr double kDefaultSamplingPerMm = 7.5;

/// Line integrals of `vol` along every ray of `geom`. Each ray is sampled at
/// equidistant points (step <= 1/sampling_per_mm) inside the interpolation
/// support of the grid; samples use bilinear (fan-beam) or trilinear
/// (cone-beam) interpolation with zero outside the grid. The returned mask is
/// all-measured.
Sinogram forward_project(const Volume& vol, const ScanGeometry& geom,
                         double sampling_per_mm = kDefaultSamplingPerMm);

/// Projects a single view into `out` (rays_per_view entries).
void forward_project_view(const Volume& vol, const ScanGeometry& geom, std::size_t view,
                          double sampling_per_mm, std::span<float> out);

/// Voxel-driven approximation of the transpose of forward_project: every
/// voxel center is projected onto the detector, the view data is linearly
/// interpolated there and scaled by the expected ray density at the voxel.
Volume backproject(const Sinogram& sino, const ImageGrid& grid);

/// Accumulates the backprojection of one view into `out`. When `normalizer`
/// is non-empty, the backprojection of an all-ones view is accumulated there
/// as well (the per-voxel sum of system-matrix entries for that view).
/// Returns the number of voxels that received a nonzero weight.
std::size_t backproject_view(std::span<const float> view_values, const ScanGeometry& geom,
                             std::size_t view, const ImageGrid& grid, std::span<float> out,
                             std::span<float> normalizer = {});

/// Per-ray sum of system-matrix entries: forward projection of the all-ones
/// volume.
Sinogram ray_row_sum(const ScanGeometry& geom, const ImageGrid& grid,
                     double sampling_per_mm = kDefaultSamplingPerMm);

}  // namespace dcr
