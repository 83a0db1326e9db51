// Insufficient-data acquisition regimes and the photon noise model.
//
// Restrictors never drop rays: unmeasured rays keep their index slot, are
// flagged unmeasured and zeroed. Measured values pass through untouched.
#pragma once

#include <cstdint>

#include "dcr/types.hpp"

namespace dcr {

struct NoiseSpec {
    double photons_i0 = 1.0e5;
    std::uint64_t seed = 0;
    bool enabled = true;

    void validate() const {
        if (!(photons_i0 > 0.0)) throw Error("photons_i0 must be positive");
    }
};

/// First column of the centered band of `kept_cols` columns.
std::size_t truncation_first_col(std::size_t detector_cols, std::size_t kept_cols);

/// Keeps the centered band of kept_cols detector columns.
Sinogram restrict_truncation(const Sinogram& sino, std::size_t kept_cols);
/// Keeps views with beta in [beta_min, beta_min + range_deg].
Sinogram restrict_limited_angle(const Sinogram& sino, double range_deg);
/// Keeps every stride-th view starting from the first.
Sinogram restrict_sparse_view(const Sinogram& sino, std::size_t stride);

/// Replaces every measured ray p by -ln(max(N, 1) / I0) with
/// N ~ Poisson(I0 * exp(-p)). Each ray draws from its own counter-based stream
/// keyed by (seed, ray index), so results do not depend on evaluation order.
Sinogram add_poisson_noise(const Sinogram& sino, const NoiseSpec& noise);

}  // namespace dcr
