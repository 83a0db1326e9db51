// Prior images for data-consistent reconstruction: loaded from files written
// by an external model, or synthesised from a reference image by a
// degradation oracle that mimics learned-prior failure modes.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcr/phantom.hpp"
#include "dcr/types.hpp"

namespace dcr {

struct DegradationSpec {
    double blur_fwhm_mm = 0.0;
    /// Peak magnitude of a smooth bias field applied inside the body.
    double bias_amplitude_hu = 0.0;
    std::vector<Lesion> fake_lesions;
    /// Lesions (center, radius) replaced by the median of a surrounding
    /// annulus; contrast_hu is ignored.
    std::vector<Lesion> removed_lesions;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class PriorKind { file, degraded_oracle };

struct PriorSource {
    PriorKind kind = PriorKind::file;
    std::filesystem::path path;  // file kind
    DegradationSpec degradation;  // degraded_oracle kind
};

/// Trilinear resampling onto `target` with edge replication outside the
/// source grid.
Volume resample(const Volume& src, const ImageGrid& target);

/// Loads the prior from a volume file, resampling when the grids differ and
/// clamping negatives to zero. The oracle kind needs `truth`.
Volume load_prior(const PriorSource& src, const ImageGrid& grid, const Volume* truth = nullptr,
                  const HuCalibration& cal = {});

/// Gaussian blur, removed lesions, bias field (inside truth > 0) and fake
/// lesions, applied in that order. Deterministic for a given seed.
Volume degrade(const Volume& truth, const DegradationSpec& spec, const HuCalibration& cal = {});

/// Separable Gaussian blur with replicated borders; kernel truncated at 3 sigma.
Volume gaussian_blur(const Volume& vol, double fwhm_mm);

void to_json(nlohmann::json& j, const DegradationSpec& s);
void from_json(const nlohmann::json& j, DegradationSpec& s);

}  // namespace dcr
