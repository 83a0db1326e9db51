// Volume and sinogram files: raw little-endian float32 payload plus a JSON
// sidecar header. Headers live at the given path; the payload sits next to it
// with the extension replaced by ".raw".
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dcr/types.hpp"

namespace dcr {

enum class VolumeUnit { mu_per_mm, hu };

std::string to_string(VolumeUnit u);
VolumeUnit volume_unit_from_string(const std::string& s);

struct VolumeFile {
    Volume volume;  // values as stored (HU when unit == hu)
    VolumeUnit unit = VolumeUnit::mu_per_mm;
    std::optional<HuCalibration> calibration;
};

/// Writes `vol` (attenuation in 1/mm). With unit == hu the payload is
/// converted to HU using `cal`, which is recorded in the header.
void save_volume(const std::filesystem::path& header, const Volume& vol,
                 VolumeUnit unit = VolumeUnit::mu_per_mm, const HuCalibration& cal = {});
VolumeFile read_volume_file(const std::filesystem::path& header);
/// Loads a volume and converts it to 1/mm. HU payloads use the header
/// calibration, or `cal` when the header carries none; throws otherwise.
Volume load_volume(const std::filesystem::path& header,
                   const std::optional<HuCalibration>& cal = std::nullopt);

void save_sinogram(const std::filesystem::path& header, const Sinogram& sino);
Sinogram load_sinogram(const std::filesystem::path& header);

// JSON mappings shared by the file headers and configuration files.
void to_json(nlohmann::json& j, const ScanGeometry& g);
void from_json(const nlohmann::json& j, ScanGeometry& g);
void to_json(nlohmann::json& j, const ImageGrid& g);
void from_json(const nlohmann::json& j, ImageGrid& g);

/// Run-length encoding of a mask as [[state, run], ...].
nlohmann::json encode_mask_rle(const MeasurementMask& mask);
MeasurementMask decode_mask_rle(const nlohmann::json& rle, std::size_t expected_size);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace dcr
