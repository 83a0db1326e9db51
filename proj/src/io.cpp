#include "dcr/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dcr {
namespace {

using nlohmann::json;

constexpr const char* kDetectorConvention =
    "source at SID*(cos b, sin b, 0); u along columns = (-sin b, cos b, 0); "
    "v along rows = +z; rays end at pixel centers; pixel (r, c) at "
    "u = (c - (cols-1)/2) * pixel_u, v = (r - (rows-1)/2) * pixel_v";

std::filesystem::path payload_path(const std::filesystem::path& header) {
    auto p = header;
    p.replace_extension(".raw");
    return p;
}

void write_floats(const std::filesystem::path& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
    } else {
        for (float f : data) {
            auto bits = std::bit_cast<std::uint32_t>(f);
            bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
    if (!out) throw Error("failed writing " + path.string());
}

std::vector<float> read_floats(const std::filesystem::path& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
        throw Error("payload " + path.string() + " is shorter than its header declares");
    if constexpr (std::endian::native != std::endian::little) {
        for (float& f : data) {
            auto bits = std::bit_cast<std::uint32_t>(f);
            bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
            f = std::bit_cast<float>(bits);
        }
    }
    return data;
}

void check_kind(const json& j, const char* kind, const std::filesystem::path& path) {
    if (j.value("kind", std::string{}) != kind)
        throw Error(path.string() + " is not a " + kind + " header");
}

}  // namespace

std::string to_string(VolumeUnit u) { return u == VolumeUnit::hu ? "hu" : "mu_per_mm"; }

VolumeUnit volume_unit_from_string(const std::string& s) {
    if (s == "mu_per_mm") return VolumeUnit::mu_per_mm;
    if (s == "hu") return VolumeUnit::hu;
    throw Error("unknown volume unit tag '" + s + "'");
}

void to_json(json& j, const ScanGeometry& g) {
    j = json{{"source_to_detector_mm", g.source_to_detector_mm},
             {"source_to_isocenter_mm", g.source_to_isocenter_mm},
             {"detector_cols", g.detector_cols},
             {"detector_rows", g.detector_rows},
             {"pixel_size_mm", {g.pixel_u_mm, g.pixel_v_mm}},
             {"angles_deg", g.angles_deg},
             {"mode", g.mode == ScanMode::fan_beam_2d ? "fan_beam_2d" : "cone_beam_3d"},
             {"detector_convention", kDetectorConvention}};
}

void from_json(const json& j, ScanGeometry& g) {
    g.source_to_detector_mm = j.at("source_to_detector_mm").get<double>();
    g.source_to_isocenter_mm = j.at("source_to_isocenter_mm").get<double>();
    g.detector_cols = j.at("detector_cols").get<std::size_t>();
    g.detector_rows = j.value("detector_rows", std::size_t{1});
    const auto& px = j.at("pixel_size_mm");
    g.pixel_u_mm = px.at(0).get<double>();
    g.pixel_v_mm = px.at(1).get<double>();
    if (j.contains("angles_deg")) {
        g.angles_deg = j.at("angles_deg").get<std::vector<double>>();
    } else {
        // Compact form: {"start": s, "step": d, "count": n}.
        const auto& a = j.at("angles");
        g.angles_deg = angle_range_deg(a.value("start", 0.0), a.at("step").get<double>(),
                                       a.at("count").get<std::size_t>());
    }
    const auto mode = j.value("mode", std::string{"fan_beam_2d"});
    if (mode == "fan_beam_2d")
        g.mode = ScanMode::fan_beam_2d;
    else if (mode == "cone_beam_3d")
        g.mode = ScanMode::cone_beam_3d;
    else
        throw Error("unknown scan mode '" + mode + "'");
}

void to_json(json& j, const ImageGrid& g) {
    j = json{{"dims", g.dims}, {"spacing_mm", g.spacing_mm}, {"origin_mm", g.origin_mm}};
}

void from_json(const json& j, ImageGrid& g) {
    g.dims = j.at("dims").get<std::array<std::size_t, 3>>();
    g.spacing_mm = j.at("spacing_mm").get<std::array<double, 3>>();
    if (j.contains("origin_mm")) {
        g.origin_mm = j.at("origin_mm").get<std::array<double, 3>>();
    } else {
        g = ImageGrid::centered(g.dims[0], g.dims[1], g.dims[2], g.spacing_mm[0], g.spacing_mm[1],
                                g.spacing_mm[2]);
    }
}

json encode_mask_rle(const MeasurementMask& mask) {
    json runs = json::array();
    std::size_t i = 0;
    const auto& s = mask.states;
    while (i < s.size()) {
        std::size_t j = i + 1;
        while (j < s.size() && s[j] == s[i]) ++j;
        runs.push_back({static_cast<int>(s[i]), j - i});
        i = j;
    }
    return runs;
}

MeasurementMask decode_mask_rle(const json& rle, std::size_t expected_size) {
    MeasurementMask mask;
    mask.states.reserve(expected_size);
    for (const auto& run : rle) {
        const int state = run.at(0).get<int>();
        const auto count = run.at(1).get<std::size_t>();
        if (state < 0 || state > 2) throw Error("invalid mask state in run-length encoding");
        mask.states.insert(mask.states.end(), count, static_cast<RayState>(state));
    }
    if (mask.states.size() != expected_size) throw Error("mask run lengths do not cover the sinogram");
    return mask;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("cannot parse " + path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

void save_volume(const std::filesystem::path& header, const Volume& vol, VolumeUnit unit,
                 const HuCalibration& cal) {
    if (vol.values.size() != vol.grid.size()) throw Error("volume value count does not match grid");
    const auto payload = payload_path(header);
    json h;
    h["kind"] = "volume";
    h["version"] = 1;
    h["grid"] = vol.grid;
    h["unit"] = to_string(unit);
    h["dtype"] = "float32";
    h["byte_order"] = "little";
    h["layout"] = "x-fastest";
    h["data_file"] = payload.filename().string();
    if (unit == VolumeUnit::hu) {
        cal.validate();
        h["mu_water_per_mm"] = cal.mu_water_per_mm;
        std::vector<float> hu(vol.values.size());
        for (std::size_t i = 0; i < hu.size(); ++i) hu[i] = static_cast<float>(mu_to_hu(vol.values[i], cal));
        write_floats(payload, hu);
    } else {
        write_floats(payload, vol.values);
    }
    write_json_file(header, h);
}

VolumeFile read_volume_file(const std::filesystem::path& header) {
    const json h = read_json_file(header);
    check_kind(h, "volume", header);
    VolumeFile f;
    f.volume.grid = h.at("grid").get<ImageGrid>();
    f.volume.grid.validate();
    f.unit = volume_unit_from_string(h.at("unit").get<std::string>());
    if (h.contains("mu_water_per_mm")) f.calibration = HuCalibration{h["mu_water_per_mm"].get<double>()};
    const auto payload = header.parent_path() / h.at("data_file").get<std::string>();
    f.volume.values = read_floats(payload, f.volume.grid.size());
    return f;
}

Volume load_volume(const std::filesystem::path& header, const std::optional<HuCalibration>& cal) {
    VolumeFile f = read_volume_file(header);
    if (f.unit == VolumeUnit::hu) {
        const auto use = f.calibration ? f.calibration : cal;
        if (!use) throw Error(header.string() + " is HU-tagged but carries no calibration");
        use->validate();
        for (float& v : f.volume.values) v = static_cast<float>(hu_to_mu(v, *use));
    }
    return std::move(f.volume);
}

void save_sinogram(const std::filesystem::path& header, const Sinogram& sino) {
    if (sino.values.size() != sino.geometry.num_rays() || sino.mask.states.size() != sino.values.size())
        throw Error("sinogram is inconsistent with its geometry");
    const auto payload = payload_path(header);
    json h;
    h["kind"] = "sinogram";
    h["version"] = 1;
    h["geometry"] = sino.geometry;
    h["dtype"] = "float32";
    h["byte_order"] = "little";
    h["layout"] = "column-fastest, then row, then view";
    h["data_file"] = payload.filename().string();
    h["mask_states"] = {{"unmeasured", 0}, {"measured", 1}, {"extrapolated", 2}};
    h["mask_rle"] = encode_mask_rle(sino.mask);
    h["measured_rays"] = sino.mask.count(RayState::measured);
    h["measured_views"] = sino.measured_view_count();
    write_floats(payload, sino.values);
    write_json_file(header, h);
}

Sinogram load_sinogram(const std::filesystem::path& header) {
    const json h = read_json_file(header);
    check_kind(h, "sinogram", header);
    Sinogram s;
    s.geometry = h.at("geometry").get<ScanGeometry>();
    s.geometry.validate();
    const auto payload = header.parent_path() / h.at("data_file").get<std::string>();
    s.values = read_floats(payload, s.geometry.num_rays());
    s.mask = decode_mask_rle(h.at("mask_rle"), s.geometry.num_rays());
    return s;
}

}  // namespace dcr
