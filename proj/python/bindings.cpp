#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "dcr/io.hpp"
#include "dcr/metrics.hpp"
#include "dcr/pipeline.hpp"
#include "dcr/projector.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json to_json_value(const py::object& o) {
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object from_json_value(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray volume_array(const dcr::Volume& v) {
    const auto& d = v.grid.dims;
    FloatArray a({d[2], d[1], d[0]});
    std::memcpy(a.mutable_data(), v.values.data(), v.values.size() * sizeof(float));
    return a;
}

dcr::Volume make_volume(const dcr::ImageGrid& grid, const FloatArray& a) {
    grid.validate();
    if (static_cast<std::size_t>(a.size()) != grid.size())
        throw dcr::Error("array has " + std::to_string(a.size()) + " values, grid needs " + std::to_string(grid.size()));
    dcr::Volume v(grid);
    std::memcpy(v.values.data(), a.data(), v.values.size() * sizeof(float));
    return v;
}

FloatArray sinogram_array(const dcr::Sinogram& s) {
    const auto& g = s.geometry;
    FloatArray a({g.num_views(), g.detector_rows, g.detector_cols});
    std::memcpy(a.mutable_data(), s.values.data(), s.values.size() * sizeof(float));
    return a;
}

py::array_t<std::uint8_t> mask_array(const dcr::Sinogram& s) {
    const auto& g = s.geometry;
    py::array_t<std::uint8_t> a({g.num_views(), g.detector_rows, g.detector_cols});
    auto* out = a.mutable_data();
    for (std::size_t i = 0; i < s.mask.states.size(); ++i) out[i] = static_cast<std::uint8_t>(s.mask.states[i]);
    return a;
}

dcr::Sinogram make_sinogram(const dcr::ScanGeometry& g, const FloatArray& values,
                            const std::optional<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>>& mask) {
    g.validate();
    if (static_cast<std::size_t>(values.size()) != g.num_rays()) throw dcr::Error("sinogram array does not match the geometry");
    dcr::Sinogram s(g);
    std::memcpy(s.values.data(), values.data(), s.values.size() * sizeof(float));
    if (mask) {
        if (static_cast<std::size_t>(mask->size()) != g.num_rays()) throw dcr::Error("mask array does not match the geometry");
        const auto* m = mask->data();
        for (std::size_t i = 0; i < s.mask.states.size(); ++i) {
            if (m[i] > 2) throw dcr::Error("mask values must be 0, 1 or 2");
            s.mask.states[i] = static_cast<dcr::RayState>(m[i]);
        }
    }
    return s;
}

dcr::RegionMask region_from(const dcr::ImageGrid& grid, const std::optional<double>& radius) {
    return radius ? dcr::fov_disk_mask(grid, *radius) : dcr::RegionMask(grid, dcr::RegionKind::custom, true);
}

}  // namespace

PYBIND11_MODULE(_dcr, m) {
    m.doc() = "Data-consistent CT reconstruction core";
    py::register_exception<dcr::Error>(m, "DcrError", PyExc_ValueError);

    py::class_<dcr::ScanGeometry>(m, "ScanGeometry")
        .def(py::init<>())
        .def_readwrite("source_to_detector_mm", &dcr::ScanGeometry::source_to_detector_mm)
        .def_readwrite("source_to_isocenter_mm", &dcr::ScanGeometry::source_to_isocenter_mm)
        .def_readwrite("detector_cols", &dcr::ScanGeometry::detector_cols)
        .def_readwrite("detector_rows", &dcr::ScanGeometry::detector_rows)
        .def_readwrite("pixel_u_mm", &dcr::ScanGeometry::pixel_u_mm)
        .def_readwrite("pixel_v_mm", &dcr::ScanGeometry::pixel_v_mm)
        .def_readwrite("angles_deg", &dcr::ScanGeometry::angles_deg)
        .def("fov_radius_mm", py::overload_cast<std::size_t, std::size_t>(&dcr::ScanGeometry::fov_radius_mm, py::const_))
        .def("to_dict", [](const dcr::ScanGeometry& g) { return from_json_value(json(g)); })
        .def_static("from_dict", [](const py::object& d) { return to_json_value(d).get<dcr::ScanGeometry>(); });

    py::class_<dcr::ImageGrid>(m, "ImageGrid")
        .def(py::init<>())
        .def_static("centered_2d", &dcr::ImageGrid::centered_2d, py::arg("n"), py::arg("spacing_mm"))
        .def_static("centered", &dcr::ImageGrid::centered)
        .def_readwrite("dims", &dcr::ImageGrid::dims)
        .def_readwrite("spacing_mm", &dcr::ImageGrid::spacing_mm)
        .def_readwrite("origin_mm", &dcr::ImageGrid::origin_mm)
        .def("to_dict", [](const dcr::ImageGrid& g) { return from_json_value(json(g)); })
        .def_static("from_dict", [](const py::object& d) { return to_json_value(d).get<dcr::ImageGrid>(); });

    m.def("hu_to_mu", [](double hu, double mu_water) { return dcr::hu_to_mu(hu, {mu_water}); }, py::arg("hu"),
          py::arg("mu_water_per_mm") = 0.02);
    m.def("mu_to_hu", [](double mu, double mu_water) { return dcr::mu_to_hu(mu, {mu_water}); }, py::arg("mu"),
          py::arg("mu_water_per_mm") = 0.02);

    m.def(
        "phantom",
        [](const py::object& spec, const dcr::ImageGrid& grid, int supersample) {
            return volume_array(dcr::make_phantom(to_json_value(spec).get<dcr::EllipsePhantomSpec>(), grid, supersample));
        },
        py::arg("spec"), py::arg("grid"), py::arg("supersample") = 1,
        "Rasterise a phantom spec (dict, e.g. {'preset': 'shepp_logan', 'half_extent_mm': 120}).");

    m.def(
        "forward_project",
        [](const FloatArray& image, const dcr::ImageGrid& grid, const dcr::ScanGeometry& g, double sampling) {
            const dcr::Volume v = make_volume(grid, image);
            dcr::Sinogram s;
            {
                py::gil_scoped_release release;
                s = dcr::forward_project(v, g, sampling);
            }
            return sinogram_array(s);
        },
        py::arg("image"), py::arg("grid"), py::arg("geometry"), py::arg("sampling_per_mm") = dcr::kDefaultSamplingPerMm);

    m.def(
        "backproject",
        [](const FloatArray& sino, const dcr::ScanGeometry& g, const dcr::ImageGrid& grid) {
            return volume_array(dcr::backproject(make_sinogram(g, sino, std::nullopt), grid));
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("grid"));

    m.def(
        "restrict",
        [](const FloatArray& sino, const dcr::ScanGeometry& g, const std::string& scenario, std::size_t kept_cols,
           double range_deg, std::size_t stride) {
            auto cfg = dcr::PipelineConfig::defaults(dcr::scenario_from_string(scenario));
            cfg.kept_cols = kept_cols;
            cfg.range_deg = range_deg;
            cfg.stride = stride;
            cfg.noise.enabled = false;
            const auto out = dcr::apply_scenario(make_sinogram(g, sino, std::nullopt), cfg);
            return py::make_tuple(sinogram_array(out), mask_array(out));
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("scenario"), py::arg("kept_cols") = 300,
        py::arg("range_deg") = 150.0, py::arg("stride") = 4, "Returns (values, mask).");

    m.def(
        "add_poisson_noise",
        [](const FloatArray& sino, const dcr::ScanGeometry& g, double i0, std::uint64_t seed,
           const std::optional<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>>& mask) {
            return sinogram_array(dcr::add_poisson_noise(make_sinogram(g, sino, mask), {i0, seed, true}));
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("photons_i0") = 1.0e5, py::arg("seed") = 0,
        py::arg("mask") = py::none());

    m.def(
        "fbp",
        [](const FloatArray& sino, const dcr::ScanGeometry& g, const dcr::ImageGrid& grid,
           const std::optional<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>>& mask,
           bool short_scan_weighting, const std::string& filter, const std::optional<double>& fov_radius_mm) {
            dcr::FbpConfig cfg;
            cfg.short_scan_weighting = short_scan_weighting;
            cfg.filter = filter == "shepp_logan_window" ? dcr::RampFilter::shepp_logan_window : dcr::RampFilter::ram_lak;
            cfg.fov_radius_mm = fov_radius_mm;
            const auto s = make_sinogram(g, sino, mask);
            dcr::Volume v;
            {
                py::gil_scoped_release release;
                v = dcr::fbp_reconstruct(s, grid, cfg);
            }
            return volume_array(v);
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("grid"), py::arg("mask") = py::none(),
        py::arg("short_scan_weighting") = true, py::arg("filter") = "ram_lak", py::arg("fov_radius_mm") = py::none());

    m.def(
        "wce_extrapolate",
        [](const FloatArray& sino, const dcr::ScanGeometry& g,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask, double mu_water) {
            const auto out = dcr::wce_extrapolate(make_sinogram(g, sino, mask), {mu_water});
            return py::make_tuple(sinogram_array(out), mask_array(out));
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("mask"), py::arg("mu_water_per_mm") = 0.02,
        "Returns (values, mask); filled rays are flagged 2.");

    m.def(
        "reconstruct_dcr",
        [](const FloatArray& sino, const dcr::ScanGeometry& g,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask, const FloatArray& prior,
           const dcr::ImageGrid& grid, const py::object& solver, const std::optional<FloatArray>& reference,
           const std::optional<double>& reference_radius_mm, bool wtv_only) {
            const auto s = make_sinogram(g, sino, mask);
            const auto p = make_volume(grid, prior);
            const auto cfg = solver.is_none() ? dcr::SolverConfig{} : to_json_value(solver).get<dcr::SolverConfig>();
            std::optional<dcr::TraceReference> ref;
            if (reference)
                ref = dcr::TraceReference{make_volume(grid, *reference),
                                          dcr::fov_disk_mask(grid, reference_radius_mm.value_or(g.fov_radius_mm()))};
            dcr::DcrResult r;
            {
                py::gil_scoped_release release;
                r = wtv_only ? dcr::reconstruct_wtv_only(s, grid, cfg, ref) : dcr::reconstruct_dcr(s, p, cfg, ref);
            }
            py::list trace;
            for (const auto& rec : r.trace.records) {
                py::dict d;
                d["iteration"] = rec.iteration;
                d["residual_measured"] = rec.residual_measured;
                d["residual_unmeasured"] = rec.residual_unmeasured;
                d["wtv"] = rec.wtv;
                d["rmse"] = rec.rmse_hu ? py::cast(*rec.rmse_hu) : py::none();
                d["line_search_exhausted"] = rec.line_search_exhausted;
                trace.append(d);
            }
            return py::make_tuple(volume_array(r.image), trace);
        },
        py::arg("sinogram"), py::arg("geometry"), py::arg("mask"), py::arg("prior"), py::arg("grid"),
        py::arg("solver") = py::none(), py::arg("reference") = py::none(), py::arg("reference_radius_mm") = py::none(),
        py::arg("wtv_only") = false, "Returns (image, trace).");

    m.def("soft_threshold", &dcr::soft_threshold, py::arg("x"), py::arg("tau"));

    m.def(
        "rmse_hu",
        [](const FloatArray& a, const FloatArray& b, const dcr::ImageGrid& grid, const std::optional<double>& radius) {
            return dcr::rmse_hu(make_volume(grid, a), make_volume(grid, b), region_from(grid, radius));
        },
        py::arg("a"), py::arg("b"), py::arg("grid"), py::arg("fov_radius_mm") = py::none());
    m.def(
        "ssim",
        [](const FloatArray& a, const FloatArray& b, const dcr::ImageGrid& grid, const std::optional<double>& radius) {
            return dcr::ssim(make_volume(grid, a), make_volume(grid, b), region_from(grid, radius));
        },
        py::arg("a"), py::arg("b"), py::arg("grid"), py::arg("fov_radius_mm") = py::none());

    m.def(
        "save_volume",
        [](const std::string& path, const FloatArray& a, const dcr::ImageGrid& grid) {
            dcr::save_volume(path, make_volume(grid, a));
        },
        py::arg("path"), py::arg("image"), py::arg("grid"));
    m.def(
        "load_volume",
        [](const std::string& path) {
            const auto v = dcr::load_volume(path);
            return py::make_tuple(volume_array(v), v.grid);
        },
        py::arg("path"), "Returns (array in 1/mm, grid).");

    m.def(
        "validate_config", [](const py::object& cfg) { return dcr::validate_config_json(to_json_value(cfg)); },
        py::arg("config"));
    m.def(
        "resolve_config",
        [](const py::object& cfg) { return from_json_value(dcr::to_json(dcr::pipeline_config_from_json(to_json_value(cfg)))); },
        py::arg("config"));
    m.def(
        "run_pipeline",
        [](const py::object& cfg) {
            const auto c = dcr::pipeline_config_from_json(to_json_value(cfg));
            dcr::QualityReport r;
            {
                py::gil_scoped_release release;
                r = dcr::run_pipeline(c);
            }
            return from_json_value(r.to_json());
        },
        py::arg("config"), "Runs every stage, writes artifacts and returns the quality report.");
}
