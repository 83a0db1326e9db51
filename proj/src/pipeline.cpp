#include "dcr/pipeline.hpp"

#include <functional>

#include "dcr/io.hpp"
#include "dcr/metrics.hpp"
#include "dcr/projector.hpp"

namespace dcr {
namespace {

using nlohmann::json;

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw Error(std::string("[") + name + "] " + e.what());
    }
}

std::string filter_name(RampFilter f) { return f == RampFilter::ram_lak ? "ram_lak" : "shepp_logan_window"; }

RampFilter filter_from_string(const std::string& s) {
    if (s == "ram_lak") return RampFilter::ram_lak;
    if (s == "shepp_logan_window") return RampFilter::shepp_logan_window;
    throw Error("unknown filter '" + s + "'");
}

json lesion_json(const LesionReport& r) {
    return {{"contrast_hu", r.contrast_hu},
            {"reference_contrast_hu", r.reference_contrast_hu},
            {"contrast_recovery_fraction", r.contrast_recovery_fraction}};
}

}  // namespace

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::truncation: return "truncation";
        case Scenario::limited_angle: return "limited_angle";
        case Scenario::sparse_view: return "sparse_view";
    }
    return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
    if (s == "truncation") return Scenario::truncation;
    if (s == "limited_angle") return Scenario::limited_angle;
    if (s == "sparse_view") return Scenario::sparse_view;
    throw Error("unknown scenario '" + s + "'");
}

PipelineConfig PipelineConfig::defaults(Scenario s) {
    PipelineConfig c;
    c.scenario = s;
    c.geometry.source_to_detector_mm = 1200.0;
    c.geometry.source_to_isocenter_mm = 600.0;
    c.geometry.detector_cols = 620;
    c.geometry.detector_rows = 1;
    c.geometry.pixel_u_mm = 1.0;
    c.geometry.pixel_v_mm = 1.0;
    c.geometry.mode = ScanMode::fan_beam_2d;
    c.geometry.angles_deg = s == Scenario::sparse_view ? angle_range_deg(0.0, 1.0, 360) : angle_range_deg(0.0, 1.0, 211);
    c.grid = ImageGrid::centered_2d(256, 1.25);
    c.phantom = shepp_logan(120.0);
    c.noise.enabled = false;
    c.noise.seed = 1;
    c.prior.kind = PriorKind::degraded_oracle;
    c.prior.degradation.blur_fwhm_mm = 2.0;
    c.prior.degradation.bias_amplitude_hu = 50.0;
    c.prior.degradation.fake_lesions.push_back({{0.0, -36.0, 0.0}, 12.0, 100.0});
    c.prior.degradation.seed = 1;
    return c;
}

json to_json(const PipelineConfig& c) {
    json prior = {{"kind", c.prior.kind == PriorKind::file ? "file" : "degraded_oracle"}};
    if (c.prior.kind == PriorKind::file) prior["path"] = c.prior.path.string();
    prior["degradation"] = c.prior.degradation;
    json fbp = {{"filter", filter_name(c.fbp.filter)}, {"short_scan_weighting", c.fbp.short_scan_weighting}};
    if (c.fbp.fov_radius_mm) fbp["fov_radius_mm"] = *c.fbp.fov_radius_mm;
    return {{"scenario", to_string(c.scenario)},
            {"geometry", c.geometry},
            {"grid", c.grid},
            {"phantom", c.phantom},
            {"phantom_supersample", c.phantom_supersample},
            {"restriction", {{"kept_cols", c.kept_cols}, {"range_deg", c.range_deg}, {"stride", c.stride}}},
            {"noise", {{"enabled", c.noise.enabled}, {"photons_i0", c.noise.photons_i0}, {"seed", c.noise.seed}}},
            {"prior", prior},
            {"solver", c.solver},
            {"fbp", fbp},
            {"output_dir", c.output_dir.string()}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
    const Scenario s = scenario_from_string(j.value("scenario", std::string{"truncation"}));
    json merged = to_json(PipelineConfig::defaults(s));
    json patch = j;
    // A phantom or angle list given in the file replaces the default wholesale.
    if (patch.contains("phantom")) merged.erase("phantom");
    if (patch.contains("geometry") && (patch["geometry"].contains("angles") || patch["geometry"].contains("angles_deg")))
        merged["geometry"].erase("angles_deg");
    if (patch.contains("prior") && patch["prior"].contains("degradation")) merged["prior"].erase("degradation");
    merged.merge_patch(patch);

    PipelineConfig c;
    c.scenario = s;
    c.geometry = merged.at("geometry").get<ScanGeometry>();
    c.grid = merged.at("grid").get<ImageGrid>();
    c.phantom = merged.at("phantom").get<EllipsePhantomSpec>();
    c.phantom_supersample = merged.value("phantom_supersample", 2);
    const auto& r = merged.at("restriction");
    c.kept_cols = r.value("kept_cols", c.kept_cols);
    c.range_deg = r.value("range_deg", c.range_deg);
    c.stride = r.value("stride", c.stride);
    const auto& n = merged.at("noise");
    c.noise.enabled = n.value("enabled", false);
    c.noise.photons_i0 = n.value("photons_i0", 1.0e5);
    c.noise.seed = n.value("seed", std::uint64_t{1});
    const auto& p = merged.at("prior");
    const auto kind = p.value("kind", std::string{"degraded_oracle"});
    if (kind == "file") {
        c.prior.kind = PriorKind::file;
        c.prior.path = p.at("path").get<std::string>();
    } else if (kind == "degraded_oracle") {
        c.prior.kind = PriorKind::degraded_oracle;
    } else {
        throw Error("unknown prior kind '" + kind + "'");
    }
    if (p.contains("degradation")) c.prior.degradation = p["degradation"].get<DegradationSpec>();
    c.solver = merged.at("solver").get<SolverConfig>();
    const bool e1_given = j.contains("solver") && j["solver"].contains("e1");
    if (!e1_given) c.solver.e1 = SolverConfig::defaults(c.noise.enabled).e1;
    const auto& f = merged.at("fbp");
    c.fbp.filter = filter_from_string(f.value("filter", std::string{"ram_lak"}));
    c.fbp.short_scan_weighting = f.value("short_scan_weighting", true);
    if (f.contains("fov_radius_mm")) c.fbp.fov_radius_mm = f["fov_radius_mm"].get<double>();
    c.output_dir = merged.value("output_dir", std::string{"dcr_out"});
    return c;
}

std::vector<std::string> validate_config(const PipelineConfig& cfg) {
    std::vector<std::string> d;
    auto check = [&](const char* what, const std::function<void()>& f) {
        try {
            f();
        } catch (const std::exception& e) {
            d.push_back(std::string(what) + ": " + e.what());
        }
    };
    check("geometry", [&] { cfg.geometry.validate(); });
    check("grid", [&] { cfg.grid.validate(); });
    check("geometry", [&] {
        if (cfg.geometry.mode == ScanMode::fan_beam_2d && cfg.grid.dims[2] != 1)
            throw Error("fan_beam_2d geometry requires a single-slice grid");
    });
    check("phantom", [&] { cfg.phantom.validate(); });
    if (cfg.phantom_supersample < 1) d.emplace_back("phantom: phantom_supersample must be at least 1");
    check("noise", [&] { cfg.noise.validate(); });
    check("fbp", [&] { cfg.fbp.validate(); });
    for (const auto& s : cfg.solver.diagnostics()) d.push_back("solver: " + s);
    switch (cfg.scenario) {
        case Scenario::truncation:
            if (cfg.kept_cols == 0 || cfg.kept_cols > cfg.geometry.detector_cols)
                d.emplace_back("restriction: kept_cols must lie in [1, detector_cols]");
            break;
        case Scenario::limited_angle:
            if (!(cfg.range_deg > 0.0) || cfg.range_deg > cfg.geometry.angular_span_deg() + 1e-9)
                d.emplace_back("restriction: range_deg must lie in (0, angular coverage]");
            break;
        case Scenario::sparse_view:
            if (cfg.stride == 0) d.emplace_back("restriction: stride must be at least 1");
            break;
    }
    if (cfg.prior.kind == PriorKind::file) {
        if (cfg.prior.path.empty())
            d.emplace_back("prior: file mode needs a path");
        else if (!std::filesystem::exists(cfg.prior.path))
            d.push_back("prior: file " + cfg.prior.path.string() + " does not exist");
    } else {
        check("prior", [&] { cfg.prior.degradation.validate(); });
    }
    return d;
}

std::vector<std::string> validate_config_json(const json& j) {
    try {
        return validate_config(pipeline_config_from_json(j));
    } catch (const std::exception& e) {
        return {std::string("config: ") + e.what()};
    }
}

json QualityReport::to_json() const {
    json arms_json = json::object();
    for (const auto& [name, a] : arms) {
        json lesions = json::array();
        for (const auto& l : a.lesions) lesions.push_back(lesion_json(l));
        arms_json[name] = {{"fov_rmse_hu", a.fov_rmse_hu},
                           {"fov_ssim", a.fov_ssim},
                           {"body_rmse_hu", a.body_rmse_hu},
                           {"lesions", lesions}};
    }
    return {{"kind", "quality_report"},
            {"scenario", to_string(scenario)},
            {"fov_radius_mm", fov_radius_mm},
            {"measured_views", measured_views},
            {"measured_rays", measured_rays},
            {"arms", arms_json}};
}

Sinogram apply_scenario(const Sinogram& full, const PipelineConfig& cfg) {
    Sinogram s;
    switch (cfg.scenario) {
        case Scenario::truncation: s = restrict_truncation(full, cfg.kept_cols); break;
        case Scenario::limited_angle: s = restrict_limited_angle(full, cfg.range_deg); break;
        case Scenario::sparse_view: s = restrict_sparse_view(full, cfg.stride); break;
    }
    return add_poisson_noise(s, cfg.noise);
}

double scenario_fov_radius(const PipelineConfig& cfg) {
    if (cfg.scenario == Scenario::truncation)
        return cfg.geometry.fov_radius_mm(truncation_first_col(cfg.geometry.detector_cols, cfg.kept_cols), cfg.kept_cols);
    return cfg.geometry.fov_radius_mm();
}

QualityReport run_pipeline(const PipelineConfig& cfg) {
    const auto diags = validate_config(cfg);
    if (!diags.empty()) throw Error("[validate] " + diags.front());
    const auto& dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    const auto& cal = cfg.solver.calibration;

    write_json_file(dir / "config_resolved.json", to_json(cfg));

    const Volume truth = stage("simulate", [&] {
        Volume t = make_phantom(cfg.phantom, cfg.grid, cfg.phantom_supersample);
        save_volume(dir / "truth.json", t);
        return t;
    });
    const Sinogram sino = stage("simulate", [&] {
        const Sinogram full = forward_project(truth, cfg.geometry, cfg.solver.sampling_per_mm);
        save_sinogram(dir / "sinogram_full.json", full);
        Sinogram s = apply_scenario(full, cfg);
        save_sinogram(dir / "sinogram.json", s);
        return s;
    });

    QualityReport report;
    report.scenario = cfg.scenario;
    report.fov_radius_mm = scenario_fov_radius(cfg);
    report.measured_views = sino.measured_view_count();
    report.measured_rays = sino.mask.count(RayState::measured);

    const RegionMask fov = fov_disk_mask(cfg.grid, report.fov_radius_mm);
    const RegionMask body = body_mask(truth, 0.0);

    std::map<std::string, Volume> arms;
    arms["fbp"] = stage("fbp", [&] {
        Volume v = fbp_reconstruct(sino, cfg.grid, cfg.fbp);
        save_volume(dir / "fbp.json", v);
        return v;
    });
    if (cfg.scenario == Scenario::truncation) {
        arms["wce"] = stage("wce", [&] {
            const Sinogram ext = wce_extrapolate(sino, cal);
            save_sinogram(dir / "sinogram_wce.json", ext);
            Volume v = fbp_reconstruct(ext, cfg.grid, cfg.fbp);
            save_volume(dir / "wce_fbp.json", v);
            return v;
        });
    }
    arms["prior"] = stage("prior", [&] {
        Volume v = load_prior(cfg.prior, cfg.grid, &truth, cal);
        save_volume(dir / "prior.json", v);
        return v;
    });

    const TraceReference ref{truth, fov};
    arms["wtv"] = stage("wtv", [&] {
        DcrResult r = reconstruct_wtv_only(sino, cfg.grid, cfg.solver, ref);
        save_volume(dir / "wtv.json", r.image);
        r.trace.write_csv(dir / "wtv_trace.csv");
        return r.image;
    });
    arms["dcr"] = stage("dcr", [&] {
        DcrResult r = reconstruct_dcr(sino, arms.at("prior"), cfg.solver, ref);
        save_volume(dir / "dcr.json", r.image);
        save_sinogram(dir / "sinogram_inpainted.json", r.targets);
        r.trace.write_csv(dir / "dcr_trace.csv");
        return r.image;
    });

    stage("metrics", [&] {
        for (const auto& [name, img] : arms) {
            ArmReport a;
            a.fov_rmse_hu = rmse_hu(img, truth, fov, cal);
            a.fov_ssim = ssim(img, truth, fov, cal);
            a.body_rmse_hu = rmse_hu(img, truth, body, cal);
            if (cfg.prior.kind == PriorKind::degraded_oracle)
                for (const auto& l : cfg.prior.degradation.fake_lesions)
                    a.lesions.push_back(lesion_probe(img, arms.at("prior"), lesion_mask(cfg.grid, l.center_mm, l.radius_mm), cal));
            for (const auto& l : cfg.phantom.lesions)
                a.lesions.push_back(lesion_probe(img, truth, lesion_mask(cfg.grid, l.center_mm, l.radius_mm), cal));
            report.arms[name] = a;
        }
        write_json_file(dir / "report.json", report.to_json());
        return 0;
    });
    return report;
}

}  // namespace dcr
