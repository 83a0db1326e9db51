// Command-line front end: one subcommand per pipeline stage plus the full
// pipeline and a configuration checker.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "dcr/io.hpp"
#include "dcr/metrics.hpp"
#include "dcr/pipeline.hpp"
#include "dcr/projector.hpp"

namespace {

using nlohmann::json;

// Config-key overrides shared by the config-driven subcommands.
struct Overrides {
    std::optional<std::string> scenario;
    std::optional<std::uint64_t> seed;
    std::optional<bool> noise;
    std::optional<double> photons;
    std::optional<double> e1, e2, epsilon_hu, lambda;
    std::optional<std::size_t> n_max, l_max;
    std::optional<std::string> output_dir;

    void attach(CLI::App* app, bool with_output_dir = true) {
        app->add_option("--scenario", scenario, "truncation | limited_angle | sparse_view");
        app->add_option("--seed", seed, "noise seed");
        app->add_flag("--noise,!--no-noise", noise, "enable or disable Poisson noise");
        app->add_option("--photons", photons, "unattenuated photon count per ray");
        app->add_option("--e1", e1, "measured-ray tolerance");
        app->add_option("--e2", e2, "inpainted-ray tolerance");
        app->add_option("--epsilon-hu", epsilon_hu, "wTV weight floor in HU");
        app->add_option("--lambda", lambda, "SART relaxation");
        app->add_option("--n-max", n_max, "outer iterations");
        app->add_option("--l-max", l_max, "wTV subiterations");
        if (with_output_dir) app->add_option("--out-dir", output_dir, "output directory");
    }

    json apply(json j) const {
        if (!j.is_object()) j = json::object();
        if (scenario) j["scenario"] = *scenario;
        if (seed) j["noise"]["seed"] = *seed;
        if (noise) j["noise"]["enabled"] = *noise;
        if (photons) j["noise"]["photons_i0"] = *photons;
        if (e1) j["solver"]["e1"] = *e1;
        if (e2) j["solver"]["e2"] = *e2;
        if (epsilon_hu) j["solver"]["epsilon_hu"] = *epsilon_hu;
        if (lambda) j["solver"]["lambda"] = *lambda;
        if (n_max) j["solver"]["n_max"] = *n_max;
        if (l_max) j["solver"]["l_max"] = *l_max;
        if (output_dir) j["output_dir"] = *output_dir;
        return j;
    }
};

json load_config_json(const std::string& path) { return path.empty() ? json::object() : dcr::read_json_file(path); }

dcr::PipelineConfig resolve(const std::string& path, const Overrides& o) {
    const json j = o.apply(load_config_json(path));
    const auto diags = dcr::validate_config_json(j);
    if (!diags.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& d : diags) msg += "\n  " + d;
        throw dcr::Error(msg);
    }
    return dcr::pipeline_config_from_json(j);
}

std::array<double, 3> parse_triplet(const std::vector<double>& v, const char* what) {
    if (v.size() != 3) throw dcr::Error(std::string(what) + " needs three values");
    return {v[0], v[1], v[2]};
}

dcr::RampFilter parse_filter(const std::string& s) {
    if (s == "ram_lak") return dcr::RampFilter::ram_lak;
    if (s == "shepp_logan_window") return dcr::RampFilter::shepp_logan_window;
    throw dcr::Error("unknown filter '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-consistent CT reconstruction toolkit"};
    app.require_subcommand(1);

    // simulate
    std::string sim_config;
    Overrides sim_o;
    auto* sim = app.add_subcommand("simulate", "phantom, full sinogram and the restricted, noisy scan");
    sim->add_option("-c,--config", sim_config, "pipeline configuration");
    sim_o.attach(sim);

    // fbp
    std::string fbp_sino, fbp_out, fbp_config, fbp_filter = "ram_lak";
    bool fbp_no_short = false;
    std::optional<double> fbp_fov;
    auto* fbp = app.add_subcommand("fbp", "filtered backprojection");
    fbp->add_option("-s,--sinogram", fbp_sino, "input sinogram header")->required();
    fbp->add_option("-o,--out", fbp_out, "output volume header")->required();
    fbp->add_option("-c,--config", fbp_config, "configuration supplying the grid");
    fbp->add_option("--filter", fbp_filter, "ram_lak | shepp_logan_window");
    fbp->add_flag("--no-short-scan-weighting", fbp_no_short, "disable redundancy weighting");
    fbp->add_option("--fov-radius", fbp_fov, "reconstruction disk radius in mm");

    // wce
    std::string wce_sino, wce_out;
    double wce_mu = dcr::HuCalibration{}.mu_water_per_mm;
    auto* wce = app.add_subcommand("wce", "water cylinder extrapolation of truncated projections");
    wce->add_option("-s,--sinogram", wce_sino, "input sinogram header")->required();
    wce->add_option("-o,--out", wce_out, "output sinogram header")->required();
    wce->add_option("--mu-water", wce_mu, "water attenuation in 1/mm");

    // prior
    std::string prior_config, prior_truth, prior_out;
    Overrides prior_o;
    auto* prior = app.add_subcommand("prior", "load a prior file or degrade a reference image");
    prior->add_option("-c,--config", prior_config, "pipeline configuration (prior and grid blocks)");
    prior->add_option("-t,--truth", prior_truth, "reference volume for the degraded oracle");
    prior->add_option("-o,--out", prior_out, "output volume header")->required();
    prior_o.attach(prior, false);

    // reconstruct
    std::string rec_sino, rec_prior, rec_config, rec_out, rec_trace, rec_ref;
    std::optional<double> rec_ref_radius;
    bool rec_wtv_only = false;
    Overrides rec_o;
    auto* rec = app.add_subcommand("reconstruct", "SART + wTV data-consistent reconstruction");
    rec->add_option("-s,--sinogram", rec_sino, "measured sinogram header")->required();
    rec->add_option("-p,--prior", rec_prior, "prior volume header (also defines the grid)")->required();
    rec->add_option("-c,--config", rec_config, "configuration supplying the solver block");
    rec->add_option("-o,--out", rec_out, "output volume header")->required();
    rec->add_option("--trace", rec_trace, "convergence trace CSV");
    rec->add_option("--reference", rec_ref, "reference volume for the RMSE column of the trace");
    rec->add_option("--reference-radius", rec_ref_radius, "disk radius (mm) of the trace RMSE region");
    rec->add_flag("--wtv-only", rec_wtv_only, "zero initialisation, inpainted rays ignored");
    rec_o.attach(rec, false);

    // metrics
    std::string met_img, met_ref, met_out;
    std::optional<double> met_radius;
    std::vector<double> met_lesion;
    auto* met = app.add_subcommand("metrics", "RMSE, SSIM and lesion contrast against a reference");
    met->add_option("-i,--image", met_img, "volume to score")->required();
    met->add_option("-r,--reference", met_ref, "reference volume")->required();
    met->add_option("--fov-radius", met_radius, "disk radius in mm (default: whole grid)");
    met->add_option("--lesion", met_lesion, "lesion center x y z and radius (mm)")->expected(4);
    met->add_option("-o,--out", met_out, "report file (default: stdout)");

    // pipeline
    std::string pipe_config;
    Overrides pipe_o;
    auto* pipe = app.add_subcommand("pipeline", "run every stage and write all artifacts");
    pipe->add_option("-c,--config", pipe_config, "pipeline configuration");
    pipe_o.attach(pipe);

    // validate
    std::string val_config;
    Overrides val_o;
    auto* val = app.add_subcommand("validate", "list every violated configuration invariant");
    val->add_option("-c,--config", val_config, "pipeline configuration")->required();
    val_o.attach(val);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const auto cfg = resolve(sim_config, sim_o);
            std::filesystem::create_directories(cfg.output_dir);
            const dcr::Volume truth = dcr::make_phantom(cfg.phantom, cfg.grid, cfg.phantom_supersample);
            const dcr::Sinogram full = dcr::forward_project(truth, cfg.geometry, cfg.solver.sampling_per_mm);
            const dcr::Sinogram sino = dcr::apply_scenario(full, cfg);
            dcr::save_volume(cfg.output_dir / "truth.json", truth);
            dcr::save_sinogram(cfg.output_dir / "sinogram_full.json", full);
            dcr::save_sinogram(cfg.output_dir / "sinogram.json", sino);
            std::cout << "measured views: " << sino.measured_view_count()
                      << ", measured rays: " << sino.mask.count(dcr::RayState::measured) << "\n";
        } else if (fbp->parsed()) {
            const auto cfg = dcr::pipeline_config_from_json(load_config_json(fbp_config));
            dcr::FbpConfig f = cfg.fbp;
            if (fbp->count("--filter")) f.filter = parse_filter(fbp_filter);
            if (fbp_no_short) f.short_scan_weighting = false;
            if (fbp_fov) f.fov_radius_mm = *fbp_fov;
            dcr::save_volume(fbp_out, dcr::fbp_reconstruct(dcr::load_sinogram(fbp_sino), cfg.grid, f));
        } else if (wce->parsed()) {
            dcr::WceReport report;
            const auto out = dcr::wce_extrapolate(dcr::load_sinogram(wce_sino), {wce_mu}, &report);
            dcr::save_sinogram(wce_out, out);
            std::cout << "rows extrapolated: " << report.rows_extrapolated
                      << ", fallback boundaries: " << report.fallback_boundaries << "\n";
        } else if (prior->parsed()) {
            const auto cfg = resolve(prior_config, prior_o);
            std::optional<dcr::Volume> truth;
            if (!prior_truth.empty()) truth = dcr::load_volume(prior_truth, cfg.solver.calibration);
            if (cfg.prior.kind == dcr::PriorKind::degraded_oracle && !truth)
                truth = dcr::make_phantom(cfg.phantom, cfg.grid, cfg.phantom_supersample);
            const dcr::ImageGrid grid = truth ? truth->grid : cfg.grid;
            dcr::save_volume(prior_out, dcr::load_prior(cfg.prior, grid, truth ? &*truth : nullptr, cfg.solver.calibration));
        } else if (rec->parsed()) {
            const auto cfg = resolve(rec_config, rec_o);
            const dcr::Sinogram sino = dcr::load_sinogram(rec_sino);
            const dcr::Volume prior_img = dcr::load_volume(rec_prior, cfg.solver.calibration);
            std::optional<dcr::TraceReference> ref;
            if (!rec_ref.empty()) {
                dcr::Volume r = dcr::load_volume(rec_ref, cfg.solver.calibration);
                const double radius = rec_ref_radius.value_or(sino.geometry.fov_radius_mm());
                ref = dcr::TraceReference{r, dcr::fov_disk_mask(r.grid, radius)};
            }
            const dcr::DcrResult res = rec_wtv_only
                                           ? dcr::reconstruct_wtv_only(sino, prior_img.grid, cfg.solver, ref)
                                           : dcr::reconstruct_dcr(sino, prior_img, cfg.solver, ref);
            dcr::save_volume(rec_out, res.image);
            if (!rec_trace.empty()) res.trace.write_csv(rec_trace);
            const auto& last = res.trace.records.back();
            std::cout << "final residual (measured): " << last.residual_measured << "\n";
        } else if (met->parsed()) {
            const dcr::Volume img = dcr::load_volume(met_img);
            const dcr::Volume ref = dcr::load_volume(met_ref);
            if (!(img.grid == ref.grid)) throw dcr::Error("image and reference grids differ");
            const dcr::RegionMask region = met_radius ? dcr::fov_disk_mask(ref.grid, *met_radius)
                                                      : dcr::RegionMask(ref.grid, dcr::RegionKind::custom, true);
            json report = {{"kind", "quality_report"},
                           {"rmse_hu", dcr::rmse_hu(img, ref, region)},
                           {"ssim", dcr::ssim(img, ref, region)},
                           {"voxels", region.count()}};
            if (!met_lesion.empty()) {
                const auto c = parse_triplet({met_lesion[0], met_lesion[1], met_lesion[2]}, "--lesion");
                const auto l = dcr::lesion_probe(img, ref, dcr::lesion_mask(ref.grid, c, met_lesion[3]));
                report["lesion"] = {{"contrast_hu", l.contrast_hu},
                                    {"reference_contrast_hu", l.reference_contrast_hu},
                                    {"contrast_recovery_fraction", l.contrast_recovery_fraction}};
            }
            if (met_out.empty())
                std::cout << report.dump(2) << "\n";
            else
                dcr::write_json_file(met_out, report);
        } else if (pipe->parsed()) {
            const auto report = dcr::run_pipeline(resolve(pipe_config, pipe_o));
            std::cout << report.to_json().dump(2) << "\n";
        } else if (val->parsed()) {
            const auto diags = dcr::validate_config_json(val_o.apply(load_config_json(val_config)));
            for (const auto& d : diags) std::cout << d << "\n";
            if (!diags.empty()) return 1;
            std::cout << "ok\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "dcrtool: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
