#include "dcr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

namespace dcr {

std::vector<std::string> SolverConfig::diagnostics() const {
    std::vector<std::string> d;
    if (!(e1 >= 0.0)) d.emplace_back("e1 must be non-negative");
    if (!(e2 >= 0.0)) d.emplace_back("e2 must be non-negative");
    if (!(epsilon_hu > 0.0)) d.emplace_back("epsilon_hu must be positive");
    if (!(lambda > 0.0 && lambda < 2.0)) d.emplace_back("lambda (SART relaxation) must lie in (0, 2)");
    if (n_max < 1) d.emplace_back("n_max must be at least 1");
    if (l_max < 1) d.emplace_back("l_max must be at least 1");
    if (!(ls_alpha > 0.0)) d.emplace_back("ls_alpha must be positive");
    if (!(ls_gamma > 0.0 && ls_gamma < 1.0)) d.emplace_back("ls_gamma must lie in (0, 1)");
    if (!(ls_t0 > 0.0)) d.emplace_back("ls_t0 must be positive");
    if (!(sampling_per_mm > 0.0)) d.emplace_back("sampling_per_mm must be positive");
    if (!(tv_step_hu > 0.0)) d.emplace_back("tv_step_hu must be positive");
    if (!(calibration.mu_water_per_mm > 0.0)) d.emplace_back("mu_water_per_mm must be positive");
    return d;
}

void SolverConfig::validate() const {
    const auto d = diagnostics();
    if (!d.empty()) throw Error("invalid solver config: " + d.front());
}

namespace {

double tolerance_from_json(const nlohmann::json& v) {
    if (v.is_null()) return std::numeric_limits<double>::infinity();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw Error("tolerance must be a number or \"inf\"");
    }
    return v.get<double>();
}

nlohmann::json tolerance_to_json(double v) {
    return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v);
}

}  // namespace

void to_json(nlohmann::json& j, const SolverConfig& c) {
    j = {{"e1", tolerance_to_json(c.e1)},
         {"e2", tolerance_to_json(c.e2)},
         {"epsilon_hu", c.epsilon_hu},
         {"lambda", c.lambda},
         {"n_max", c.n_max},
         {"l_max", c.l_max},
         {"ls_alpha", c.ls_alpha},
         {"ls_gamma", c.ls_gamma},
         {"ls_t0", c.ls_t0},
         {"sampling_per_mm", c.sampling_per_mm},
         {"tv_step_hu", c.tv_step_hu},
         {"mu_water_per_mm", c.calibration.mu_water_per_mm}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
    c = SolverConfig{};
    if (j.contains("e1")) c.e1 = tolerance_from_json(j["e1"]);
    if (j.contains("e2")) c.e2 = tolerance_from_json(j["e2"]);
    c.epsilon_hu = j.value("epsilon_hu", c.epsilon_hu);
    c.lambda = j.value("lambda", c.lambda);
    c.n_max = j.value("n_max", c.n_max);
    c.l_max = j.value("l_max", c.l_max);
    c.ls_alpha = j.value("ls_alpha", c.ls_alpha);
    c.ls_gamma = j.value("ls_gamma", c.ls_gamma);
    c.ls_t0 = j.value("ls_t0", c.ls_t0);
    c.sampling_per_mm = j.value("sampling_per_mm", c.sampling_per_mm);
    c.tv_step_hu = j.value("tv_step_hu", c.tv_step_hu);
    c.calibration.mu_water_per_mm = j.value("mu_water_per_mm", c.calibration.mu_water_per_mm);
}

Sinogram inpaint_unmeasured(const Volume& prior, const Sinogram& sino, double sampling_per_mm) {
    sino.validate();
    const auto& g = sino.geometry;
    const std::size_t per = g.rays_per_view();
    Sinogram out = sino;
    std::vector<float> drr(per);
    std::size_t filled = 0;
    for (std::size_t v = 0; v < g.num_views(); ++v) {
        const std::size_t base = v * per;
        bool any = false;
        for (std::size_t k = 0; k < per && !any; ++k) any = !sino.mask.is_measured(base + k);
        if (!any) continue;
        forward_project_view(prior, g, v, sampling_per_mm, drr);
        for (std::size_t k = 0; k < per; ++k)
            if (!sino.mask.is_measured(base + k)) {
                out.values[base + k] = drr[k];
                ++filled;
            }
    }
    if (filled == 0) std::clog << "dcr: warning: inpaint_unmeasured called on a fully measured sinogram\n";
    return out;
}

Volume sart_sweep(const Volume& img, const Sinogram& targets, const SolverConfig& cfg, const Sinogram& row_sums) {
    const auto& g = targets.geometry;
    const std::size_t per = g.rays_per_view();
    if (row_sums.values.size() != targets.values.size()) throw Error("row sums do not match the sinogram");
    Volume f = img;
    std::vector<float> proj(per);
    std::vector<float> delta_p(per);
    std::vector<float> num(f.values.size());
    std::vector<float> den(f.values.size());

    for (std::size_t v = 0; v < g.num_views(); ++v) {
        const std::size_t base = v * per;
        forward_project_view(f, g, v, cfg.sampling_per_mm, proj);
        bool any = false;
        for (std::size_t k = 0; k < per; ++k) {
            const std::size_t i = base + k;
            const double tau = targets.mask.is_measured(i) ? cfg.e1 : cfg.e2;
            const double rs = row_sums.values[i];
            double dp = 0.0;
            if (rs > 0.0 && !std::isinf(tau)) dp = soft_threshold(targets.values[i] - proj[k], tau) / rs;
            delta_p[k] = static_cast<float>(dp);
            any = any || dp != 0.0;
        }
        if (!any) continue;
        std::fill(num.begin(), num.end(), 0.0f);
        std::fill(den.begin(), den.end(), 0.0f);
        backproject_view(delta_p, g, v, f.grid, num, den);
        for (std::size_t j = 0; j < f.values.size(); ++j)
            if (den[j] > 0.0f) f.values[j] = static_cast<float>(f.values[j] + cfg.lambda * num[j] / den[j]);
    }
    for (float& x : f.values) x = std::max(x, 0.0f);
    return f;
}

Volume sart_sweep(const Volume& img, const Sinogram& targets, const SolverConfig& cfg) {
    return sart_sweep(img, targets, cfg, ray_row_sum(targets.geometry, img.grid, cfg.sampling_per_mm));
}

void ConvergenceTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.precision(9);
    out << "iteration,residual_measured,residual_unmeasured,wtv,rmse\n";
    for (const auto& r : records) {
        out << r.iteration << ',' << r.residual_measured << ',' << r.residual_unmeasured << ',' << r.wtv << ',';
        if (r.rmse_hu) out << *r.rmse_hu;
        out << '\n';
    }
}

std::vector<double> measured_residuals(const Volume& img, const Sinogram& sino, double sampling_per_mm) {
    const Sinogram proj = forward_project(img, sino.geometry, sampling_per_mm);
    std::vector<double> r;
    for (std::size_t i = 0; i < sino.values.size(); ++i)
        if (sino.mask.is_measured(i)) r.push_back(std::abs(static_cast<double>(proj.values[i]) - sino.values[i]));
    return r;
}

DcrResult reconstruct_dcr(const Sinogram& sino, const Volume& prior, const SolverConfig& cfg,
                          const std::optional<TraceReference>& reference) {
    cfg.validate();
    sino.validate();
    prior.validate();
    if (reference && !(reference->image.grid == prior.grid)) throw Error("trace reference is on a different grid");

    DcrResult res;
    const bool has_unmeasured = sino.mask.count(RayState::measured) != sino.values.size();
    res.targets = has_unmeasured ? inpaint_unmeasured(prior, sino, cfg.sampling_per_mm) : sino;
    const Sinogram row_sums = ray_row_sum(sino.geometry, prior.grid, cfg.sampling_per_mm);

    Volume f = prior;
    WtvState weights = wtv_update_weights(f, cfg.epsilon_mu());
    const LineSearch ls = cfg.line_search();
    const double step_unit = cfg.tv_step_hu * cfg.calibration.mu_per_hu();

    for (std::size_t n = 1; n <= cfg.n_max; ++n) {
        f = sart_sweep(f, res.targets, cfg, row_sums);
        WtvStepStats stats;
        f = wtv_gradient_step(f, weights, ls, cfg.l_max, step_unit, cfg.smoothing_mu(), &stats);
        // The last wTV block follows the last clamp; returned images stay nonnegative.
        if (n == cfg.n_max)
            for (float& x : f.values) x = std::max(x, 0.0f);

        IterationRecord rec;
        rec.iteration = n;
        rec.wtv = stats.values.back();
        rec.line_search_exhausted = stats.exhausted;
        weights = wtv_update_weights(f, cfg.epsilon_mu());

        const Sinogram proj = forward_project(f, sino.geometry, cfg.sampling_per_mm);
        double rm = 0.0, ru = 0.0;
        for (std::size_t i = 0; i < proj.values.size(); ++i) {
            const double d = static_cast<double>(proj.values[i]) - res.targets.values[i];
            (res.targets.mask.is_measured(i) ? rm : ru) += d * d;
        }
        rec.residual_measured = std::sqrt(rm);
        rec.residual_unmeasured = std::sqrt(ru);
        if (reference) rec.rmse_hu = rmse_hu(f, reference->image, reference->region, cfg.calibration);
        res.trace.records.push_back(rec);
    }
    res.image = std::move(f);
    return res;
}

DcrResult reconstruct_wtv_only(const Sinogram& sino, const ImageGrid& grid, const SolverConfig& cfg,
                               const std::optional<TraceReference>& reference) {
    SolverConfig c = cfg;
    c.e2 = std::numeric_limits<double>::infinity();
    return reconstruct_dcr(sino, Volume(grid), c, reference);
}

}  // namespace dcr
