// Data-consistent reconstruction: inpaint unmeasured rays with projections of
// a prior image, then alternate SART sweeps with tolerance-thresholded
// residuals and reweighted-TV descent, starting from the prior.
#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcr/metrics.hpp"
#include "dcr/projector.hpp"
#include "dcr/types.hpp"
#include "dcr/wtv.hpp"

namespace dcr {

struct SolverConfig {
    /// Residual tolerance on measured rays (line-integral units).
    double e1 = 0.005;
    /// Residual tolerance on inpainted rays; +inf ignores them entirely.
    double e2 = 0.5;
    double epsilon_hu = 5.0;
    double lambda = 0.8;
    std::size_t n_max = 10;
    std::size_t l_max = 10;
    double ls_alpha = 0.3;
    double ls_gamma = 0.6;
    double ls_t0 = 1.0;
    double sampling_per_mm = kDefaultSamplingPerMm;
    /// Image change, in HU, of a unit wTV step (t = 1 with ||g||_inf = 1).
    double tv_step_hu = 1.0;
    HuCalibration calibration;

    double epsilon_mu() const { return epsilon_hu * calibration.mu_per_hu(); }
    /// Smoothing floor of the gradient norm inside the wTV gradient.
    double smoothing_mu() const { return epsilon_mu() / 10.0; }
    LineSearch line_search() const { return {ls_alpha, ls_gamma, ls_t0, 50}; }

    /// Published settings; noisy data raise the measured-ray tolerance to 0.05.
    static SolverConfig defaults(bool noisy_data) {
        SolverConfig c;
        if (noisy_data) c.e1 = 0.05;
        return c;
    }

    /// All violated invariants, empty when valid.
    std::vector<std::string> diagnostics() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);

/// S_tau(x): x - tau above tau, 0 within [-tau, tau], x + tau below -tau.
constexpr double soft_threshold(double x, double tau) {
    if (x > tau) return x - tau;
    if (x < -tau) return x + tau;
    return 0.0;
}

/// Replaces every non-measured ray by the forward projection of `prior`.
/// Measured rays and the mask are preserved.
Sinogram inpaint_unmeasured(const Volume& prior, const Sinogram& sino,
                            double sampling_per_mm = kDefaultSamplingPerMm);

/// One SART pass over all views in angle order followed by a nonnegativity
/// clamp. `targets` must hold a value for every ray (measured or inpainted);
/// residuals on measured rays are soft-thresholded with e1, others with e2.
/// `row_sums` is ray_row_sum for the image grid.
Volume sart_sweep(const Volume& img, const Sinogram& targets, const SolverConfig& cfg, const Sinogram& row_sums);
Volume sart_sweep(const Volume& img, const Sinogram& targets, const SolverConfig& cfg);

struct IterationRecord {
    std::size_t iteration = 0;
    double residual_measured = 0.0;
    double residual_unmeasured = 0.0;
    double wtv = 0.0;
    std::optional<double> rmse_hu;
    std::size_t line_search_exhausted = 0;
};

struct ConvergenceTrace {
    std::vector<IterationRecord> records;

    void write_csv(const std::filesystem::path& path) const;
};

struct TraceReference {
    Volume image;
    RegionMask region;
};

struct DcrResult {
    Volume image;
    ConvergenceTrace trace;
    Sinogram targets;  // measured data combined with inpainted projections
};

DcrResult reconstruct_dcr(const Sinogram& sino, const Volume& prior, const SolverConfig& cfg,
                          const std::optional<TraceReference>& reference = std::nullopt);

/// Baseline without prior: zero initialisation and unmeasured rays ignored.
DcrResult reconstruct_wtv_only(const Sinogram& sino, const ImageGrid& grid, const SolverConfig& cfg,
                               const std::optional<TraceReference>& reference = std::nullopt);

/// Per-ray |A f - p| over measured rays.
std::vector<double> measured_residuals(const Volume& img, const Sinogram& sino, double sampling_per_mm);

}  // namespace dcr
