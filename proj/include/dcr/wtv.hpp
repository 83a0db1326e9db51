// Reweighted total variation: ||f||_wTV = sum_j w_j * ||D f_j||, with D the
// forward-difference gradient (replicate boundary, so the last difference
// along each axis is zero) and w_j = 1 / (||D f_prev_j|| + eps).
#pragma once

#include <cstddef>
#include <vector>

#include "dcr/types.hpp"

namespace dcr {

struct WtvState {
    ImageGrid grid;
    std::vector<float> weights;
};

struct LineSearch {
    double alpha = 0.3;
    double gamma = 0.6;
    double t0 = 1.0;
    /// Backtracking reductions before the step is abandoned.
    std::size_t max_reductions = 50;
};

/// Per-voxel ||D f||.
std::vector<double> gradient_magnitude(const Volume& img);

double wtv_value(const Volume& img, const WtvState& state);

WtvState wtv_update_weights(const Volume& img, double epsilon_mu);

/// Gradient of sum_j w_j * sqrt(||D f_j||^2 + delta^2) with respect to f.
std::vector<double> wtv_gradient(const Volume& img, const WtvState& state, double delta);

struct WtvStepStats {
    std::size_t accepted = 0;
    /// Subiterations whose line search ran out of reductions (zero step taken).
    std::size_t exhausted = 0;
    /// wTV value before the first and after every subiteration.
    std::vector<double> values;
};

/// l_max rounds of normalised-gradient descent on the wTV with fixed weights.
/// Each round: g = grad / ||grad||_inf, then t shrinks by gamma from t0 while
///   wTV(f - t*step_unit*g) > wTV(f) + alpha * t * g'g
/// or the trial would raise the wTV; the image moves by t*step_unit*g.
/// `step_unit` is the image change (1/mm) per unit t.
Volume wtv_gradient_step(const Volume& img, const WtvState& state, const LineSearch& ls, std::size_t l_max,
                         double step_unit, double delta, WtvStepStats* stats = nullptr);

}  // namespace dcr
