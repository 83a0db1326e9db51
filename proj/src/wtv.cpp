#include "dcr/wtv.hpp"

#include <algorithm>
#include <cmath>

namespace dcr {
namespace {

struct Differences {
    std::vector<double> dx, dy, dz;
};

Differences forward_differences(const Volume& img) {
    const auto& g = img.grid;
    const std::size_t nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const std::size_t sy = nx, sz = nx * ny;
    Differences d{std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0),
                  std::vector<double>(g.size(), 0.0)};
    const float* f = img.values.data();
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t i = g.index(x, y, z);
                const double v = f[i];
                if (x + 1 < nx) d.dx[i] = f[i + 1] - v;
                if (y + 1 < ny) d.dy[i] = f[i + sy] - v;
                if (z + 1 < nz) d.dz[i] = f[i + sz] - v;
            }
    return d;
}

}  // namespace

std::vector<double> gradient_magnitude(const Volume& img) {
    const Differences d = forward_differences(img);
    std::vector<double> m(d.dx.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = std::sqrt(d.dx[i] * d.dx[i] + d.dy[i] * d.dy[i] + d.dz[i] * d.dz[i]);
    return m;
}

double wtv_value(const Volume& img, const WtvState& state) {
    if (state.weights.size() != img.values.size()) throw Error("wTV weights do not match the image");
    const auto m = gradient_magnitude(img);
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += state.weights[i] * m[i];
    return s;
}

WtvState wtv_update_weights(const Volume& img, double epsilon_mu) {
    if (!(epsilon_mu > 0.0)) throw Error("wTV epsilon must be positive");
    const auto m = gradient_magnitude(img);
    WtvState s{img.grid, std::vector<float>(m.size())};
    for (std::size_t i = 0; i < m.size(); ++i) s.weights[i] = static_cast<float>(1.0 / (m[i] + epsilon_mu));
    return s;
}

std::vector<double> wtv_gradient(const Volume& img, const WtvState& state, double delta) {
    if (state.weights.size() != img.values.size()) throw Error("wTV weights do not match the image");
    const auto& g = img.grid;
    const std::size_t nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const std::size_t sy = nx, sz = nx * ny;
    const Differences d = forward_differences(img);

    // Per-voxel w / phi, with phi the smoothed gradient norm.
    std::vector<double> c(g.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = state.weights[i] / std::sqrt(d.dx[i] * d.dx[i] + d.dy[i] * d.dy[i] + d.dz[i] * d.dz[i] + delta * delta);

    std::vector<double> grad(g.size(), 0.0);
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t i = g.index(x, y, z);
                double v = -c[i] * (d.dx[i] + d.dy[i] + d.dz[i]);
                if (x > 0) v += c[i - 1] * d.dx[i - 1];
                if (y > 0) v += c[i - sy] * d.dy[i - sy];
                if (z > 0) v += c[i - sz] * d.dz[i - sz];
                grad[i] = v;
            }
    return grad;
}

Volume wtv_gradient_step(const Volume& img, const WtvState& state, const LineSearch& ls, std::size_t l_max,
                         double step_unit, double delta, WtvStepStats* stats) {
    Volume f = img;
    Volume trial = img;
    WtvStepStats st;
    double current = wtv_value(f, state);
    st.values.push_back(current);

    for (std::size_t l = 0; l < l_max; ++l) {
        std::vector<double> g = wtv_gradient(f, state, delta);
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax == 0.0) {
            st.values.push_back(current);
            continue;
        }
        double gg = 0.0;
        for (double& v : g) {
            v /= gmax;
            gg += v * v;
        }

        double t = ls.t0;
        double value = current;
        bool accepted = false;
        for (std::size_t k = 0; k <= ls.max_reductions; ++k, t *= ls.gamma) {
            for (std::size_t i = 0; i < g.size(); ++i)
                trial.values[i] = static_cast<float>(f.values[i] - t * step_unit * g[i]);
            value = wtv_value(trial, state);
            const bool sufficient = value <= current + ls.alpha * t * gg;
            const bool monotone = value <= current;
            if (sufficient && monotone) {
                accepted = true;
                break;
            }
        }
        if (accepted) {
            std::swap(f.values, trial.values);
            current = value;
            ++st.accepted;
        } else {
            ++st.exhausted;
        }
        st.values.push_back(current);
    }
    if (stats) *stats = std::move(st);
    return f;
}

}  // namespace dcr
