#include "mfgkit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mfgkit {

SpaceTimeGrid SpaceTimeGrid::make(std::size_t dim, std::vector<double> lo, std::vector<double> hi,
                                  std::size_t nx, std::size_t nt, double horizon,
                                  double velocity_bound) {
    if (dim < 1 || dim > 2)
        throw ParamOutOfRange("SpaceTimeGrid: dim must be 1 or 2, got " + std::to_string(dim));
    if (lo.size() != dim || hi.size() != dim)
        throw DimensionMismatch("SpaceTimeGrid: bounds must have one [lo,hi] per axis");
    if (nx < 8) throw ParamOutOfRange("SpaceTimeGrid: nx must be >= 8");
    if (nt < 2) throw ParamOutOfRange("SpaceTimeGrid: nt must be >= 2");
    if (horizon <= 0.0) throw ParamOutOfRange("SpaceTimeGrid: horizon must be > 0");
    double min_width = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < dim; ++a) {
        if (!(lo[a] < hi[a]))
            throw ParamOutOfRange("SpaceTimeGrid: need lo < hi on axis " + std::to_string(a));
        min_width = std::min(min_width, hi[a] - lo[a]);
    }
    const double dt = horizon / static_cast<double>(nt);
    if (velocity_bound > 0.0 && dt * velocity_bound > min_width / 4.0)
        throw ParamOutOfRange("SpaceTimeGrid: dt * velocity bound " +
                              std::to_string(dt * velocity_bound) + " exceeds width/4 = " +
                              std::to_string(min_width / 4.0) + "; refine nt or widen the box");
    SpaceTimeGrid g;
    g.dim = dim;
    g.lo = std::move(lo);
    g.hi = std::move(hi);
    g.nx = nx;
    g.nt = nt;
    g.horizon = horizon;
    g.velocity_bound = velocity_bound;
    return g;
}

double SpaceTimeGrid::max_dx() const {
    double m = 0.0;
    for (std::size_t a = 0; a < dim; ++a) m = std::max(m, dx(a));
    return m;
}

std::size_t SpaceTimeGrid::num_nodes() const {
    std::size_t n = 1;
    for (std::size_t a = 0; a < dim; ++a) n *= nx;
    return n;
}

void SpaceTimeGrid::node_coords(std::size_t j, std::span<double> out) const {
    for (std::size_t a = 0; a < dim; ++a) {
        out[a] = lo[a] + dx(a) * static_cast<double>(j % nx);
        j /= nx;
    }
}

double SpaceTimeGrid::interpolate(std::span<const double> values, std::span<const double> x,
                                  bool* clamped) const {
    std::size_t base[2] = {0, 0};
    double theta[2] = {0.0, 0.0};
    for (std::size_t a = 0; a < dim; ++a) {
        double q = x[a];
        if (q < lo[a] || q > hi[a]) {
            if (clamped) *clamped = true;
            q = std::clamp(q, lo[a], hi[a]);
        }
        double cell = (q - lo[a]) / dx(a);
        auto i = static_cast<std::size_t>(cell);
        if (i >= nx - 1) i = nx - 2;
        base[a] = i;
        theta[a] = cell - static_cast<double>(i);
    }
    if (dim == 1) {
        const double v0 = values[base[0]];
        const double v1 = values[base[0] + 1];
        return v0 + theta[0] * (v1 - v0);
    }
    const std::size_t j00 = base[0] + nx * base[1];
    const double v00 = values[j00], v10 = values[j00 + 1];
    const double v01 = values[j00 + nx], v11 = values[j00 + nx + 1];
    const double a0 = v00 + theta[0] * (v10 - v00);
    const double a1 = v01 + theta[0] * (v11 - v01);
    return a0 + theta[1] * (a1 - a0);
}

void SpaceTimeGrid::interpolate_vec(std::span<const double> values, std::span<const double> x,
                                    std::span<double> out, bool* clamped) const {
    std::size_t base[2] = {0, 0};
    double theta[2] = {0.0, 0.0};
    for (std::size_t a = 0; a < dim; ++a) {
        double q = x[a];
        if (q < lo[a] || q > hi[a]) {
            if (clamped) *clamped = true;
            q = std::clamp(q, lo[a], hi[a]);
        }
        double cell = (q - lo[a]) / dx(a);
        auto i = static_cast<std::size_t>(cell);
        if (i >= nx - 1) i = nx - 2;
        base[a] = i;
        theta[a] = cell - static_cast<double>(i);
    }
    for (std::size_t c = 0; c < dim; ++c) {
        if (dim == 1) {
            const double v0 = values[base[0] * dim + c];
            const double v1 = values[(base[0] + 1) * dim + c];
            out[c] = v0 + theta[0] * (v1 - v0);
        } else {
            const std::size_t j00 = base[0] + nx * base[1];
            const double v00 = values[j00 * dim + c], v10 = values[(j00 + 1) * dim + c];
            const double v01 = values[(j00 + nx) * dim + c],
                         v11 = values[(j00 + nx + 1) * dim + c];
            const double a0 = v00 + theta[0] * (v10 - v00);
            const double a1 = v01 + theta[0] * (v11 - v01);
            out[c] = a0 + theta[1] * (a1 - a0);
        }
    }
}

}  // namespace mfgkit
