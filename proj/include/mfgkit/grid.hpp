#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfgkit/errors.hpp"

namespace mfgkit {

/// Uniform tensor grid on a box in R^d (d in {1,2}) times a uniform time
/// grid. nx is the node count per axis; dt = T/nt. The declared velocity
/// bound feeds a CFL-style sanity check: dt * vbound <= min width / 4.
struct SpaceTimeGrid {
    std::size_t dim = 1;
    std::vector<double> lo;  // per axis
    std::vector<double> hi;
    std::size_t nx = 0;
    std::size_t nt = 0;
    double horizon = 1.0;
    double velocity_bound = 0.0;

    static SpaceTimeGrid make(std::size_t dim, std::vector<double> lo, std::vector<double> hi,
                              std::size_t nx, std::size_t nt, double horizon,
                              double velocity_bound);

    double dt() const { return horizon / static_cast<double>(nt); }
    double dx(std::size_t axis) const {
        return (hi[axis] - lo[axis]) / static_cast<double>(nx - 1);
    }
    double max_dx() const;
    std::size_t num_nodes() const;
    void node_coords(std::size_t j, std::span<double> out) const;
    double time(std::size_t k) const { return dt() * static_cast<double>(k); }

    /// Multilinear interpolation of a nodal field, with the query point
    /// clamped to the box. Sets *clamped when clamping was needed.
    double interpolate(std::span<const double> values, std::span<const double> x,
                       bool* clamped = nullptr) const;
    /// Same, for a d-vector field stored node-major (node index fastest on
    /// nodes, component stride 1): values[j*dim + c].
    void interpolate_vec(std::span<const double> values, std::span<const double> x,
                         std::span<double> out, bool* clamped = nullptr) const;
};

}  // namespace mfgkit
