#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mfgkit/flow.hpp"
#include "mfgkit/hjb.hpp"
#include "mfgkit/model.hpp"

namespace mfgkit {

/// Numerical parameters of the damped Picard iteration on the fixed-point
/// map S: rho -> transport(rho0, feedback(HJB(rho))). The Schauder existence
/// argument is non-constructive; the iteration is verified empirically by
/// its residual, never assumed contractive.
struct SolveParams {
    double damping = 0.5;  // lambda in (0,1]; halved automatically on residual increase
    double tol = 1e-4;     // stop when sup_t W1(rho, S(rho)) <= tol
    std::size_t max_iter = 30;
    std::size_t nt = 100;
    std::size_t nx = 201;
    std::vector<double> lo;  // empty: size the box from the growth bound
    std::vector<double> hi;
    std::size_t n_particles = 1000;
    std::uint64_t seed = 0;
    HjbOptions hjb;
    /// Picard initialization; stationary flow at rho0 when absent. Must share
    /// rho0's time-zero particles.
    std::optional<MeasureFlow> initial_flow;
};

struct MfgSolution {
    ValueField value;
    MeasureFlow flow;
    std::vector<double> residual_history;  // sup_t W1(rho^k, S(rho^k)) per iteration
    std::size_t iterations = 0;
    bool converged = false;
};

SpaceTimeGrid make_solver_grid(const MfgProblem& problem, const ParticleMeasure& rho0,
                               const SolveParams& params);

/// One application of the fixed-point map on a given grid: solve the HJB
/// equation against rho, build the feedback velocity, transport rho's initial
/// measure. Particle indexing is preserved.
MeasureFlow apply_S(const MfgProblem& problem, const MeasureFlow& rho, const SolveParams& params);

MfgSolution solve(const MfgProblem& problem, const ParticleMeasure& rho0,
                  const SolveParams& params);

struct StabilityReport {
    std::vector<double> times;
    std::vector<double> w2_curve;       // t -> W2(rho1_t, rho2_t)
    std::vector<double> pairing_curve;  // t -> E[(du1(X1)-du2(X2)).(X1-X2)]
    double grad_gap = 0.0;              // sup_t max-node |du1 - du2|
    double initial_gap = 0.0;           // W2(rho0_1, rho0_2)
    double ratio = 0.0;                 // sup_t W2 / initial_gap; 0 when gap is zero
    bool zero_gap = false;
    bool sharp_flag = false;  // ratio <= 1 + 1e-3 (meaningful for separable quadratic H)
    MfgSolution sol1;
    MfgSolution sol2;
};

/// Solves from both initial measures on a shared grid, pairs particles by
/// the optimal coupling at t = 0 (propagated by index), and fills the
/// stability diagnostics.
StabilityReport stability_experiment(const MfgProblem& problem, const ParticleMeasure& rho0_1,
                                     const ParticleMeasure& rho0_2, const SolveParams& params);

}  // namespace mfgkit
