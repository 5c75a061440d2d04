#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfgkit/flow.hpp"
#include "mfgkit/mfg.hpp"
#include "mfgkit/model.hpp"

namespace mfgkit {

/// One characteristic of the deterministic Pontryagin system
///   dX/dt = D_pH(X, Y, rho_t),  dY/dt = -D_xH(X, Y, rho_t),
/// with terminal costate Y_T = -D_xg(X_T, rho_T).
struct CharacteristicPath {
    std::vector<double> times;
    std::vector<double> X;  // (nt+1) x d
    std::vector<double> Y;  // (nt+1) x d
    double residual = 0.0;  // |Y_T + D_xg(X_T, rho_T)|
    std::size_t newton_iterations = 0;

    std::span<const double> x_at(std::size_t k) const;
    std::span<const double> y_at(std::size_t k) const;
};

/// Forward integration from (x0, y0); no terminal condition imposed.
CharacteristicPath integrate_characteristic(const MfgProblem& problem, const MeasureFlow& rho,
                                            std::span<const double> x0,
                                            std::span<const double> y0);
/// Same system integrated backward from a terminal state (used by the
/// reversibility audit).
CharacteristicPath integrate_characteristic_backward(const MfgProblem& problem,
                                                     const MeasureFlow& rho,
                                                     std::span<const double> xT,
                                                     std::span<const double> yT);

/// Finds Y_0 such that the forward characteristic meets the terminal costate
/// condition, by damped quasi-Newton with a finite-difference Jacobian on the
/// d-dimensional shooting map.
CharacteristicPath shoot(const MfgProblem& problem, const MeasureFlow& rho,
                         std::span<const double> x0, double tol);

struct ConsistencyReport {
    std::size_t probes = 0;
    double max_defect = 0.0;  // sup_t |Y_t + interp(du)(t, X_t)| over probes
    double tolerance = 0.0;   // 10 (dx + dt)
    bool pass = true;
    std::vector<double> worst_x0;
};

/// Cross-validates the HJB gradient against shooting: for probes x0 drawn
/// from rho_0, the costate along the shot characteristic must match
/// -D_x u(t, X_t) interpolated from the grid.
ConsistencyReport consistency_check(const MfgProblem& problem, const MfgSolution& solution,
                                    std::size_t n_probe, std::uint64_t seed);

void save_path_csv(const CharacteristicPath& path, std::size_t dim, const std::string& file);

}  // namespace mfgkit
