#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mfgkit/flow.hpp"
#include "mfgkit/grid.hpp"
#include "mfgkit/model.hpp"

namespace mfgkit {

/// Value function on a space-time grid with its discrete spatial gradient
/// (centered differences, one-sided at the boundary) and per-axis second
/// differences.
struct ValueField {
    SpaceTimeGrid grid;
    std::vector<double> u;    // (nt+1) x N
    std::vector<double> du;   // (nt+1) x N x d
    std::vector<double> d2u;  // (nt+1) x N x d

    std::span<const double> u_slice(std::size_t k) const;
    std::span<const double> du_slice(std::size_t k) const;
    std::span<const double> d2u_slice(std::size_t k) const;

    double interp_u(std::size_t k, std::span<const double> x, bool* clamped = nullptr) const;
    /// Gradient at arbitrary (t, x): linear blend in t of the two adjacent
    /// slices, multilinear in x with clamping.
    void interp_du(double t, std::span<const double> x, std::span<double> out,
                   bool* clamped = nullptr) const;

    double min_second_difference() const;
    double max_abs_second_difference() const;
};

struct HjbOptions {
    std::size_t coarse_actions = 33;   // per axis (d=2 uses 17)
    double action_tol = 1e-8;
    double a_max_override = 0.0;       // 0: use 2 * estimated C_V
    double domain_clamp_fraction = 0.01;
};

/// Velocity scale of the optimal feedback, estimated by sampling
/// |D_pH(x, -D_xg(x, rho_T), rho_T)| over the grid. Feeds the action cap
/// A_max = 2 C_V and the domain sizing rule.
double estimate_velocity_scale(const MfgProblem& problem, const SpaceTimeGrid& grid,
                               const ParticleMeasure& rho_terminal);
double estimate_velocity_scale(const MfgProblem& problem, const ParticleMeasure& rho0);

/// Domain sizing from the flow growth bound: per-axis half-width
/// (R0 + C_V T) e^{C_V T} around the particle span, plus two cells.
std::pair<std::vector<double>, std::vector<double>> auto_bounds(const ParticleMeasure& rho0,
                                                                double c_v, double horizon,
                                                                std::size_t nx);

/// Backward semi-Lagrangian dynamic programming for
///   -du/dt + H(x, -D_x u, rho_t) = 0,  u(T,.) = g(., rho_T)
/// realized through the control form: u(t_k, x) = min_a { dt L(x, a, rho_k)
/// + interp u(t_{k+1})(x + dt a) }. Coarse action grid then golden-section
/// refinement per axis; ties break toward the lexicographically smallest
/// action.
ValueField solve_hjb(const MfgProblem& problem, const MeasureFlow& rho, const SpaceTimeGrid& grid,
                     const HjbOptions& options = {});

struct RegularityReport {
    double ball_radius = 0.0;
    double sup_du_ball = 0.0;     // sup |du| on B_R
    double sup_d2u = 0.0;         // global sup of |d2u|
    double sup_dt_u = 0.0;        // max |u(k+1)-u(k)| / dt
    double sup_dt_du = 0.0;       // max |du(k+1)-du(k)| / dt
    double declared_bound = 0.0;  // problem.c11_bound
    double time_variation_ratio = 0.0;  // max_t sup|d2u| / median_t sup|d2u|
    std::size_t worst_time = 0;
    std::size_t worst_node = 0;
    bool pass = false;  // sup_d2u <= declared bound (2% grid slack)
};

RegularityReport audit_regularity(const ValueField& field, const MfgProblem& problem);

/// CSV per time slice plus manifest.json {T, nt, nx, bounds, dim}.
void save_value_field(const ValueField& field, const std::string& dir);

}  // namespace mfgkit
