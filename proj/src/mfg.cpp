#include "mfgkit/mfg.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "mfgkit/linalg.hpp"

namespace mfgkit {

namespace {

void validate(const SolveParams& p) {
    if (!(p.damping > 0.0 && p.damping <= 1.0))
        throw ParamOutOfRange("SolveParams: damping must lie in (0,1]");
    if (!(p.tol > 0.0)) throw ParamOutOfRange("SolveParams: tol must be > 0");
    if (p.max_iter < 1) throw ParamOutOfRange("SolveParams: max_iter must be >= 1");
}

double blow_up_radius_for(const SpaceTimeGrid& grid) {
    double r = 0.0;
    for (std::size_t a = 0; a < grid.dim; ++a)
        r = std::max(r, std::max(std::fabs(grid.lo[a]), std::fabs(grid.hi[a])));
    return 10.0 * r;
}

struct StepResult {
    MeasureFlow flow;
    ValueField value;
};

StepResult apply_S_on_grid(const MfgProblem& problem, const MeasureFlow& rho,
                           const SpaceTimeGrid& grid, const SolveParams& params) {
    StepResult out;
    out.value = solve_hjb(problem, rho, grid, params.hjb);
    const VelocityField velocity(problem, out.value, rho);
    out.flow = integrate_flow(velocity.fn(), rho.initial(), grid.nt, grid.horizon,
                              blow_up_radius_for(grid));
    return out;
}

MeasureFlow blend_flows(const MeasureFlow& a, const MeasureFlow& b, double lambda) {
    if (lambda >= 1.0) return b;
    std::vector<ParticleMeasure> measures;
    measures.reserve(a.steps() + 1);
    const std::size_t n = a.particles(), d = a.dim();
    for (std::size_t k = 0; k <= a.steps(); ++k) {
        std::vector<double> pts(n * d);
        const auto fa = a.at(k).flat();
        const auto fb = b.at(k).flat();
        for (std::size_t i = 0; i < n * d; ++i) pts[i] = fa[i] + lambda * (fb[i] - fa[i]);
        measures.push_back(ParticleMeasure::from_flat(std::move(pts), d));
    }
    return MeasureFlow(a.times(), std::move(measures));
}

}  // namespace

SpaceTimeGrid make_solver_grid(const MfgProblem& problem, const ParticleMeasure& rho0,
                               const SolveParams& params) {
    const double c_v = estimate_velocity_scale(problem, rho0);
    std::vector<double> lo = params.lo, hi = params.hi;
    if (lo.empty()) {
        auto bounds = auto_bounds(rho0, c_v, problem.horizon, params.nx);
        lo = std::move(bounds.first);
        hi = std::move(bounds.second);
    }
    return SpaceTimeGrid::make(problem.dim, std::move(lo), std::move(hi), params.nx, params.nt,
                               problem.horizon, 2.0 * c_v);
}

MeasureFlow apply_S(const MfgProblem& problem, const MeasureFlow& rho, const SolveParams& params) {
    validate(params);
    const auto grid = make_solver_grid(problem, rho.initial(), params);
    return apply_S_on_grid(problem, rho, grid, params).flow;
}

namespace {

MfgSolution solve_on_grid(const MfgProblem& problem, const ParticleMeasure& rho0,
                          const SpaceTimeGrid& grid, const SolveParams& params) {
    validate(params);
    if (problem.beta != 0.0) throw ParamOutOfRange("solve: beta must be 0");

    MeasureFlow flow = params.initial_flow ? *params.initial_flow
                                           : MeasureFlow::stationary(rho0, params.nt,
                                                                     problem.horizon);
    if (params.initial_flow) {
        if (flow.steps() != params.nt || flow.particles() != rho0.size() ||
            flow.dim() != rho0.dim())
            throw SizeMismatch("solve: initial flow shape does not match rho0/nt");
        const auto f0 = flow.initial().flat();
        const auto r0 = rho0.flat();
        for (std::size_t i = 0; i < r0.size(); ++i)
            if (std::fabs(f0[i] - r0[i]) > 1e-9)
                throw ParamOutOfRange("solve: initial flow must start at rho0");
    }

    // `iterations` counts Picard updates: the residual of the k-th iterate is
    // known only after one more application of S, so convergence at iterate k
    // reports k iterations.
    MfgSolution sol;
    double lambda = params.damping;
    double best_residual = std::numeric_limits<double>::infinity();
    for (std::size_t updates = 0;; ++updates) {
        StepResult step = apply_S_on_grid(problem, flow, grid, params);
        const double residual = flow.sup_w1(step.flow);
        sol.residual_history.push_back(residual);
        if (residual < best_residual) {
            best_residual = residual;
            sol.value = std::move(step.value);
            sol.flow = step.flow;  // keep a copy; step.flow still feeds the blend
            sol.iterations = updates;
        }
        if (residual <= params.tol) {
            sol.converged = true;
            sol.iterations = updates;
            return sol;
        }
        if (updates >= params.max_iter) break;
        if (sol.residual_history.size() >= 2 &&
            residual > sol.residual_history[sol.residual_history.size() - 2])
            lambda = std::max(0.5 * lambda, 1.0 / 64.0);
        flow = blend_flows(flow, step.flow, lambda);
    }
    sol.converged = false;  // MaxIterExceeded: best iterate is returned
    return sol;
}

}  // namespace

MfgSolution solve(const MfgProblem& problem, const ParticleMeasure& rho0,
                  const SolveParams& params) {
    const auto grid = make_solver_grid(problem, rho0, params);
    return solve_on_grid(problem, rho0, grid, params);
}

StabilityReport stability_experiment(const MfgProblem& problem, const ParticleMeasure& rho0_1,
                                     const ParticleMeasure& rho0_2, const SolveParams& params) {
    validate(params);
    if (rho0_1.size() != rho0_2.size() || rho0_1.dim() != rho0_2.dim())
        throw SizeMismatch("stability_experiment: initial measures must share n and dim");

    // Optimal coupling at t = 0, realized by reindexing the second population
    // so particle i of flow 2 is the optimal partner of particle i of flow 1.
    const Coupling coupling = optimal_coupling(rho0_1, rho0_2);
    const std::size_t n = rho0_1.size(), d = rho0_1.dim();
    std::vector<double> aligned(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = rho0_2.point(coupling.pairing[i]);
        for (std::size_t c = 0; c < d; ++c) aligned[i * d + c] = y[c];
    }
    const auto rho0_2_aligned = ParticleMeasure::from_flat(std::move(aligned), d);

    // Shared grid sized from both populations so node-wise gradient gaps are
    // well defined.
    SolveParams shared = params;
    if (shared.lo.empty()) {
        std::vector<double> all(rho0_1.flat().begin(), rho0_1.flat().end());
        all.insert(all.end(), rho0_2.flat().begin(), rho0_2.flat().end());
        const auto cloud = ParticleMeasure::from_flat(std::move(all), d);
        const double c_v = std::max(estimate_velocity_scale(problem, rho0_1),
                                    estimate_velocity_scale(problem, rho0_2));
        auto bounds = auto_bounds(cloud, c_v, problem.horizon, params.nx);
        shared.lo = std::move(bounds.first);
        shared.hi = std::move(bounds.second);
    }
    const auto grid = make_solver_grid(problem, rho0_1, shared);

    auto fut = std::async(std::launch::async, [&] {
        return solve_on_grid(problem, rho0_2_aligned, grid, shared);
    });
    MfgSolution sol1 = solve_on_grid(problem, rho0_1, grid, shared);
    MfgSolution sol2 = fut.get();
    if (!sol1.converged || !sol2.converged)
        throw NoConvergence("stability_experiment: a Picard run did not converge (residuals " +
                            std::to_string(sol1.residual_history.back()) + ", " +
                            std::to_string(sol2.residual_history.back()) + ")");

    StabilityReport rep;
    rep.initial_gap = std::sqrt(coupling.cost2);
    rep.zero_gap = rep.initial_gap <= 1e-14;
    rep.times = sol1.flow.times();
    const std::size_t nt = sol1.flow.steps();
    rep.w2_curve.resize(nt + 1);
    rep.pairing_curve.resize(nt + 1);
    double du1[2], du2[2];
    for (std::size_t k = 0; k <= nt; ++k) {
        rep.w2_curve[k] = wasserstein(2, sol1.flow.at(k), sol2.flow.at(k));
        const double t = rep.times[k];
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto x1 = sol1.flow.at(k).point(i);
            const auto x2 = sol2.flow.at(k).point(i);
            sol1.value.interp_du(t, x1, {du1, d});
            sol2.value.interp_du(t, x2, {du2, d});
            for (std::size_t c = 0; c < d; ++c) acc += (du1[c] - du2[c]) * (x1[c] - x2[c]);
        }
        rep.pairing_curve[k] = acc / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < sol1.value.du.size(); ++i)
        rep.grad_gap = std::max(rep.grad_gap, std::fabs(sol1.value.du[i] - sol2.value.du[i]));

    const double sup_w2 = *std::max_element(rep.w2_curve.begin(), rep.w2_curve.end());
    rep.ratio = rep.zero_gap ? 0.0 : sup_w2 / rep.initial_gap;
    rep.sharp_flag = !rep.zero_gap && rep.ratio <= 1.0 + 1e-3;
    rep.sol1 = std::move(sol1);
    rep.sol2 = std::move(sol2);
    return rep;
}

}  // namespace mfgkit
