#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mfgkit/hamsys.hpp"
#include "mfgkit/linalg.hpp"
#include "mfgkit/rng.hpp"

using namespace mfgkit;

namespace {

ParticleMeasure gaussian_at(double mean, double sd, std::size_t n, std::uint64_t seed) {
    const std::vector<double> m = {mean};
    return center_to_mean(sample_gaussian(n, 1, m, sd, seed), m);
}

}  // namespace

TEST_CASE("shoot quadratic: Y0 = -x0/(1+T)") {
    const auto prob = builtin("quadratic");
    // H and g are measure-free; any flow with the right grid works
    const auto rho = MeasureFlow::stationary(gaussian_at(0.0, 0.5, 16, 1), 200, 1.0);
    const auto path = shoot(prob, rho, std::vector<double>{1.0}, 1e-9);
    CHECK(path.Y[0] == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(path.residual <= 1e-9);
    // costate is constant (D_xH = 0) and X_T = x0 + Y0 T
    CHECK(path.Y.back() == doctest::Approx(path.Y.front()).epsilon(1e-10));
    CHECK(path.X.back() == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("linear terminal cost: constant costate, straight characteristic") {
    auto prob = builtin("quadratic");
    const double b = 0.7;
    prob.terminal.eval = [b](std::span<const double> x, const ParticleMeasure&) {
        return b * x[0];
    };
    prob.terminal.grad_x = [b](std::span<const double>, const ParticleMeasure&,
                               std::span<double> o) { o[0] = b; };
    const auto rho = MeasureFlow::stationary(gaussian_at(0.0, 0.5, 8, 2), 100, 1.0);
    const double x0 = 0.4;
    const auto path = shoot(prob, rho, std::vector<double>{x0}, 1e-10);
    for (std::size_t k = 0; k < path.times.size(); k += 25)
        CHECK(path.Y[k] == doctest::Approx(-b).epsilon(1e-9));
    CHECK(path.X.back() == doctest::Approx(x0 - b * 1.0).epsilon(1e-9));
}

TEST_CASE("lq_mean: shooting from the mean tracks the population characteristic") {
    const auto prob = builtin("lq_mean", {{"a", 0.5}});
    SolveParams params;
    params.damping = 1.0;
    params.tol = 1e-4;
    params.max_iter = 20;
    params.nt = 100;
    params.nx = 201;
    params.lo = {-6.0};
    params.hi = {8.0};
    const auto rho0 = gaussian_at(2.0, 0.5, 300, 9);
    const auto sol = solve(prob, rho0, params);
    REQUIRE(sol.converged);

    // the population mean solves the same characteristic ODE, so the shot
    // path from x0 = mean(rho0) must follow the mean path of the flow
    const auto path = shoot(prob, sol.flow, std::vector<double>{sol.flow.initial().mean()[0]},
                            1e-9);
    for (std::size_t k = 0; k <= sol.flow.steps(); k += 20)
        CHECK(path.X[k] == doctest::Approx(sol.flow.at(k).mean()[0]).epsilon(0.02));
}

TEST_CASE("shoot validates tol and reports divergence") {
    const auto prob = builtin("quadratic");
    const auto rho = MeasureFlow::stationary(gaussian_at(0.0, 0.5, 8, 3), 50, 1.0);
    CHECK_THROWS_AS(shoot(prob, rho, std::vector<double>{1.0}, 0.0), ParamOutOfRange);
}

TEST_CASE("Hamiltonian flow reversibility") {
    const auto prob = builtin("displacement_model", {{"C0", 1.0}, {"eps", 0.1}});
    const auto rho = MeasureFlow::stationary(gaussian_at(0.3, 0.5, 32, 4), 200, 1.0);
    const std::vector<double> x0 = {0.8}, y0 = {-0.4};
    const auto fwd = integrate_characteristic(prob, rho, x0, y0);
    const std::size_t nt = rho.steps();
    const auto back = integrate_characteristic_backward(prob, rho, fwd.x_at(nt), fwd.y_at(nt));
    CHECK(back.X[0] == doctest::Approx(x0[0]).epsilon(1e-6));
    CHECK(back.Y[0] == doctest::Approx(y0[0]).epsilon(1e-6));
}

TEST_CASE("consistency check against the HJB gradient") {
    const auto prob = builtin("quadratic");
    SolveParams params;
    params.damping = 1.0;
    params.tol = 1e-4;
    params.max_iter = 10;
    params.nt = 200;
    params.nx = 201;
    params.lo = {-2.0};
    params.hi = {2.0};
    const auto rho0 = gaussian_at(0.3, 0.4, 64, 5);
    const auto sol = solve(prob, rho0, params);
    REQUIRE(sol.converged);

    const auto rep = consistency_check(prob, sol, 20, 6);
    INFO("max defect ", rep.max_defect, " tol ", rep.tolerance);
    CHECK(rep.probes == 20);
    CHECK(rep.pass);

    // vacuous report for zero probes
    const auto empty = consistency_check(prob, sol, 0, 6);
    CHECK(empty.pass);
    CHECK(empty.probes == 0);

    // corrupting the stored gradient must surface as a failure
    auto corrupted = sol;
    for (double& g : corrupted.value.du) g += 0.9;
    const auto bad = consistency_check(prob, corrupted, 20, 6);
    CHECK_FALSE(bad.pass);
    CHECK(bad.max_defect >= 0.5);
}

TEST_CASE("two routes to the displacement pairing agree") {
    // route A: interpolated HJB gradients along the stored flows
    // route B: costates from per-particle shooting on the same flows
    const auto prob = builtin("lq_mean", {{"a", 0.5}});
    SolveParams params;
    params.damping = 1.0;
    params.tol = 1e-4;
    params.max_iter = 20;
    params.nt = 100;
    params.nx = 201;
    params.lo = {-6.0};
    params.hi = {8.0};
    const std::size_t n = 64;
    const auto rho0 = gaussian_at(2.0, 0.5, n, 7);
    const auto rep = stability_experiment(prob, rho0, rho0.translated(std::vector<double>{0.8}),
                                          params);

    const std::size_t nt = rep.sol1.flow.steps();
    std::vector<double> pairing_by_shooting(nt + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p1 = shoot(prob, rep.sol1.flow, rep.sol1.flow.initial().point(i), 1e-9);
        const auto p2 = shoot(prob, rep.sol2.flow, rep.sol2.flow.initial().point(i), 1e-9);
        for (std::size_t k = 0; k <= nt; ++k)
            pairing_by_shooting[k] +=
                (-p1.Y[k] + p2.Y[k]) * (p1.X[k] - p2.X[k]) / static_cast<double>(n);
    }
    const auto& grid = rep.sol1.value.grid;
    const double tol = 10.0 * (grid.max_dx() + grid.dt());
    for (std::size_t k = 0; k <= nt; k += 10)
        CHECK(std::fabs(pairing_by_shooting[k] - rep.pairing_curve[k]) <= tol);
}

TEST_CASE("path csv export") {
    namespace fs = std::filesystem;
    const auto prob = builtin("quadratic");
    const auto rho = MeasureFlow::stationary(gaussian_at(0.0, 0.5, 8, 8), 20, 1.0);
    const auto path = shoot(prob, rho, std::vector<double>{0.5}, 1e-8);
    const auto file = (fs::temp_directory_path() / "mfgkit_path.csv").string();
    save_path_csv(path, 1, file);
    CHECK(fs::exists(file));
}
