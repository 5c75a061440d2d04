#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mfgkit/hjb.hpp"
#include "mfgkit/linalg.hpp"

using namespace mfgkit;

namespace {

// closed form for the quadratic model: u(t,x) = |x|^2 / (2 (1 + T - t)),
// found by the quadratic ansatz in -du/dt + |D_x u|^2/2 = 0, u(T,.) = |x|^2/2
double quadratic_u(double t, double T, std::span<const double> x) {
    return dot(x, x) / (2.0 * (1.0 + T - t));
}

double max_error_vs_quadratic(const ValueField& f) {
    const auto& g = f.grid;
    const std::size_t N = g.num_nodes();
    std::vector<double> x(g.dim);
    double err = 0.0;
    for (std::size_t k = 0; k <= g.nt; ++k) {
        const double t = g.time(k);
        for (std::size_t j = 0; j < N; ++j) {
            g.node_coords(j, x);
            err = std::max(err, std::fabs(f.u[k * N + j] - quadratic_u(t, g.horizon, x)));
        }
    }
    return err;
}

MeasureFlow trivial_flow(std::size_t nt, double T) {
    return MeasureFlow::stationary(ParticleMeasure::from_samples({{0.0}, {0.5}}), nt, T);
}

}  // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(SpaceTimeGrid::make(3, {0, 0, 0}, {1, 1, 1}, 16, 10, 1.0, 0.0),
                    ParamOutOfRange);
    CHECK_THROWS_AS(SpaceTimeGrid::make(1, {0}, {1}, 4, 10, 1.0, 0.0), ParamOutOfRange);
    CHECK_THROWS_AS(SpaceTimeGrid::make(1, {1}, {0}, 16, 10, 1.0, 0.0), ParamOutOfRange);
    // CFL-style sanity: dt * vel bound must stay under width/4
    CHECK_THROWS_AS(SpaceTimeGrid::make(1, {0}, {1}, 16, 2, 1.0, 10.0), ParamOutOfRange);
    const auto g = SpaceTimeGrid::make(2, {-1, -2}, {1, 2}, 9, 10, 1.0, 0.5);
    CHECK(g.num_nodes() == 81);
    CHECK(g.dx(1) == doctest::Approx(0.5));
}

TEST_CASE("multilinear interpolation exactness on linear functions") {
    const auto g = SpaceTimeGrid::make(2, {-1, -1}, {1, 1}, 11, 4, 1.0, 0.0);
    std::vector<double> vals(g.num_nodes());
    std::vector<double> x(2);
    for (std::size_t j = 0; j < g.num_nodes(); ++j) {
        g.node_coords(j, x);
        vals[j] = 3.0 * x[0] - 2.0 * x[1] + 0.25;
    }
    const std::vector<double> q = {0.137, -0.642};
    CHECK(g.interpolate(vals, q) ==
          doctest::Approx(3.0 * q[0] - 2.0 * q[1] + 0.25).epsilon(1e-13));
    bool clamped = false;
    const std::vector<double> outside = {2.0, 0.0};
    g.interpolate(vals, outside, &clamped);
    CHECK(clamped);
}

TEST_CASE("quadratic model: terminal slice exact, oracle error bound, convexity") {
    const auto prob = builtin("quadratic");
    const std::size_t nx = 101, nt = 100;
    const auto grid = SpaceTimeGrid::make(1, {-2}, {2}, nx, nt, 1.0, 4.0);
    const auto rho = trivial_flow(nt, 1.0);
    const auto f = solve_hjb(prob, rho, grid);

    // terminal condition holds at nodes exactly
    std::vector<double> x(1);
    for (std::size_t j = 0; j < nx; ++j) {
        grid.node_coords(j, x);
        CHECK(f.u[nt * nx + j] == prob.terminal.eval(x, rho.terminal()));
    }

    const double err = max_error_vs_quadratic(f);
    const double budget = 5.0 * (grid.dx(0) * grid.dx(0) + grid.dt());
    INFO("err = ", err, " budget = ", budget);
    CHECK(err <= budget);

    // convex data -> convex value function (discrete second differences)
    CHECK(f.min_second_difference() >= -1e-9);
}

TEST_CASE("comparison: raising g pointwise never lowers u") {
    auto prob = builtin("quadratic");
    const auto grid = SpaceTimeGrid::make(1, {-2}, {2}, 51, 40, 1.0, 4.0);
    const auto rho = trivial_flow(40, 1.0);
    const auto base = solve_hjb(prob, rho, grid);

    auto lifted = prob;
    lifted.terminal.eval = [](std::span<const double> x, const ParticleMeasure&) {
        return 0.5 * dot(x, x) + 0.3;
    };
    const auto up = solve_hjb(lifted, rho, grid);
    for (std::size_t i = 0; i < base.u.size(); ++i) CHECK(up.u[i] >= base.u[i] - 1e-12);

    // finiteness audit: bounded below on the box
    double umin = 1e300;
    for (double v : base.u) umin = std::min(umin, v);
    CHECK(umin >= -1e6);
}

TEST_CASE("monotone refinement: halving dx and dt does not raise the error") {
    const auto prob = builtin("quadratic");
    const auto rho_c = trivial_flow(50, 1.0);
    const auto rho_f = trivial_flow(100, 1.0);
    const auto coarse =
        solve_hjb(prob, rho_c, SpaceTimeGrid::make(1, {-2}, {2}, 51, 50, 1.0, 4.0));
    const auto fine =
        solve_hjb(prob, rho_f, SpaceTimeGrid::make(1, {-2}, {2}, 101, 100, 1.0, 4.0));
    const double e_coarse = max_error_vs_quadratic(coarse);
    const double e_fine = max_error_vs_quadratic(fine);
    INFO("coarse ", e_coarse, " fine ", e_fine);
    CHECK(e_fine <= 1.05 * e_coarse);
}

TEST_CASE("d=2 quadratic oracle") {
    const auto prob = builtin("quadratic", {{"dim", 2}});
    const std::size_t nx = 41, nt = 30;
    const auto grid = SpaceTimeGrid::make(2, {-2, -2}, {2, 2}, nx, nt, 1.0, 4.0);
    const auto rho = MeasureFlow::stationary(
        ParticleMeasure::from_samples({{0.0, 0.0}, {0.5, -0.5}}), nt, 1.0);
    const auto f = solve_hjb(prob, rho, grid);
    const double err = max_error_vs_quadratic(f);
    const double budget = 5.0 * (grid.dx(0) * grid.dx(0) + grid.dt());
    INFO("err = ", err, " budget = ", budget);
    CHECK(err <= budget);
}

TEST_CASE("DomainTooSmall when characteristics drain through a boundary") {
    auto prob = builtin("quadratic");
    // linear terminal cost drives every foot left by 3 dt
    prob.terminal.eval = [](std::span<const double> x, const ParticleMeasure&) {
        return 3.0 * x[0];
    };
    prob.terminal.grad_x = [](std::span<const double>, const ParticleMeasure&,
                              std::span<double> o) { o[0] = 3.0; };
    const auto grid = SpaceTimeGrid::make(1, {0}, {1}, 101, 40, 1.0, 6.0);
    const auto rho = MeasureFlow::stationary(ParticleMeasure::from_samples({{0.5}}), 40, 1.0);
    CHECK_THROWS_AS(solve_hjb(prob, rho, grid), DomainTooSmall);
}

TEST_CASE("audit_regularity: quadratic passes with |d2u| <= 1, injected spike fails") {
    const auto prob = builtin("quadratic");
    const std::size_t nt = 60;
    const auto grid = SpaceTimeGrid::make(1, {-2}, {2}, 81, nt, 1.0, 4.0);
    const auto rho = trivial_flow(nt, 1.0);
    auto f = solve_hjb(prob, rho, grid);

    const auto rep = audit_regularity(f, prob);
    CHECK(rep.pass);
    CHECK(rep.sup_d2u <= 1.02);           // closed form: 1/(1+T-t) <= 1
    CHECK(rep.sup_d2u >= 0.9);            // and reaches ~1 at t = T
    CHECK(rep.sup_du_ball <= 2.0 + 0.1);  // |du| = |x|/(1+T-t) <= 2 on the box

    // inject a discontinuity
    const std::size_t where = (nt / 2) * grid.num_nodes() + 17;
    f.d2u[where] = 50.0;
    const auto bad = audit_regularity(f, prob);
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst_time == nt / 2);
    CHECK(bad.worst_node == 17);
}

TEST_CASE("audit_regularity: lq_mean a=1 passes with |d2u| <= 1") {
    const auto prob = builtin("lq_mean", {{"a", 1.0}});
    const std::size_t nt = 60;
    const auto grid = SpaceTimeGrid::make(1, {-4}, {6}, 161, nt, 1.0, 8.0);
    const auto rho = MeasureFlow::stationary(
        ParticleMeasure::from_samples({{1.5}, {2.0}, {2.5}}), nt, 1.0);
    const auto f = solve_hjb(prob, rho, grid);
    const auto rep = audit_regularity(f, prob);
    // closed form (x - a m_T)^2 / (2 (1+T-t)): curvature <= 1, uniform in t
    CHECK(rep.pass);
    CHECK(rep.sup_d2u <= 1.02);
}

TEST_CASE("value field export writes slices and manifest") {
    namespace fs = std::filesystem;
    const auto prob = builtin("quadratic");
    const auto grid = SpaceTimeGrid::make(1, {-2}, {2}, 21, 4, 1.0, 4.0);
    const auto f = solve_hjb(prob, trivial_flow(4, 1.0), grid);
    const auto dir = (fs::temp_directory_path() / "mfgkit_value").string();
    save_value_field(f, dir);
    CHECK(fs::exists(dir + "/manifest.json"));
    CHECK(fs::exists(dir + "/u_0000.csv"));
    CHECK(fs::exists(dir + "/u_0004.csv"));
}
