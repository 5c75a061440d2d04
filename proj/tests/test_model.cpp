#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfgkit/linalg.hpp"
#include "mfgkit/model.hpp"
#include "mfgkit/rng.hpp"

using namespace mfgkit;

namespace {

ParticleMeasure cloud(std::size_t n, std::size_t d, double center, std::uint64_t seed) {
    std::vector<double> mean(d, center);
    return sample_gaussian(n, d, mean, 0.7, seed);
}

}  // namespace

TEST_CASE("legendre: quadratic is self-dual") {
    const auto prob = builtin("quadratic");
    const auto mu = cloud(8, 1, 0.0, 1);
    const std::vector<double> x = {0.3}, p = {1.7};
    const auto res = legendre(prob.lagrangian, x, p, mu);
    CHECK(res.value == doctest::Approx(0.5 * 1.7 * 1.7).epsilon(1e-10));
    CHECK(res.argmax[0] == doctest::Approx(1.7).epsilon(1e-10));
}

TEST_CASE("legendre: scaled quadratic, analytic conjugate c|p|^2/2") {
    // L = |v|^2 / (2c), c = 2 -> L* (p) = c|p|^2/2; at p=1: value 1, argmax 2
    LagrangianSpec L;
    const double c = 2.0;
    L.eval = [c](std::span<const double>, std::span<const double> v, const ParticleMeasure&) {
        return dot(v, v) / (2.0 * c);
    };
    L.grad_x = [](std::span<const double>, std::span<const double>, const ParticleMeasure&,
                  std::span<double> o) { o[0] = 0.0; };
    L.grad_v = [c](std::span<const double>, std::span<const double> v, const ParticleMeasure&,
                   std::span<double> o) { o[0] = v[0] / c; };
    L.c0 = 1.0 / c;
    const auto mu = cloud(4, 1, 0.0, 2);
    const auto res = legendre(L, std::vector<double>{0.0}, std::vector<double>{1.0}, mu);
    CHECK(res.value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(res.argmax[0] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("legendre: v-independent term only shifts the value") {
    // L = |v|^2/2 + x m(mu): conjugate at p is |p|^2/2 - x m(mu), argmax p
    LagrangianSpec L;
    L.eval = [](std::span<const double> x, std::span<const double> v, const ParticleMeasure& mu) {
        return 0.5 * dot(v, v) + x[0] * mu.mean()[0];
    };
    L.grad_x = [](std::span<const double>, std::span<const double>, const ParticleMeasure& mu,
                  std::span<double> o) { o[0] = mu.mean()[0]; };
    L.grad_v = [](std::span<const double>, std::span<const double> v, const ParticleMeasure&,
                  std::span<double> o) { o[0] = v[0]; };
    L.c0 = 1.0;
    const auto mu = cloud(16, 1, 1.3, 3);
    const double x0 = 0.8;
    const auto res = legendre(L, std::vector<double>{x0}, std::vector<double>{3.0}, mu);
    CHECK(res.value == doctest::Approx(4.5 - x0 * mu.mean()[0]).epsilon(1e-10));
    CHECK(res.argmax[0] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("legendre rejects nonconvex L") {
    LagrangianSpec L;
    L.eval = [](std::span<const double>, std::span<const double> v, const ParticleMeasure&) {
        return -0.5 * dot(v, v);
    };
    L.grad_x = [](std::span<const double>, std::span<const double>, const ParticleMeasure&,
                  std::span<double> o) { o[0] = 0.0; };
    L.grad_v = [](std::span<const double>, std::span<const double> v, const ParticleMeasure&,
                  std::span<double> o) { o[0] = -v[0]; };
    L.c0 = 1.0;  // lies about convexity; Newton must report NoConvergence
    const auto mu = cloud(4, 1, 0.0, 4);
    CHECK_THROWS_AS(legendre(L, std::vector<double>{0.0}, std::vector<double>{1.0}, mu),
                    NoConvergence);
}

TEST_CASE("builtin quadratic values") {
    const auto prob = builtin("quadratic");
    const auto mu = cloud(8, 1, 0.5, 5);
    CHECK(prob.hamiltonian.eval(std::vector<double>{0.4}, std::vector<double>{2.0}, mu) ==
          doctest::Approx(2.0));
    CHECK(prob.beta == 0.0);
    CHECK(prob.dim == 1);
}

TEST_CASE("builtin lq_mean terminal cost") {
    const auto prob = builtin("lq_mean", {{"a", 1.0}});
    // measure with mean exactly 1
    const auto mu = ParticleMeasure::from_samples({{0.5}, {1.5}});
    CHECK(prob.terminal.eval(std::vector<double>{1.0}, mu) == doctest::Approx(0.0));
    CHECK_THROWS_AS(builtin("lq_mean", {{"a", 1.5}}), ParamOutOfRange);
}

TEST_CASE("builtin validation") {
    CHECK_THROWS_AS(builtin("nope"), UnknownModel);
    CHECK_THROWS_AS(builtin("convolution_terminal", {{"C", 1.0}, {"c", 2.0}}), ParamOutOfRange);
    CHECK_THROWS_AS(builtin("displacement_model", {{"C0", 1.0}, {"eps", 1.0}}), ParamOutOfRange);
    CHECK_THROWS_AS(builtin("quadratic", {{"bogus", 1.0}}), ParamOutOfRange);
}

TEST_CASE("check_gradients: builtins pass, corrupted gradient fails with witness") {
    for (const char* name : {"quadratic", "lq_mean", "convolution_terminal"}) {
        const auto prob = builtin(name);
        const auto rep = check_gradients(prob, 50, 99);
        INFO(name, ": ", rep.worst);
        CHECK(rep.pass);
    }
    const auto rep = check_gradients(builtin("quadratic"), 50, 99);
    CHECK(rep.max_rel_deviation <= 1e-9);  // polynomial data

    auto bad = builtin("quadratic");
    bad.terminal.grad_x = [](std::span<const double> x, const ParticleMeasure&,
                             std::span<double> o) {
        for (std::size_t k = 0; k < x.size(); ++k) o[k] = -x[k];  // deliberately negated
    };
    const auto rep_bad = check_gradients(bad, 20, 99);
    CHECK_FALSE(rep_bad.pass);
    CHECK(rep_bad.worst.find("g.grad_x") != std::string::npos);
}

TEST_CASE("check_gradients: displacement_model with many samples") {
    const auto prob = builtin("displacement_model", {{"C0", 1.0}, {"eps", 0.1}});
    const auto rep = check_gradients(prob, 1000, 7);
    INFO(rep.worst);
    CHECK(rep.pass);
}

TEST_CASE("duality round trips for every builtin") {
    for (const char* name :
         {"quadratic", "lq_mean", "convolution_terminal", "displacement_model"}) {
        const auto prob = builtin(name);
        CHECK(audit_duality(prob, 40, 11) <= 1e-6);

        // legendre(L) reproduces H, D_vL inverts D_pH, D_xH = -D_xL(., D_pH, .)
        double worst_value = 0.0, worst_inv = 0.0, worst_dx = 0.0;
        for (std::uint64_t s = 0; s < 15; ++s) {
            Rng rng(derive_seed(1000, s));
            std::vector<double> x = {1.5 * rng.gaussian()}, p = {1.5 * rng.gaussian()};
            const auto mu = cloud(12, 1, rng.gaussian(), derive_seed(1001, s));
            const auto leg = legendre(prob.lagrangian, x, p, mu);
            worst_value = std::max(
                worst_value, std::fabs(leg.value - prob.hamiltonian.eval(x, p, mu)));
            std::vector<double> v(1), back(1), dxh(1), dxl(1);
            prob.hamiltonian.grad_p(x, p, mu, v);
            prob.lagrangian.grad_v(x, v, mu, back);
            worst_inv = std::max(worst_inv, std::fabs(back[0] - p[0]));
            prob.hamiltonian.grad_x(x, p, mu, dxh);
            prob.lagrangian.grad_x(x, v, mu, dxl);
            worst_dx = std::max(worst_dx, std::fabs(dxh[0] + dxl[0]));
        }
        INFO(name);
        CHECK(worst_value <= 1e-8);
        CHECK(worst_inv <= 1e-8);
        CHECK(worst_dx <= 1e-8);
    }
}

TEST_CASE("convexity audits: L midpoint-convex, H strongly convex") {
    for (const char* name :
         {"quadratic", "lq_mean", "convolution_terminal", "displacement_model"}) {
        const auto rep = audit_convexity(builtin(name), 60, 17);
        INFO(name, " worst_l=", rep.worst_l_midpoint, " worst_h=", rep.worst_h_strong);
        CHECK(rep.pass);
    }
}

TEST_CASE("convolution_terminal gradient structure") {
    // with wave = 0 the gradient has the closed form 2Cx - c(x - mean)
    const auto prob = builtin("convolution_terminal", {{"C", 1.0}, {"c", 0.5}, {"wave", 0.0}});
    const auto mu = cloud(32, 1, 0.8, 21);
    std::vector<double> g(1);
    const double x = 1.7;
    prob.terminal.grad_x(std::vector<double>{x}, mu, g);
    CHECK(g[0] == doctest::Approx(2.0 * x - 0.5 * (x - mu.mean()[0])).epsilon(1e-12));
}
