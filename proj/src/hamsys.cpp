#include "mfgkit/hamsys.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mfgkit/integrate.hpp"
#include "mfgkit/linalg.hpp"
#include "mfgkit/rng.hpp"

namespace mfgkit {

std::span<const double> CharacteristicPath::x_at(std::size_t k) const {
    const std::size_t d = X.size() / times.size();
    return {X.data() + k * d, d};
}
std::span<const double> CharacteristicPath::y_at(std::size_t k) const {
    const std::size_t d = Y.size() / times.size();
    return {Y.data() + k * d, d};
}

namespace {

// The coupled (X, Y) system as one flat state fed to the shared RK4 stepper;
// `sign` +1 integrates forward mapping slice k -> k+1, -1 backward.
CharacteristicPath integrate(const MfgProblem& problem, const MeasureFlow& rho,
                             std::span<const double> x0, std::span<const double> y0, int sign) {
    const std::size_t d = problem.dim;
    const std::size_t nt = rho.steps();
    const double dt = rho.dt() * sign;

    CharacteristicPath path;
    path.times = rho.times();
    path.X.assign((nt + 1) * d, 0.0);
    path.Y.assign((nt + 1) * d, 0.0);

    double state[4];  // (X, Y)
    for (std::size_t c = 0; c < d; ++c) {
        state[c] = x0[c];
        state[d + c] = y0[c];
    }
    const std::size_t start = sign > 0 ? 0 : nt;
    for (std::size_t c = 0; c < d; ++c) {
        path.X[start * d + c] = state[c];
        path.Y[start * d + c] = state[d + c];
    }

    auto rhs = [&](double t, const double* s, double* out) {
        const ParticleMeasure& mu = rho.nearest(t);
        problem.hamiltonian.grad_p({s, d}, {s + d, d}, mu, {out, d});
        problem.hamiltonian.grad_x({s, d}, {s + d, d}, mu, {out + d, d});
        for (std::size_t c = 0; c < d; ++c) out[d + c] = -out[d + c];
    };

    for (std::size_t s = 0; s < nt; ++s) {
        const std::size_t k = sign > 0 ? s : nt - s;
        rk4_step<4>(rhs, rho.times()[k], dt, state, 2 * d);
        for (std::size_t c = 0; c < 2 * d; ++c)
            if (!std::isfinite(state[c]))
                throw BlowUp("characteristic integration produced a non-finite state");
        const std::size_t knext = sign > 0 ? k + 1 : k - 1;
        for (std::size_t c = 0; c < d; ++c) {
            path.X[knext * d + c] = state[c];
            path.Y[knext * d + c] = state[d + c];
        }
    }
    return path;
}

double terminal_residual(const MfgProblem& problem, const MeasureFlow& rho,
                         const CharacteristicPath& path, std::span<double> out) {
    const std::size_t d = problem.dim;
    const std::size_t nt = rho.steps();
    double grad[2];
    problem.terminal.grad_x(path.x_at(nt), rho.terminal(), {grad, d});
    double r2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        out[c] = path.Y[nt * d + c] + grad[c];
        r2 += out[c] * out[c];
    }
    return std::sqrt(r2);
}

}  // namespace

CharacteristicPath integrate_characteristic(const MfgProblem& problem, const MeasureFlow& rho,
                                            std::span<const double> x0,
                                            std::span<const double> y0) {
    return integrate(problem, rho, x0, y0, +1);
}

CharacteristicPath integrate_characteristic_backward(const MfgProblem& problem,
                                                     const MeasureFlow& rho,
                                                     std::span<const double> xT,
                                                     std::span<const double> yT) {
    return integrate(problem, rho, xT, yT, -1);
}

CharacteristicPath shoot(const MfgProblem& problem, const MeasureFlow& rho,
                         std::span<const double> x0, double tol) {
    if (tol <= 0.0) throw ParamOutOfRange("shoot: tol must be > 0");
    const std::size_t d = problem.dim;

    // Initial costate guess: terminal gradient at x0, tempered by the horizon.
    std::vector<double> y0(d);
    problem.terminal.grad_x(x0, rho.terminal(), y0);
    for (double& c : y0) c = -c / (1.0 + problem.horizon);

    std::vector<double> res(d), res_trial(d), ytrial(d);
    CharacteristicPath path = integrate(problem, rho, x0, y0, +1);
    double rnorm = terminal_residual(problem, rho, path, res);

    const double fd_h = 1e-6;
    for (std::size_t iter = 0; iter < 100; ++iter) {
        if (rnorm <= tol) {
            path.residual = rnorm;
            path.newton_iterations = iter;
            return path;
        }
        // Finite-difference Jacobian of the shooting map.
        std::vector<double> J(d * d);
        for (std::size_t c = 0; c < d; ++c) {
            ytrial = y0;
            ytrial[c] += fd_h;
            auto probe = integrate(problem, rho, x0, ytrial, +1);
            terminal_residual(problem, rho, probe, res_trial);
            for (std::size_t r = 0; r < d; ++r)
                J[r * d + c] = (res_trial[r] - res[r]) / fd_h;
        }
        std::vector<double> step = res;
        solve_linear(J, step);
        double s = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt, s *= 0.5) {
            for (std::size_t c = 0; c < d; ++c) ytrial[c] = y0[c] - s * step[c];
            auto probe = integrate(problem, rho, x0, ytrial, +1);
            const double rn = terminal_residual(problem, rho, probe, res_trial);
            if (rn < rnorm || rn <= tol) {
                y0 = ytrial;
                path = std::move(probe);
                res = res_trial;
                rnorm = rn;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    throw ShootingDiverged("shoot: terminal residual " + std::to_string(rnorm) +
                           " did not reach tol " + std::to_string(tol));
}

ConsistencyReport consistency_check(const MfgProblem& problem, const MfgSolution& solution,
                                    std::size_t n_probe, std::uint64_t seed) {
    ConsistencyReport rep;
    const auto& grid = solution.value.grid;
    rep.tolerance = 10.0 * (grid.max_dx() + grid.dt());
    if (n_probe == 0) return rep;  // vacuous pass

    const auto& rho0 = solution.flow.initial();
    const std::size_t d = problem.dim;
    const std::size_t nt = solution.flow.steps();
    Rng rng(derive_seed(seed, 404));

    double du[2];
    for (std::size_t p = 0; p < n_probe; ++p) {
        const std::size_t idx = rng.integer(rho0.size());
        const auto x0 = rho0.point(idx);
        const auto path = shoot(problem, solution.flow, x0, 1e-9);
        double worst = 0.0;
        for (std::size_t k = 0; k <= nt; ++k) {
            solution.value.interp_du(path.times[k], path.x_at(k), {du, d});
            double defect2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double e = path.Y[k * d + c] + du[c];
                defect2 += e * e;
            }
            worst = std::max(worst, std::sqrt(defect2));
        }
        if (worst > rep.max_defect) {
            rep.max_defect = worst;
            rep.worst_x0.assign(x0.begin(), x0.end());
        }
        ++rep.probes;
    }
    rep.pass = rep.max_defect <= rep.tolerance;
    return rep;
}

void save_path_csv(const CharacteristicPath& path, std::size_t dim, const std::string& file) {
    std::ofstream f(file);
    if (!f) throw IoError("cannot open for writing: " + file);
    f.precision(17);
    f << "t";
    for (std::size_t c = 0; c < dim; ++c) f << ",X" << c;
    for (std::size_t c = 0; c < dim; ++c) f << ",Y" << c;
    f << "\n";
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        f << path.times[k];
        for (std::size_t c = 0; c < dim; ++c) f << "," << path.X[k * dim + c];
        for (std::size_t c = 0; c < dim; ++c) f << "," << path.Y[k * dim + c];
        f << "\n";
    }
}

}  // namespace mfgkit
