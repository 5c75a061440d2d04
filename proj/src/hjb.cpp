#include "mfgkit/hjb.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mfgkit/linalg.hpp"
#include "mfgkit/parallel.hpp"

#include "json.hpp"

namespace mfgkit {

std::span<const double> ValueField::u_slice(std::size_t k) const {
    const std::size_t N = grid.num_nodes();
    return {u.data() + k * N, N};
}
std::span<const double> ValueField::du_slice(std::size_t k) const {
    const std::size_t N = grid.num_nodes() * grid.dim;
    return {du.data() + k * N, N};
}
std::span<const double> ValueField::d2u_slice(std::size_t k) const {
    const std::size_t N = grid.num_nodes() * grid.dim;
    return {d2u.data() + k * N, N};
}

double ValueField::interp_u(std::size_t k, std::span<const double> x, bool* clamped) const {
    return grid.interpolate(u_slice(k), x, clamped);
}

void ValueField::interp_du(double t, std::span<const double> x, std::span<double> out,
                           bool* clamped) const {
    const double dt = grid.dt();
    double pos = t / dt;
    pos = std::clamp(pos, 0.0, static_cast<double>(grid.nt));
    auto k = static_cast<std::size_t>(pos);
    if (k >= grid.nt) k = grid.nt - 1;
    const double theta = pos - static_cast<double>(k);
    double tmp[2];
    grid.interpolate_vec(du_slice(k), x, {tmp, grid.dim}, clamped);
    if (theta == 0.0) {
        for (std::size_t c = 0; c < grid.dim; ++c) out[c] = tmp[c];
        return;
    }
    double tmp2[2];
    grid.interpolate_vec(du_slice(k + 1), x, {tmp2, grid.dim}, clamped);
    for (std::size_t c = 0; c < grid.dim; ++c) out[c] = (1.0 - theta) * tmp[c] + theta * tmp2[c];
}

double ValueField::min_second_difference() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : d2u) m = std::min(m, v);
    return m;
}

double ValueField::max_abs_second_difference() const {
    double m = 0.0;
    for (double v : d2u) m = std::max(m, std::fabs(v));
    return m;
}

double estimate_velocity_scale(const MfgProblem& problem, const SpaceTimeGrid& grid,
                               const ParticleMeasure& rho_terminal) {
    const std::size_t d = grid.dim;
    const std::size_t N = grid.num_nodes();
    const std::size_t stride = std::max<std::size_t>(1, N / 512);
    std::vector<double> x(d), p(d), v(d);
    double scale = 1e-3;
    for (std::size_t j = 0; j < N; j += stride) {
        grid.node_coords(j, x);
        problem.terminal.grad_x(x, rho_terminal, p);
        for (double& c : p) c = -c;
        problem.hamiltonian.grad_p(x, p, rho_terminal, v);
        scale = std::max(scale, norm2(v));
    }
    return scale;
}

double estimate_velocity_scale(const MfgProblem& problem, const ParticleMeasure& rho0) {
    const std::size_t d = rho0.dim();
    std::vector<double> p(d), v(d);
    double scale = 1e-3;
    for (std::size_t i = 0; i < rho0.size(); ++i) {
        const auto x = rho0.point(i);
        problem.terminal.grad_x(x, rho0, p);
        for (double& c : p) c = -c;
        problem.hamiltonian.grad_p(x, p, rho0, v);
        scale = std::max(scale, norm2(v));
    }
    return scale;
}

std::pair<std::vector<double>, std::vector<double>> auto_bounds(const ParticleMeasure& rho0,
                                                                double c_v, double horizon,
                                                                std::size_t nx) {
    const std::size_t d = rho0.dim();
    std::vector<double> lo(d), hi(d);
    const double grow = std::exp(c_v * horizon);
    for (std::size_t a = 0; a < d; ++a) {
        double plo = rho0.point(0)[a], phi = plo;
        for (std::size_t i = 1; i < rho0.size(); ++i) {
            plo = std::min(plo, rho0.point(i)[a]);
            phi = std::max(phi, rho0.point(i)[a]);
        }
        const double r0 = std::max(std::fabs(plo), std::fabs(phi));
        const double half = (r0 + c_v * horizon) * grow;
        const double center = 0.5 * (plo + phi);
        lo[a] = std::min(center - half, plo);
        hi[a] = std::max(center + half, phi);
        const double cell = (hi[a] - lo[a]) / static_cast<double>(nx - 1);
        lo[a] -= 2.0 * cell;
        hi[a] += 2.0 * cell;
    }
    return {lo, hi};
}

namespace {

constexpr double kGolden = 0.6180339887498948482;

// Golden-section refinement of phi on [lo, hi] (unimodal on the bracket).
// Returns the refined minimizer; the first strictly-smaller value wins, so
// exact ties resolve toward the left (lexicographically smallest action).
template <typename F>
double golden_min(const F& phi, double lo, double hi, double tol) {
    double a = lo, b = hi;
    double c = b - kGolden * (b - a);
    double d = a + kGolden * (b - a);
    double fc = phi(c), fd = phi(d);
    int guard = 0;
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kGolden * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kGolden * (b - a);
            fd = phi(d);
        }
        if (++guard > 200)
            throw NonConvergentLineSearch("golden section exceeded 200 iterations");
    }
    return 0.5 * (a + b);
}

}  // namespace

ValueField solve_hjb(const MfgProblem& problem, const MeasureFlow& rho, const SpaceTimeGrid& grid,
                     const HjbOptions& options) {
    if (problem.beta != 0.0)
        throw ParamOutOfRange("solve_hjb: beta must be 0 in this toolkit");
    if (grid.dim != problem.dim)
        throw DimensionMismatch("solve_hjb: grid dim and problem dim disagree");
    if (rho.steps() != grid.nt)
        throw SizeMismatch("solve_hjb: measure flow must live on the grid's time steps (" +
                           std::to_string(rho.steps()) + " vs " + std::to_string(grid.nt) + ")");
    if (std::fabs(rho.horizon() - grid.horizon) > 1e-9 * std::max(1.0, grid.horizon))
        throw SizeMismatch("solve_hjb: flow horizon and grid horizon disagree");

    const std::size_t d = grid.dim;
    const std::size_t N = grid.num_nodes();
    const std::size_t nt = grid.nt;
    const double dt = grid.dt();

    const double c_v = estimate_velocity_scale(problem, grid, rho.terminal());
    const double a_max = options.a_max_override > 0.0 ? options.a_max_override : 2.0 * c_v;

    ValueField field;
    field.grid = grid;
    field.u.assign((nt + 1) * N, 0.0);
    field.du.assign((nt + 1) * N * d, 0.0);
    field.d2u.assign((nt + 1) * N * d, 0.0);

    // Terminal condition, exact at nodes.
    {
        const ParticleMeasure& rhoT = rho.terminal();
        std::vector<double> x(d);
        for (std::size_t j = 0; j < N; ++j) {
            grid.node_coords(j, x);
            field.u[nt * N + j] = problem.terminal.eval(x, rhoT);
        }
    }

    const std::size_t ncoarse = d == 1 ? options.coarse_actions
                                       : std::max<std::size_t>(9, options.coarse_actions / 2);
    std::atomic<long> clamped_feet{0};

    for (std::size_t k = nt; k-- > 0;) {
        const ParticleMeasure& rho_k = rho.at(k);
        const std::span<const double> next{field.u.data() + (k + 1) * N, N};
        parallel_for(N, [&](std::size_t j) {
            double xbuf[2], abuf[2], foot[2];
            const std::span<double> x{xbuf, d};
            const std::span<double> a{abuf, d};
            grid.node_coords(j, x);

            auto objective = [&](std::span<const double> action) {
                for (std::size_t c = 0; c < d; ++c) foot[c] = xbuf[c] + dt * action[c];
                return dt * problem.lagrangian.eval(x, action, rho_k) +
                       grid.interpolate(next, {foot, d});
            };

            // Coarse sweep in lexicographic order; strict < keeps the first
            // (smallest) minimizer among ties.
            const double step = 2.0 * a_max / static_cast<double>(ncoarse - 1);
            double best = std::numeric_limits<double>::infinity();
            double besta[2] = {0.0, 0.0};
            double cand[2] = {0.0, 0.0};
            if (d == 1) {
                for (std::size_t i = 0; i < ncoarse; ++i) {
                    cand[0] = -a_max + step * static_cast<double>(i);
                    const double v = objective({cand, 1});
                    if (v < best) {
                        best = v;
                        besta[0] = cand[0];
                    }
                }
            } else {
                for (std::size_t i1 = 0; i1 < ncoarse; ++i1) {
                    cand[1] = -a_max + step * static_cast<double>(i1);
                    for (std::size_t i0 = 0; i0 < ncoarse; ++i0) {
                        cand[0] = -a_max + step * static_cast<double>(i0);
                        const double v = objective({cand, 2});
                        if (v < best) {
                            best = v;
                            besta[0] = cand[0];
                            besta[1] = cand[1];
                        }
                    }
                }
            }

            // Golden-section refinement per axis (two sweeps in d=2).
            a[0] = besta[0];
            if (d == 2) a[1] = besta[1];
            const int rounds = d == 1 ? 1 : 2;
            for (int r = 0; r < rounds; ++r) {
                for (std::size_t axis = 0; axis < d; ++axis) {
                    const double center = a[axis];
                    const double lo = std::max(-a_max, center - step);
                    const double hi = std::min(a_max, center + step);
                    a[axis] = golden_min(
                        [&](double t) {
                            a[axis] = t;
                            return objective(a);
                        },
                        lo, hi, options.action_tol);
                }
            }
            bool clamp = false;
            for (std::size_t c = 0; c < d; ++c) {
                foot[c] = xbuf[c] + dt * a[c];
                clamp = clamp || foot[c] < grid.lo[c] || foot[c] > grid.hi[c];
            }
            if (clamp) clamped_feet.fetch_add(1, std::memory_order_relaxed);
            field.u[k * N + j] = objective(a);
        });
    }

    const auto total_updates = static_cast<double>(nt) * static_cast<double>(N);
    if (static_cast<double>(clamped_feet.load()) > options.domain_clamp_fraction * total_updates)
        throw DomainTooSmall("solve_hjb: refined minimizer foot left the domain on " +
                             std::to_string(clamped_feet.load()) + " of " +
                             std::to_string(static_cast<long>(total_updates)) +
                             " node updates (> " +
                             std::to_string(100.0 * options.domain_clamp_fraction) + "%)");

    for (double v : field.u)
        if (!std::isfinite(v)) throw NonFiniteCoordinate("solve_hjb: non-finite value in u");

    // Discrete derivatives. Second differences at the boundary reuse the
    // adjacent interior stencil.
    parallel_for(nt + 1, [&](std::size_t k) {
        const double* uk = field.u.data() + k * N;
        double* duk = field.du.data() + k * N * d;
        double* d2k = field.d2u.data() + k * N * d;
        for (std::size_t j = 0; j < N; ++j) {
            std::size_t idx = j;
            std::size_t stride = 1;
            for (std::size_t a = 0; a < d; ++a) {
                const std::size_t ia = idx % grid.nx;
                idx /= grid.nx;
                const double h = grid.dx(a);
                double g, s;
                if (ia == 0) {
                    g = (uk[j + stride] - uk[j]) / h;
                    s = (uk[j] - 2.0 * uk[j + stride] + uk[j + 2 * stride]) / (h * h);
                } else if (ia == grid.nx - 1) {
                    g = (uk[j] - uk[j - stride]) / h;
                    s = (uk[j] - 2.0 * uk[j - stride] + uk[j - 2 * stride]) / (h * h);
                } else {
                    g = (uk[j + stride] - uk[j - stride]) / (2.0 * h);
                    s = (uk[j + stride] - 2.0 * uk[j] + uk[j - stride]) / (h * h);
                }
                duk[j * d + a] = g;
                d2k[j * d + a] = s;
                stride *= grid.nx;
            }
        }
    });
    return field;
}

RegularityReport audit_regularity(const ValueField& field, const MfgProblem& problem) {
    const auto& grid = field.grid;
    const std::size_t d = grid.dim, N = grid.num_nodes(), nt = grid.nt;
    RegularityReport rep;
    rep.declared_bound = problem.c11_bound;

    double min_half = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < d; ++a) min_half = std::min(min_half, 0.5 * (grid.hi[a] - grid.lo[a]));
    rep.ball_radius = 0.5 * min_half;

    std::vector<double> x(d);
    std::vector<double> slice_sup(nt + 1, 0.0);
    for (std::size_t k = 0; k <= nt; ++k) {
        for (std::size_t j = 0; j < N; ++j) {
            grid.node_coords(j, x);
            double r2 = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                const double c = 0.5 * (grid.lo[a] + grid.hi[a]);
                r2 += (x[a] - c) * (x[a] - c);
            }
            double dunorm = 0.0, d2max = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                dunorm += field.du[(k * N + j) * d + a] * field.du[(k * N + j) * d + a];
                d2max = std::max(d2max, std::fabs(field.d2u[(k * N + j) * d + a]));
            }
            if (r2 <= rep.ball_radius * rep.ball_radius)
                rep.sup_du_ball = std::max(rep.sup_du_ball, std::sqrt(dunorm));
            if (d2max > rep.sup_d2u) {
                rep.sup_d2u = d2max;
                rep.worst_time = k;
                rep.worst_node = j;
            }
            slice_sup[k] = std::max(slice_sup[k], d2max);
        }
    }
    const double dt = grid.dt();
    for (std::size_t k = 0; k < nt; ++k) {
        for (std::size_t j = 0; j < N; ++j) {
            rep.sup_dt_u = std::max(
                rep.sup_dt_u, std::fabs(field.u[(k + 1) * N + j] - field.u[k * N + j]) / dt);
            for (std::size_t a = 0; a < d; ++a)
                rep.sup_dt_du = std::max(rep.sup_dt_du,
                                         std::fabs(field.du[((k + 1) * N + j) * d + a] -
                                                   field.du[(k * N + j) * d + a]) /
                                             dt);
        }
    }
    std::vector<double> sorted = slice_sup;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    rep.time_variation_ratio = median > 0.0 ? rep.sup_d2u / median : 1.0;
    rep.pass = rep.sup_d2u <= 1.02 * rep.declared_bound + 1e-12;
    return rep;
}

void save_value_field(const ValueField& field, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& grid = field.grid;
    const std::size_t d = grid.dim, N = grid.num_nodes();
    nlohmann::json manifest;
    manifest["T"] = grid.horizon;
    manifest["nt"] = grid.nt;
    manifest["nx"] = grid.nx;
    manifest["dim"] = d;
    manifest["bounds"] = nlohmann::json::array();
    for (std::size_t a = 0; a < d; ++a)
        manifest["bounds"].push_back({grid.lo[a], grid.hi[a]});
    std::ofstream mf(dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";

    std::vector<double> x(d);
    for (std::size_t k = 0; k <= grid.nt; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "/u_%04zu.csv", k);
        std::ofstream f(dir + name);
        f.precision(17);
        for (std::size_t a = 0; a < d; ++a) f << "x" << a << ",";
        f << "u";
        for (std::size_t a = 0; a < d; ++a) f << ",du" << a;
        for (std::size_t a = 0; a < d; ++a) f << ",d2u" << a;
        f << "\n";
        for (std::size_t j = 0; j < N; ++j) {
            grid.node_coords(j, x);
            for (std::size_t a = 0; a < d; ++a) f << x[a] << ",";
            f << field.u[k * N + j];
            for (std::size_t a = 0; a < d; ++a) f << "," << field.du[(k * N + j) * d + a];
            for (std::size_t a = 0; a < d; ++a) f << "," << field.d2u[(k * N + j) * d + a];
            f << "\n";
        }
    }
}

}  // namespace mfgkit
