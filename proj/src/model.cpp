#include "mfgkit/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mfgkit/linalg.hpp"
#include "mfgkit/rng.hpp"

namespace mfgkit {

namespace {

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& params,
                    std::initializer_list<const char*> known) {
    for (const auto& [key, value] : params) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ParamOutOfRange("unknown model parameter: " + key);
    }
}

double sum(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); }

LagrangianSpec quadratic_lagrangian() {
    LagrangianSpec L;
    L.eval = [](std::span<const double>, std::span<const double> v, const ParticleMeasure&) {
        return 0.5 * dot(v, v);
    };
    L.grad_x = [](std::span<const double>, std::span<const double>, const ParticleMeasure&,
                  std::span<double> out) {
        for (double& o : out) o = 0.0;
    };
    L.grad_v = [](std::span<const double>, std::span<const double> v, const ParticleMeasure&,
                  std::span<double> out) {
        for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k];
    };
    L.c0 = 1.0;
    L.lip = 1.0;
    return L;
}

HamiltonianSpec quadratic_hamiltonian() {
    HamiltonianSpec H;
    H.eval = [](std::span<const double>, std::span<const double> p, const ParticleMeasure&) {
        return 0.5 * dot(p, p);
    };
    H.grad_x = [](std::span<const double>, std::span<const double>, const ParticleMeasure&,
                  std::span<double> out) {
        for (double& o : out) o = 0.0;
    };
    H.grad_p = [](std::span<const double>, std::span<const double> p, const ParticleMeasure&,
                  std::span<double> out) {
        for (std::size_t k = 0; k < p.size(); ++k) out[k] = p[k];
    };
    H.c0 = 1.0;
    H.lip = 1.0;
    return H;
}

// D^2_pp H at (x,p,mu) by centered differences of grad_p. Row-major d x d.
std::vector<double> hess_pp(const HamiltonianSpec& H, std::span<const double> x,
                            std::span<const double> p, const ParticleMeasure& mu) {
    const std::size_t d = p.size();
    const double h = 1e-6;
    std::vector<double> hess(d * d);
    std::vector<double> pp(p.begin(), p.end());
    std::vector<double> gp(d), gm(d);
    for (std::size_t k = 0; k < d; ++k) {
        pp[k] = p[k] + h;
        H.grad_p(x, pp, mu, gp);
        pp[k] = p[k] - h;
        H.grad_p(x, pp, mu, gm);
        pp[k] = p[k];
        for (std::size_t r = 0; r < d; ++r) hess[r * d + k] = (gp[r] - gm[r]) / (2.0 * h);
    }
    return hess;
}

// Legendre conjugate of a strongly convex Hamiltonian, exposed as a
// LagrangianSpec. Each evaluation solves sup_p { p.v - H(x,p,mu) } by damped
// Newton. Envelope theorem: D_vL = p*, D_xL = -D_xH(x, p*, mu).
LagrangianSpec conjugate_of_hamiltonian(HamiltonianSpec H, double c0_H, double lip_H) {
    auto argmax_p = [H](std::span<const double> x, std::span<const double> v,
                        const ParticleMeasure& mu) {
        const std::size_t d = v.size();
        std::vector<double> p(d, 0.0), grad(d), trial(d), gtrial(d);
        H.grad_p(x, p, mu, grad);
        double res = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            grad[k] = v[k] - grad[k];
            res += grad[k] * grad[k];
        }
        res = std::sqrt(res);
        for (int iter = 0; iter < 200; ++iter) {
            if (res <= 1e-11) return p;
            std::vector<double> J = hess_pp(H, x, p, mu);
            std::vector<double> step = grad;
            solve_linear(J, step);  // D^2_pp H step = v - D_pH
            double s = 1.0;
            for (int bt = 0; bt < 40; ++bt, s *= 0.5) {
                for (std::size_t k = 0; k < d; ++k) trial[k] = p[k] + s * step[k];
                H.grad_p(x, trial, mu, gtrial);
                double rnew = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    gtrial[k] = v[k] - gtrial[k];
                    rnew += gtrial[k] * gtrial[k];
                }
                rnew = std::sqrt(rnew);
                if (rnew < res || rnew <= 1e-11) {
                    p = trial;
                    grad = gtrial;
                    res = rnew;
                    break;
                }
            }
        }
        throw NoConvergence("hamiltonian conjugate: Newton stalled, residual " +
                            std::to_string(res));
    };

    LagrangianSpec L;
    L.eval = [H, argmax_p](std::span<const double> x, std::span<const double> v,
                           const ParticleMeasure& mu) {
        const auto p = argmax_p(x, v, mu);
        return dot(p, v) - H.eval(x, p, mu);
    };
    L.grad_v = [argmax_p](std::span<const double> x, std::span<const double> v,
                          const ParticleMeasure& mu, std::span<double> out) {
        const auto p = argmax_p(x, v, mu);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = p[k];
    };
    L.grad_x = [H, argmax_p](std::span<const double> x, std::span<const double> v,
                             const ParticleMeasure& mu, std::span<double> out) {
        const auto p = argmax_p(x, v, mu);
        H.grad_x(x, p, mu, out);
        for (double& o : out) o = -o;
    };
    L.c0 = c0_H;
    L.lip = lip_H;
    return L;
}

MfgProblem make_quadratic(const std::map<std::string, double>& params) {
    reject_unknown(params, {"dim", "T"});
    MfgProblem prob;
    prob.name = "quadratic";
    prob.dim = static_cast<std::size_t>(get_param(params, "dim", 1));
    prob.horizon = get_param(params, "T", 1.0);
    prob.lagrangian = quadratic_lagrangian();
    prob.hamiltonian = quadratic_hamiltonian();
    prob.terminal.eval = [](std::span<const double> x, const ParticleMeasure&) {
        return 0.5 * dot(x, x);
    };
    prob.terminal.grad_x = [](std::span<const double> x, const ParticleMeasure&,
                              std::span<double> out) {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k];
    };
    prob.terminal.lip = 1.0;
    prob.c11_bound = 1.0;
    return prob;
}

MfgProblem make_lq_mean(const std::map<std::string, double>& params) {
    reject_unknown(params, {"a", "dim", "T"});
    const double a = get_param(params, "a", 0.5);
    if (a < 0.0 || a > 1.0)
        throw ParamOutOfRange("lq_mean: a must lie in [0,1], got " + std::to_string(a));
    MfgProblem prob;
    prob.name = "lq_mean";
    prob.dim = static_cast<std::size_t>(get_param(params, "dim", 1));
    prob.horizon = get_param(params, "T", 1.0);
    prob.lagrangian = quadratic_lagrangian();
    prob.hamiltonian = quadratic_hamiltonian();
    prob.terminal.eval = [a](std::span<const double> x, const ParticleMeasure& mu) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double z = x[k] - a * mu.mean()[k];
            s += z * z;
        }
        return 0.5 * s;
    };
    prob.terminal.grad_x = [a](std::span<const double> x, const ParticleMeasure& mu,
                               std::span<double> out) {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] - a * mu.mean()[k];
    };
    prob.terminal.lip = 1.0 + a;
    prob.c11_bound = 1.0;
    return prob;
}

MfgProblem make_displacement_model(const std::map<std::string, double>& params) {
    reject_unknown(params, {"C0", "eps", "g_scale", "dim", "T"});
    const double C0 = get_param(params, "C0", 1.0);
    const double eps = get_param(params, "eps", 0.1);
    const double g_scale = get_param(params, "g_scale", 1.0);
    const auto dim = static_cast<std::size_t>(get_param(params, "dim", 1));
    if (C0 <= 0.0) throw ParamOutOfRange("displacement_model: C0 must be > 0");
    if (eps < 0.0 || eps * static_cast<double>(dim) >= C0)
        throw ParamOutOfRange("displacement_model: need 0 <= eps*dim < C0, got eps = " +
                              std::to_string(eps));
    if (g_scale < 0.0) throw ParamOutOfRange("displacement_model: g_scale must be >= 0");

    // H0(x,p,mu) = eps cos(sum x) sin(sum p) damp(mu), damp in (0,1); every
    // mixed derivative of H0 up to second order is bounded by eps.
    auto damp = [](const ParticleMeasure& mu) { return 0.5 * (1.0 + std::tanh(mu.mean_sum())); };

    MfgProblem prob;
    prob.name = "displacement_model";
    prob.dim = dim;
    prob.horizon = get_param(params, "T", 1.0);

    HamiltonianSpec H;
    H.eval = [C0, eps, damp](std::span<const double> x, std::span<const double> p,
                             const ParticleMeasure& mu) {
        return eps * std::cos(sum(x)) * std::sin(sum(p)) * damp(mu) +
               0.5 * C0 * (dot(p, p) - dot(x, x));
    };
    H.grad_x = [C0, eps, damp](std::span<const double> x, std::span<const double> p,
                               const ParticleMeasure& mu, std::span<double> out) {
        const double w = -eps * std::sin(sum(x)) * std::sin(sum(p)) * damp(mu);
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = w - C0 * x[k];
    };
    H.grad_p = [C0, eps, damp](std::span<const double> x, std::span<const double> p,
                               const ParticleMeasure& mu, std::span<double> out) {
        const double w = eps * std::cos(sum(x)) * std::cos(sum(p)) * damp(mu);
        for (std::size_t k = 0; k < p.size(); ++k) out[k] = w + C0 * p[k];
    };
    H.c0 = C0 - eps * static_cast<double>(dim);
    H.lip = C0 + eps * static_cast<double>(dim);
    prob.hamiltonian = H;
    prob.lagrangian = conjugate_of_hamiltonian(H, H.c0, H.lip);

    prob.terminal.eval = [g_scale](std::span<const double> x, const ParticleMeasure&) {
        return 0.5 * g_scale * dot(x, x);
    };
    prob.terminal.grad_x = [g_scale](std::span<const double> x, const ParticleMeasure&,
                                     std::span<double> out) {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = g_scale * x[k];
    };
    prob.terminal.lip = g_scale;
    prob.c11_bound = std::max(g_scale, C0) + 3.0 * eps + 0.1;
    return prob;
}

MfgProblem make_convolution_terminal(const std::map<std::string, double>& params) {
    reject_unknown(params, {"C", "c", "wave", "dim", "T"});
    const double C = get_param(params, "C", 1.0);
    const double c = get_param(params, "c", 0.5 * C);
    const auto dim = static_cast<std::size_t>(get_param(params, "dim", 1));
    const double dd = static_cast<double>(dim);
    const double wave = get_param(params, "wave", std::min(c, C - c) / (2.0 * dd));
    if (C <= 0.0) throw ParamOutOfRange("convolution_terminal: C must be > 0");
    if (c <= 0.0 || c > C)
        throw ParamOutOfRange("convolution_terminal: need 0 < c <= C, got c = " +
                              std::to_string(c));
    // Keep -C I <= D^2 phi < 0: eigenvalues of D^2 phi lie in
    // [-c - wave*d, -c + wave*d].
    if (wave < 0.0 || wave * dd >= c || c + wave * dd > C + 1e-12)
        throw ParamOutOfRange("convolution_terminal: need 0 <= wave*dim < c and c + wave*dim <= C");

    MfgProblem prob;
    prob.name = "convolution_terminal";
    prob.dim = dim;
    prob.horizon = get_param(params, "T", 1.0);
    prob.lagrangian = quadratic_lagrangian();
    prob.hamiltonian = quadratic_hamiltonian();

    // phi(z) = -(c/2)|z|^2 - wave cos(k.z), k = (1,..,1).
    prob.terminal.eval = [C, c, wave](std::span<const double> x, const ParticleMeasure& mu) {
        double conv = 0.0;
        for (std::size_t j = 0; j < mu.size(); ++j) {
            const auto y = mu.point(j);
            double d2 = 0.0, kz = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double z = x[k] - y[k];
                d2 += z * z;
                kz += z;
            }
            conv += -0.5 * c * d2 - wave * std::cos(kz);
        }
        return C * dot(x, x) + conv / static_cast<double>(mu.size());
    };
    prob.terminal.grad_x = [C, c, wave](std::span<const double> x, const ParticleMeasure& mu,
                                        std::span<double> out) {
        const std::size_t d = x.size();
        double wsum = 0.0;
        for (std::size_t j = 0; j < mu.size(); ++j) {
            const auto y = mu.point(j);
            double kz = 0.0;
            for (std::size_t k = 0; k < d; ++k) kz += x[k] - y[k];
            wsum += std::sin(kz);
        }
        wsum *= wave / static_cast<double>(mu.size());
        for (std::size_t k = 0; k < d; ++k)
            out[k] = 2.0 * C * x[k] - c * (x[k] - mu.mean()[k]) + wsum;
    };
    prob.terminal.lip = 2.0 * C + 2.0 * c + wave * dd;
    prob.c11_bound = 2.0 * C - c + wave * dd + 0.1;
    return prob;
}

}  // namespace

LegendreResult legendre(const LagrangianSpec& L, std::span<const double> x,
                        std::span<const double> p, const ParticleMeasure& mu) {
    if (L.c0 <= 0.0) throw ParamOutOfRange("legendre: Lagrangian must declare c0 > 0");
    const std::size_t d = p.size();
    LegendreResult res;
    std::vector<double> v(d, 0.0), grad(d), trial(d), gtrial(d);

    auto residual = [&](const std::vector<double>& vv, std::vector<double>& g) {
        L.grad_v(x, vv, mu, g);
        double r = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            g[k] = p[k] - g[k];
            r += g[k] * g[k];
        }
        return std::sqrt(r);
    };

    double r = residual(v, grad);
    const double h = 1e-6;
    std::vector<double> J(d * d), gp(d), gm(d);
    for (res.iterations = 0; res.iterations < 200; ++res.iterations) {
        if (r <= 1e-10) {
            res.value = dot(p, v) - L.eval(x, v, mu);
            res.argmax = v;
            return res;
        }
        for (std::size_t k = 0; k < d; ++k) {  // J = D^2_vv L by centered differences
            trial = v;
            trial[k] += h;
            L.grad_v(x, trial, mu, gp);
            trial[k] -= 2.0 * h;
            L.grad_v(x, trial, mu, gm);
            for (std::size_t rr = 0; rr < d; ++rr) J[rr * d + k] = (gp[rr] - gm[rr]) / (2.0 * h);
        }
        if (sym_eig_min(J, d) <= 0.0)
            throw NoConvergence("legendre: D^2_vv L is not positive definite; L is not "
                                "strictly convex in v");
        std::vector<double> Jcopy = J;
        std::vector<double> step = grad;
        solve_linear(Jcopy, step);
        double s = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt, s *= 0.5) {
            for (std::size_t k = 0; k < d; ++k) trial[k] = v[k] + s * step[k];
            const double rnew = residual(trial, gtrial);
            if (rnew < r || rnew <= 1e-10) {
                v = trial;
                grad = gtrial;
                r = rnew;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    throw NoConvergence("legendre: no convergence after " + std::to_string(res.iterations) +
                        " iterations (residual " + std::to_string(r) +
                        "); is L strictly convex in v?");
}

MfgProblem builtin(const std::string& name, const std::map<std::string, double>& params) {
    if (name == "quadratic") return make_quadratic(params);
    if (name == "lq_mean") return make_lq_mean(params);
    if (name == "displacement_model") return make_displacement_model(params);
    if (name == "convolution_terminal") return make_convolution_terminal(params);
    throw UnknownModel("unknown builtin model: " + name);
}

namespace {

// Max relative deviation between a declared gradient and the centered finite
// difference of `value` in the direction slot selected by `which` (0: first
// argument, 1: second argument).
struct FdProbe {
    double worst = 0.0;
    std::string what;
};

void fd_check(FdProbe& probe, const std::string& label, const ScalarFn& value, const GradFn& grad,
              int which, std::span<const double> x, std::span<const double> y,
              const ParticleMeasure& mu) {
    const double h = 1e-5;
    const std::size_t d = x.size();
    std::vector<double> g(d);
    grad(x, y, mu, g);
    std::vector<double> xa(x.begin(), x.end()), ya(y.begin(), y.end());
    for (std::size_t k = 0; k < d; ++k) {
        auto& slot = which == 0 ? xa : ya;
        const double keep = slot[k];
        slot[k] = keep + h;
        const double fp = value(xa, ya, mu);
        slot[k] = keep - h;
        const double fm = value(xa, ya, mu);
        slot[k] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double dev = std::fabs(fd - g[k]) / std::max(1.0, std::fabs(g[k]));
        if (dev > probe.worst) {
            probe.worst = dev;
            std::ostringstream os;
            os << label << " coord " << k << ": declared " << g[k] << " vs fd " << fd;
            probe.what = os.str();
        }
    }
}

}  // namespace

GradientAuditReport check_gradients(const MfgProblem& problem, std::size_t n_samples,
                                    std::uint64_t seed) {
    if (n_samples < 1) throw ParamOutOfRange("check_gradients: n_samples must be >= 1");
    const std::size_t d = problem.dim;
    FdProbe probe;
    for (std::size_t s = 0; s < n_samples; ++s) {
        Rng rng(derive_seed(seed, s));
        std::vector<double> x(d), v(d), p(d), center(d);
        for (auto& c : x) c = 1.5 * rng.gaussian();
        for (auto& c : v) c = 1.5 * rng.gaussian();
        for (auto& c : p) c = 1.5 * rng.gaussian();
        for (auto& c : center) c = rng.gaussian();
        const auto mu =
            sample_gaussian(16, d, center, 0.3 + rng.uniform(), derive_seed(seed, s, 77));

        fd_check(probe, "L.grad_x", problem.lagrangian.eval, problem.lagrangian.grad_x, 0, x, v,
                 mu);
        fd_check(probe, "L.grad_v", problem.lagrangian.eval, problem.lagrangian.grad_v, 1, x, v,
                 mu);
        fd_check(probe, "H.grad_x", problem.hamiltonian.eval, problem.hamiltonian.grad_x, 0, x, p,
                 mu);
        fd_check(probe, "H.grad_p", problem.hamiltonian.eval, problem.hamiltonian.grad_p, 1, x, p,
                 mu);
        // Terminal cost, lifted to the two-slot signature with a dummy slot.
        ScalarFn gval = [&](std::span<const double> xx, std::span<const double>,
                            const ParticleMeasure& m) { return problem.terminal.eval(xx, m); };
        GradFn ggrad = [&](std::span<const double> xx, std::span<const double>,
                           const ParticleMeasure& m, std::span<double> out) {
            problem.terminal.grad_x(xx, m, out);
        };
        fd_check(probe, "g.grad_x", gval, ggrad, 0, x, v, mu);
    }
    GradientAuditReport report;
    report.samples = n_samples;
    report.max_rel_deviation = probe.worst;
    report.worst = probe.what;
    report.pass = probe.worst <= 1e-5;
    return report;
}

ConvexityAuditReport audit_convexity(const MfgProblem& problem, std::size_t n_samples,
                                     std::uint64_t seed) {
    const std::size_t d = problem.dim;
    ConvexityAuditReport rep;
    std::vector<double> x(d), a(d), b(d), mid(d), center(d);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Rng rng(derive_seed(seed, s, 9));
        for (auto& c : x) c = 1.5 * rng.gaussian();
        for (auto& c : a) c = 2.0 * rng.gaussian();
        for (auto& c : b) c = 2.0 * rng.gaussian();
        for (auto& c : center) c = rng.gaussian();
        for (std::size_t k = 0; k < d; ++k) mid[k] = 0.5 * (a[k] + b[k]);
        const auto mu =
            sample_gaussian(16, d, center, 0.3 + rng.uniform(), derive_seed(seed, s, 79));

        const double l_mid = problem.lagrangian.eval(x, mid, mu) -
                             0.5 * (problem.lagrangian.eval(x, a, mu) +
                                    problem.lagrangian.eval(x, b, mu));
        rep.worst_l_midpoint = std::max(rep.worst_l_midpoint, l_mid);

        double gap2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) gap2 += (a[k] - b[k]) * (a[k] - b[k]);
        const double h_defect = 0.5 * (problem.hamiltonian.eval(x, a, mu) +
                                       problem.hamiltonian.eval(x, b, mu)) -
                                problem.hamiltonian.eval(x, mid, mu);
        rep.worst_h_strong =
            std::max(rep.worst_h_strong, problem.hamiltonian.c0 / 8.0 * gap2 - h_defect);
    }
    rep.pass = rep.worst_l_midpoint <= 1e-9 && rep.worst_h_strong <= 1e-9;
    return rep;
}

double audit_duality(const MfgProblem& problem, std::size_t n_samples, std::uint64_t seed) {
    const std::size_t d = problem.dim;
    double worst = 0.0;
    std::vector<double> x(d), p(d), v(d), center(d);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Rng rng(derive_seed(seed, s, 5));
        for (auto& c : x) c = 1.5 * rng.gaussian();
        for (auto& c : p) c = 1.5 * rng.gaussian();
        for (auto& c : center) c = rng.gaussian();
        const auto mu =
            sample_gaussian(16, d, center, 0.3 + rng.uniform(), derive_seed(seed, s, 78));
        problem.hamiltonian.grad_p(x, p, mu, v);
        const double defect = problem.hamiltonian.eval(x, p, mu) +
                              problem.lagrangian.eval(x, v, mu) - dot(p, v);
        worst = std::max(worst, std::fabs(defect));
    }
    return worst;
}

}  // namespace mfgkit
