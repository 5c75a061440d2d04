#include "mfgkit/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mfgkit/linalg.hpp"
#include "mfgkit/parallel.hpp"
#include "mfgkit/rng.hpp"

namespace mfgkit {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "inconclusive";
    }
}

std::string to_string(CouplingKind v) {
    switch (v) {
        case CouplingKind::optimal: return "optimal";
        case CouplingKind::index: return "index";
        case CouplingKind::random: return "random";
        default: return "stratified";
    }
}

double default_tol(std::size_t n, std::size_t trials) {
    return 1e-8 + 2.0 / std::sqrt(static_cast<double>(n) * static_cast<double>(trials));
}

namespace {

ParticleMeasure draw_cloud(const SamplerConfig& cfg, Rng& rng, double sd_lo, double sd_hi) {
    const std::size_t n = cfg.n, d = cfg.dim;
    if (cfg.generator == GeneratorKind::uniform) {
        std::vector<double> flat(n * d);
        for (double& x : flat) x = cfg.scale * rng.uniform(-2.0, 2.0);
        return ParticleMeasure::from_flat(std::move(flat), d);
    }
    // Gaussian mixture with 1..3 components.
    const std::size_t comps = 1 + rng.integer(3);
    std::vector<double> means(comps * d), sds(comps);
    for (double& m : means) m = cfg.scale * rng.uniform(-2.0, 2.0);
    for (double& s : sds) s = cfg.scale * rng.uniform(sd_lo, sd_hi);
    std::vector<double> flat(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.integer(comps);
        for (std::size_t k = 0; k < d; ++k)
            flat[i * d + k] = means[c * d + k] + sds[c] * rng.gaussian();
    }
    return ParticleMeasure::from_flat(std::move(flat), d);
}

// One coupled measure pair, stratified over the trial index.
void draw_measure_pair(const SamplerConfig& cfg, std::size_t trial, std::uint64_t seed,
                       MonotoneWitness& w) {
    Rng rng(derive_seed(seed, trial, 1));
    if (cfg.generator == GeneratorKind::csv) {
        const auto m1 = load_measure_csv(cfg.csv_mu1);
        const auto m2 = load_measure_csv(cfg.csv_mu2);
        if (m1.size() != m2.size() || m1.dim() != m2.dim())
            throw SizeMismatch("sampler csv measures must share n and dim");
        w.mu1.assign(m1.flat().begin(), m1.flat().end());
        w.mu2.assign(m2.flat().begin(), m2.flat().end());
        w.dim = m1.dim();
        return;
    }
    w.dim = cfg.dim;
    switch (trial % 4) {
        case 0: {  // independent draws
            auto m1 = draw_cloud(cfg, rng, 0.2, 1.2);
            auto m2 = draw_cloud(cfg, rng, 0.2, 1.2);
            w.mu1.assign(m1.flat().begin(), m1.flat().end());
            w.mu2.assign(m2.flat().begin(), m2.flat().end());
            break;
        }
        case 1: {  // independent draws, second recentered to the first's mean
            auto m1 = draw_cloud(cfg, rng, 0.2, 1.2);
            auto m2 = center_to_mean(draw_cloud(cfg, rng, 0.2, 1.2), m1.mean());
            w.mu1.assign(m1.flat().begin(), m1.flat().end());
            w.mu2.assign(m2.flat().begin(), m2.flat().end());
            break;
        }
        case 2: {  // affine image of the same cloud
            auto m1 = draw_cloud(cfg, rng, 0.2, 1.2);
            const double s = rng.uniform(0.5, 2.0);
            std::vector<double> shift(cfg.dim);
            for (double& c : shift) c = 0.3 * rng.gaussian();
            std::vector<double> mean(m1.mean().begin(), m1.mean().end());
            auto m2 = m1.pushforward([&](std::span<const double> x, std::span<double> out) {
                for (std::size_t k = 0; k < x.size(); ++k)
                    out[k] = mean[k] + s * (x[k] - mean[k]) + shift[k];
            });
            w.mu1.assign(m1.flat().begin(), m1.flat().end());
            w.mu2.assign(m2.flat().begin(), m2.flat().end());
            break;
        }
        default: {  // contrasting spreads around a shared mean
            std::vector<double> center(cfg.dim);
            for (double& c : center) c = cfg.scale * rng.uniform(-1.0, 1.0);
            auto m1 = sample_gaussian(cfg.n, cfg.dim, center, cfg.scale * rng.uniform(0.1, 0.3),
                                      derive_seed(seed, trial, 21));
            auto m2 = sample_gaussian(cfg.n, cfg.dim, center, cfg.scale * rng.uniform(1.5, 2.5),
                                      derive_seed(seed, trial, 22));
            m2 = center_to_mean(m2, m1.mean());
            w.mu1.assign(m1.flat().begin(), m1.flat().end());
            w.mu2.assign(m2.flat().begin(), m2.flat().end());
            break;
        }
    }
}

std::vector<std::size_t> draw_pairing(const SamplerConfig& cfg, std::size_t trial,
                                      std::uint64_t seed, const ParticleMeasure& m1,
                                      const ParticleMeasure& m2, std::string& label) {
    CouplingKind kind = cfg.coupling;
    if (kind == CouplingKind::stratified) {
        switch (trial % 3) {
            case 0: kind = CouplingKind::optimal; break;
            case 1: kind = CouplingKind::index; break;
            default: kind = CouplingKind::random; break;
        }
    }
    label = to_string(kind);
    const std::size_t n = m1.size();
    std::vector<std::size_t> sigma(n);
    std::iota(sigma.begin(), sigma.end(), 0);
    if (kind == CouplingKind::optimal) {
        sigma = optimal_coupling(m1, m2).pairing;
    } else if (kind == CouplingKind::random) {
        Rng rng(derive_seed(seed, trial, 2));
        for (std::size_t i = n; i > 1; --i) std::swap(sigma[i - 1], sigma[rng.integer(i)]);
    }
    return sigma;
}

// Draws the auxiliary pair (velocities or momenta). The equal-pair stratum
// realizes equality under the coupling: b[pairing[i]] = a[i].
void draw_vector_pair(std::size_t trial, std::uint64_t seed, std::uint64_t tag,
                      const std::vector<std::size_t>& pairing, std::size_t d,
                      std::vector<double>& a, std::vector<double>& b) {
    Rng rng(derive_seed(seed, trial, tag));
    const std::size_t n = pairing.size();
    const double scale = rng.uniform(0.5, 2.0);
    a.resize(n * d);
    b.resize(n * d);
    for (double& x : a) x = scale * rng.gaussian();
    if (trial % 3 == 0) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k) b[pairing[i] * d + k] = a[i * d + k];
    } else {
        for (double& x : b) x = scale * rng.gaussian();
    }
}

struct TrialValue {
    double value = 0.0;
    MonotoneWitness witness;
};

template <typename DrawExtras, typename Evaluate>
MonotonicityReport run_trials(const std::string& kind, const SamplerConfig& cfg,
                              std::size_t trials, std::uint64_t seed, bool needs_pairing,
                              DrawExtras&& draw_extras, Evaluate&& evaluate) {
    if (trials < 1) throw ParamOutOfRange("monotonicity check: trials must be >= 1");
    std::vector<TrialValue> results(trials);
    parallel_for(trials, [&](std::size_t t) {
        MonotoneWitness w;
        w.trial = t;
        draw_measure_pair(cfg, t, seed, w);
        const auto m1 = ParticleMeasure::from_flat(w.mu1, w.dim);
        const auto m2 = ParticleMeasure::from_flat(w.mu2, w.dim);
        if (needs_pairing) {
            w.pairing = draw_pairing(cfg, t, seed, m1, m2, w.coupling);
        }
        draw_extras(t, w);
        results[t].value = evaluate(w);
        results[t].witness = std::move(w);
    });
    std::size_t arg = 0;
    for (std::size_t t = 1; t < trials; ++t)
        if (results[t].value < results[arg].value) arg = t;

    MonotonicityReport report;
    report.kind = kind;
    report.trials = trials;
    report.min_pairing = results[arg].value;
    const std::size_t n_actual =
        results[arg].witness.mu1.size() / results[arg].witness.dim;  // csv may differ from cfg.n
    report.tol = default_tol(n_actual, trials);
    if (report.min_pairing >= -report.tol)
        report.verdict = Verdict::pass;
    else if (report.min_pairing < -10.0 * report.tol)
        report.verdict = Verdict::fail;
    else
        report.verdict = Verdict::inconclusive;
    report.witness = std::move(results[arg].witness);
    report.note = "coupling strata: " + to_string(cfg.coupling) +
                  "; measure strata cycle independent/mean-matched/affine/contrast";
    return report;
}

}  // namespace

double reevaluate_displacement_g(const TerminalCost& g, const MonotoneWitness& w) {
    const auto m1 = ParticleMeasure::from_flat(w.mu1, w.dim);
    const auto m2 = ParticleMeasure::from_flat(w.mu2, w.dim);
    const std::size_t n = m1.size(), d = w.dim;
    std::vector<double> g1(d), g2(d);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x1 = m1.point(i);
        const auto x2 = m2.point(w.pairing[i]);
        g.grad_x(x1, m1, g1);
        g.grad_x(x2, m2, g2);
        for (std::size_t k = 0; k < d; ++k) acc += (g1[k] - g2[k]) * (x1[k] - x2[k]);
    }
    return acc / static_cast<double>(n);
}

double reevaluate_lasry_lions(const TerminalCost& g, const MonotoneWitness& w) {
    const auto m1 = ParticleMeasure::from_flat(w.mu1, w.dim);
    const auto m2 = ParticleMeasure::from_flat(w.mu2, w.dim);
    const std::size_t n = m1.size();
    // Grouped per particle so a mu-free g cancels to exactly 0 in floating
    // point; the pairing drops out of the sum (each term is a marginal mean).
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += g.eval(m1.point(i), m1) - g.eval(m1.point(i), m2);
        acc += g.eval(m2.point(i), m2) - g.eval(m2.point(i), m1);
    }
    return acc / static_cast<double>(n);
}

double reevaluate_displacement_L(const LagrangianSpec& L, const MonotoneWitness& w) {
    const auto m1 = ParticleMeasure::from_flat(w.mu1, w.dim);
    const auto m2 = ParticleMeasure::from_flat(w.mu2, w.dim);
    const std::size_t n = m1.size(), d = w.dim;
    std::vector<double> a(d), b(d);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x1 = m1.point(i);
        const auto x2 = m2.point(w.pairing[i]);
        const std::span<const double> z1{w.z1.data() + i * d, d};
        const std::span<const double> z2{w.z2.data() + w.pairing[i] * d, d};
        L.grad_x(x1, z1, m1, a);
        L.grad_x(x2, z2, m2, b);
        for (std::size_t k = 0; k < d; ++k) acc += (a[k] - b[k]) * (x1[k] - x2[k]);
        L.grad_v(x1, z1, m1, a);
        L.grad_v(x2, z2, m2, b);
        for (std::size_t k = 0; k < d; ++k) acc += (a[k] - b[k]) * (z1[k] - z2[k]);
    }
    return acc / static_cast<double>(n);
}

double reevaluate_displacement_H(const HamiltonianSpec& H, const MonotoneWitness& w) {
    const auto m1 = ParticleMeasure::from_flat(w.mu1, w.dim);
    const auto m2 = ParticleMeasure::from_flat(w.mu2, w.dim);
    const std::size_t n = m1.size(), d = w.dim;
    std::vector<double> a(d), b(d);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x1 = m1.point(i);
        const auto x2 = m2.point(w.pairing[i]);
        const std::span<const double> p1{w.p1.data() + i * d, d};
        const std::span<const double> p2{w.p2.data() + w.pairing[i] * d, d};
        H.grad_x(x1, p1, m1, a);
        H.grad_x(x2, p2, m2, b);
        for (std::size_t k = 0; k < d; ++k) acc += (-a[k] + b[k]) * (x1[k] - x2[k]);
        H.grad_p(x1, p1, m1, a);
        H.grad_p(x2, p2, m2, b);
        for (std::size_t k = 0; k < d; ++k) acc += (a[k] - b[k]) * (p1[k] - p2[k]);
    }
    return acc / static_cast<double>(n);
}

double reevaluate_second_order(const HamiltonianSpec& H, const MonotoneWitness& w) {
    const auto mu = ParticleMeasure::from_flat(w.mu1, w.dim);
    const std::size_t n = mu.size(), d = w.dim;
    const double h = 1e-4;       // coordinate step for xx/pp Hessians
    const double hmu = 1e-4;     // particle perturbation for measure derivatives

    // A_i = E-tilde[ D^2_pmu H dX~ ], B_i = E-tilde[ D^2_xmu H dX~ ], via
    // perturb-one-particle differences rescaled by n/h; the 1/n of the
    // empirical E-tilde cancels the n.
    std::vector<double> A(n * d, 0.0), B(n * d, 0.0);
    std::vector<double> gp(d), gm(d);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
            const double dxt = w.dx_tilde[j * d + k];
            if (dxt == 0.0) continue;
            const auto mup = mu.perturb_point(j, k, hmu);
            const auto mum = mu.perturb_point(j, k, -hmu);
            for (std::size_t i = 0; i < n; ++i) {
                const auto xi = mu.point(i);
                const std::span<const double> pi{w.momenta.data() + i * d, d};
                H.grad_p(xi, pi, mup, gp);
                H.grad_p(xi, pi, mum, gm);
                for (std::size_t r = 0; r < d; ++r)
                    A[i * d + r] += (gp[r] - gm[r]) / (2.0 * hmu) * dxt;
                H.grad_x(xi, pi, mup, gp);
                H.grad_x(xi, pi, mum, gm);
                for (std::size_t r = 0; r < d; ++r)
                    B[i * d + r] += (gp[r] - gm[r]) / (2.0 * hmu) * dxt;
            }
        }
    }

    double quad = 0.0;   // E |[D^2_pp H]^{-1/2} A|^2
    double cross = 0.0;  // E [ <B, dX> + <D^2_xx H dX, dX> ]
    std::vector<double> xs(d), hess(d * d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = mu.point(i);
        const std::span<const double> pi{w.momenta.data() + i * d, d};
        const std::span<const double> dxi{w.dx.data() + i * d, d};

        // D^2_pp H
        std::vector<double> pp(pi.begin(), pi.end());
        for (std::size_t k = 0; k < d; ++k) {
            pp[k] = pi[k] + h;
            H.grad_p(xi, pp, mu, gp);
            pp[k] = pi[k] - h;
            H.grad_p(xi, pp, mu, gm);
            pp[k] = pi[k];
            for (std::size_t r = 0; r < d; ++r) hess[r * d + k] = (gp[r] - gm[r]) / (2.0 * h);
        }
        if (sym_eig_min(hess, d) <= 1e-10)
            throw SingularHessian("check_second_order: D^2_pp H not positive definite at sample " +
                                  std::to_string(i));
        quad += inv_quadratic_form(hess, {A.begin() + static_cast<long>(i * d),
                                          A.begin() + static_cast<long>((i + 1) * d)});

        for (std::size_t k = 0; k < d; ++k) cross += B[i * d + k] * dxi[k];

        // D^2_xx H
        xs.assign(xi.begin(), xi.end());
        for (std::size_t k = 0; k < d; ++k) {
            xs[k] = xi[k] + h;
            H.grad_x(xs, pi, mu, gp);
            xs[k] = xi[k] - h;
            H.grad_x(xs, pi, mu, gm);
            xs[k] = xi[k];
            for (std::size_t r = 0; r < d; ++r) hess[r * d + k] = (gp[r] - gm[r]) / (2.0 * h);
        }
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) cross += hess[r * d + c] * dxi[c] * dxi[r];
    }
    const double nn = static_cast<double>(n);
    return -0.25 * quad / nn - cross / nn;
}

MonotonicityReport check_displacement_g(const TerminalCost& g, const SamplerConfig& cfg,
                                        std::size_t trials, std::uint64_t seed) {
    return run_trials(
        "displacement_g", cfg, trials, seed, true, [](std::size_t, MonotoneWitness&) {},
        [&](const MonotoneWitness& w) { return reevaluate_displacement_g(g, w); });
}

MonotonicityReport check_lasry_lions(const TerminalCost& g, const SamplerConfig& cfg,
                                     std::size_t trials, std::uint64_t seed) {
    return run_trials(
        "lasry_lions", cfg, trials, seed, true, [](std::size_t, MonotoneWitness&) {},
        [&](const MonotoneWitness& w) { return reevaluate_lasry_lions(g, w); });
}

MonotonicityReport check_displacement_L(const LagrangianSpec& L, const SamplerConfig& cfg,
                                        std::size_t trials, std::uint64_t seed) {
    return run_trials(
        "displacement_L", cfg, trials, seed, true,
        [&](std::size_t t, MonotoneWitness& w) {
            draw_vector_pair(t, seed, 31, w.pairing, w.dim, w.z1, w.z2);
        },
        [&](const MonotoneWitness& w) { return reevaluate_displacement_L(L, w); });
}

MonotonicityReport check_displacement_H(const HamiltonianSpec& H, const SamplerConfig& cfg,
                                        std::size_t trials, std::uint64_t seed) {
    return run_trials(
        "displacement_H", cfg, trials, seed, true,
        [&](std::size_t t, MonotoneWitness& w) {
            draw_vector_pair(t, seed, 32, w.pairing, w.dim, w.p1, w.p2);
        },
        [&](const MonotoneWitness& w) { return reevaluate_displacement_H(H, w); });
}

MonotonicityReport check_second_order(const HamiltonianSpec& H, const SamplerConfig& cfg,
                                      std::size_t trials, std::uint64_t seed) {
    return run_trials(
        "second_order", cfg, trials, seed, false,
        [&](std::size_t t, MonotoneWitness& w) {
            Rng rng(derive_seed(seed, t, 33));
            const std::size_t d = w.dim;
            const std::size_t n = w.mu1.size() / d;  // csv inputs may differ from cfg.n
            w.momenta.resize(n * d);
            w.dx.resize(n * d);
            w.dx_tilde.resize(n * d);
            const double pscale = rng.uniform(0.5, 2.0);
            for (double& x : w.momenta) x = pscale * rng.gaussian();
            const double dscale = rng.uniform(0.5, 1.5);
            for (double& x : w.dx) x = dscale * rng.gaussian();
            for (double& x : w.dx_tilde) x = dscale * rng.gaussian();
        },
        [&](const MonotoneWitness& w) { return reevaluate_second_order(H, w); });
}

void save_witness_csv(const MonotoneWitness& w, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.precision(17);
    const std::size_t d = w.dim;
    const std::size_t n = w.mu1.size() / d;
    auto emit_header = [&](const std::string& base) {
        for (std::size_t k = 0; k < d; ++k) f << "," << base << k;
    };
    f << "i";
    emit_header("mu1_x");
    emit_header("mu2_x");
    if (!w.pairing.empty()) f << ",pair";
    if (!w.z1.empty()) {
        emit_header("z1_");
        emit_header("z2_");
    }
    if (!w.p1.empty()) {
        emit_header("p1_");
        emit_header("p2_");
    }
    if (!w.momenta.empty()) {
        emit_header("P");
        emit_header("dx");
        emit_header("dxt");
    }
    f << "\n";
    auto emit_row = [&](const std::vector<double>& v, std::size_t i) {
        for (std::size_t k = 0; k < d; ++k) f << "," << v[i * d + k];
    };
    for (std::size_t i = 0; i < n; ++i) {
        f << i;
        emit_row(w.mu1, i);
        emit_row(w.mu2, i);
        if (!w.pairing.empty()) f << "," << w.pairing[i];
        if (!w.z1.empty()) {
            emit_row(w.z1, i);
            emit_row(w.z2, i);
        }
        if (!w.p1.empty()) {
            emit_row(w.p1, i);
            emit_row(w.p2, i);
        }
        if (!w.momenta.empty()) {
            emit_row(w.momenta, i);
            emit_row(w.dx, i);
            emit_row(w.dx_tilde, i);
        }
        f << "\n";
    }
}

}  // namespace mfgkit
