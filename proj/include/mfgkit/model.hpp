#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mfgkit/measures.hpp"

namespace mfgkit {

using ScalarFn =
    std::function<double(std::span<const double>, std::span<const double>, const ParticleMeasure&)>;
using GradFn = std::function<void(std::span<const double>, std::span<const double>,
                                  const ParticleMeasure&, std::span<double>)>;

/// Running cost L(x, v, mu) with declared derivatives and constants.
/// c0 is the strict-convexity constant from D^2_vv L <= (1/c0) I; lip bounds
/// the Lipschitz constant of (grad_x, grad_v). Both are declared by the model
/// author and spot-audited by sampling, not proven.
struct LagrangianSpec {
    ScalarFn eval;
    GradFn grad_x;
    GradFn grad_v;
    double c0 = 0.0;
    double lip = 0.0;
};

/// Hamiltonian H(x, p, mu); c0 from D^2_pp H >= c0 I.
struct HamiltonianSpec {
    ScalarFn eval;
    GradFn grad_x;
    GradFn grad_p;
    double c0 = 0.0;
    double lip = 0.0;
};

struct TerminalCost {
    std::function<double(std::span<const double>, const ParticleMeasure&)> eval;
    std::function<void(std::span<const double>, const ParticleMeasure&, std::span<double>)> grad_x;
    double lip = 0.0;
};

/// Full deterministic MFG data bundle. H is the Legendre-Fenchel conjugate of
/// L in the velocity/momentum slot; the pairing is audited, not assumed.
struct MfgProblem {
    std::string name;
    LagrangianSpec lagrangian;
    HamiltonianSpec hamiltonian;
    TerminalCost terminal;
    double horizon = 1.0;
    double beta = 0.0;  // must stay 0 in this toolkit
    std::size_t dim = 1;
    /// A priori bound for |D^2_x u| used by the regularity audit.
    double c11_bound = 0.0;
};

struct LegendreResult {
    double value = 0.0;
    std::vector<double> argmax;
    int iterations = 0;
};

/// sup_v { p.v - L(x,v,mu) } with its unique maximizer, by damped Newton on
/// the gradient residual |p - D_vL(x,v,mu)| <= 1e-10 (max 200 iterations).
LegendreResult legendre(const LagrangianSpec& L, std::span<const double> x,
                        std::span<const double> p, const ParticleMeasure& mu);

/// Built-in model families addressable by name:
///   quadratic            L=|v|^2/2, H=|p|^2/2, g=|x|^2/2
///   lq_mean              quadratic with g(x,mu)=|x - a mean(mu)|^2/2, a in [0,1]
///   displacement_model   H = H0 + (C0/2)(|p|^2-|x|^2), bounded-derivative H0
///   convolution_terminal g(x,mu) = C|x|^2 + (phi*mu)(x), concave phi
MfgProblem builtin(const std::string& name, const std::map<std::string, double>& params = {});

struct GradientAuditReport {
    std::size_t samples = 0;
    double max_rel_deviation = 0.0;
    bool pass = false;
    std::string worst;  // which derivative / coordinate / inputs
};

/// Randomized finite-difference audit of every declared gradient in the
/// problem. Pass iff the worst relative deviation is <= 1e-5.
GradientAuditReport check_gradients(const MfgProblem& problem, std::size_t n_samples,
                                    std::uint64_t seed);

/// Max defect of H(x,p,mu) + L(x, D_pH(x,p,mu), mu) - p . D_pH(x,p,mu) over
/// random samples (the Legendre-Fenchel equality case).
double audit_duality(const MfgProblem& problem, std::size_t n_samples, std::uint64_t seed);

struct ConvexityAuditReport {
    double worst_l_midpoint = 0.0;  // max of L(mid) - (L(v1)+L(v2))/2; <= 0 when convex
    double worst_h_strong = 0.0;    // max of (c0/8)|p1-p2|^2 - midpoint defect of H
    bool pass = false;
};

/// Sampled midpoint checks of the declared convexity: v -> L(x,v,mu) convex,
/// p -> H(x,p,mu) c0-strongly convex.
ConvexityAuditReport audit_convexity(const MfgProblem& problem, std::size_t n_samples,
                                     std::uint64_t seed);

}  // namespace mfgkit
