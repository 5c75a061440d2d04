#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfgkit/measures.hpp"
#include "mfgkit/model.hpp"

namespace mfgkit {

enum class CouplingKind { optimal, index, random, stratified };
enum class GeneratorKind { gaussian_mixture, uniform, csv };

/// How coupled sample pairs are drawn for the monotonicity checkers. Trials
/// are stratified deterministically from the seed: measure pairs cycle
/// through independent draws, mean-matched draws, affine copies and
/// contrasting-spread pairs, while `stratified` coupling cycles
/// optimal/index/random permutations.
struct SamplerConfig {
    std::size_t n = 128;
    std::size_t dim = 1;
    GeneratorKind generator = GeneratorKind::gaussian_mixture;
    CouplingKind coupling = CouplingKind::stratified;
    double scale = 1.0;
    std::string csv_mu1;
    std::string csv_mu2;
};

enum class Verdict { pass, fail, inconclusive };

std::string to_string(Verdict v);
std::string to_string(CouplingKind v);

/// The sampled configuration achieving the minimum pairing value. Carries
/// everything needed to re-evaluate the defining expectation bit-for-bit.
struct MonotoneWitness {
    std::size_t trial = 0;
    std::size_t dim = 1;
    std::string coupling;
    std::vector<double> mu1, mu2;    // flat n x d point clouds
    std::vector<std::size_t> pairing;
    std::vector<double> z1, z2;      // velocity pairs (displacement_L)
    std::vector<double> p1, p2;      // momentum pairs (displacement_H)
    std::vector<double> momenta;     // P samples (second_order)
    std::vector<double> dx, dx_tilde;  // perturbations (second_order)
};

struct MonotonicityReport {
    std::string kind;
    std::size_t trials = 0;
    double min_pairing = 0.0;
    double tol = 0.0;
    Verdict verdict = Verdict::inconclusive;
    MonotoneWitness witness;
    std::string note;
};

double default_tol(std::size_t n, std::size_t trials);

MonotonicityReport check_displacement_g(const TerminalCost& g, const SamplerConfig& cfg,
                                        std::size_t trials, std::uint64_t seed);
MonotonicityReport check_lasry_lions(const TerminalCost& g, const SamplerConfig& cfg,
                                     std::size_t trials, std::uint64_t seed);
MonotonicityReport check_displacement_L(const LagrangianSpec& L, const SamplerConfig& cfg,
                                        std::size_t trials, std::uint64_t seed);
MonotonicityReport check_displacement_H(const HamiltonianSpec& H, const SamplerConfig& cfg,
                                        std::size_t trials, std::uint64_t seed);
MonotonicityReport check_second_order(const HamiltonianSpec& H, const SamplerConfig& cfg,
                                      std::size_t trials, std::uint64_t seed);

// Witness re-evaluation (same code path as the checkers; used by the
// invariant that the stored witness reproduces min_pairing).
double reevaluate_displacement_g(const TerminalCost& g, const MonotoneWitness& w);
double reevaluate_lasry_lions(const TerminalCost& g, const MonotoneWitness& w);
double reevaluate_displacement_L(const LagrangianSpec& L, const MonotoneWitness& w);
double reevaluate_displacement_H(const HamiltonianSpec& H, const MonotoneWitness& w);
double reevaluate_second_order(const HamiltonianSpec& H, const MonotoneWitness& w);

void save_witness_csv(const MonotoneWitness& w, const std::string& path);

}  // namespace mfgkit
