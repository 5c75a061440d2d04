#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfgkit/errors.hpp"

namespace mfgkit {

/// Empirical probability measure: n uniformly weighted points in R^d.
/// Immutable after construction; mean and second moment are precomputed so
/// model closures can read measure statistics at O(1) cost.
class ParticleMeasure {
   public:
    static ParticleMeasure from_samples(const std::vector<std::vector<double>>& points);
    // Flat row-major constructor (n x d).
    static ParticleMeasure from_flat(std::vector<double> data, std::size_t dim);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return dim_; }

    std::span<const double> point(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<const double> flat() const { return data_; }

    std::span<const double> mean() const { return mean_; }
    double mean_sum() const { return mean_sum_; }
    double moment2() const { return moment2_; }
    double max_radius() const { return max_radius_; }

    /// Pointwise image measure under `map`, order preserved.
    ParticleMeasure pushforward(
        const std::function<void(std::span<const double>, std::span<double>)>& map) const;

    ParticleMeasure translated(std::span<const double> shift) const;
    /// Copy with one particle coordinate nudged: data[j*d+axis] += h.
    /// This is the finite-particle realization of a Wasserstein perturbation.
    ParticleMeasure perturb_point(std::size_t j, std::size_t axis, double h) const;

   private:
    ParticleMeasure(std::vector<double> data, std::size_t n, std::size_t dim);
    void compute_stats();

    std::vector<double> data_;  // n x d row-major
    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> mean_;
    double mean_sum_ = 0.0;
    double moment2_ = 0.0;
    double max_radius_ = 0.0;
};

/// Transport plan between two equal-size empirical measures: a permutation
/// pairing source index i with target index pairing[i], plus its quadratic
/// cost sum |x_i - y_{pairing[i]}|^2 / n.
struct Coupling {
    std::vector<std::size_t> pairing;
    double cost2 = 0.0;
};

double moment2(const ParticleMeasure& mu);

/// Particle count cap for the d >= 2 exact assignment solver. Larger inputs
/// are rejected rather than approximated.
inline constexpr std::size_t kAssignmentLimit = 512;

Coupling optimal_coupling(const ParticleMeasure& mu, const ParticleMeasure& nu);
double wasserstein(int order, const ParticleMeasure& mu, const ParticleMeasure& nu);

/// Minimum-cost permutation for an n x n cost matrix (row-major), O(n^3)
/// shortest augmenting path. Deterministic.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n);

// CSV: header x0..x{d-1}, one row per particle.
void save_measure_csv(const ParticleMeasure& mu, const std::string& path);
ParticleMeasure load_measure_csv(const std::string& path);

// Samplers (deterministic in the seed).
ParticleMeasure sample_gaussian(std::size_t n, std::size_t dim, std::span<const double> mean,
                                double sd, std::uint64_t seed);
ParticleMeasure sample_uniform(std::size_t n, std::size_t dim, double lo, double hi,
                               std::uint64_t seed);
/// Translate so the sample mean equals `target` exactly.
ParticleMeasure center_to_mean(const ParticleMeasure& mu, std::span<const double> target);

}  // namespace mfgkit
