#include "mfgkit/measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mfgkit/linalg.hpp"
#include "mfgkit/rng.hpp"

namespace mfgkit {

ParticleMeasure::ParticleMeasure(std::vector<double> data, std::size_t n, std::size_t dim)
    : data_(std::move(data)), n_(n), dim_(dim) {
    compute_stats();
}

void ParticleMeasure::compute_stats() {
    mean_.assign(dim_, 0.0);
    double m2 = 0.0;
    max_radius_ = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double r2 = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) {
            const double x = data_[i * dim_ + k];
            mean_[k] += x;
            r2 += x * x;
        }
        m2 += r2;
        max_radius_ = std::max(max_radius_, std::sqrt(r2));
    }
    for (std::size_t k = 0; k < dim_; ++k) mean_[k] /= static_cast<double>(n_);
    mean_sum_ = std::accumulate(mean_.begin(), mean_.end(), 0.0);
    moment2_ = std::sqrt(m2 / static_cast<double>(n_));
}

ParticleMeasure ParticleMeasure::from_samples(const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw EmptyInput("from_samples: no points given");
    const std::size_t dim = points.front().size();
    if (dim == 0) throw DimensionMismatch("from_samples: zero-dimensional point");
    std::vector<double> flat;
    flat.reserve(points.size() * dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != dim)
            throw DimensionMismatch("from_samples: point " + std::to_string(i) +
                                    " has dimension " + std::to_string(points[i].size()) +
                                    ", expected " + std::to_string(dim));
        for (double x : points[i]) {
            if (!std::isfinite(x))
                throw NonFiniteCoordinate("from_samples: non-finite coordinate in point " +
                                          std::to_string(i));
            flat.push_back(x);
        }
    }
    return ParticleMeasure(std::move(flat), points.size(), dim);
}

ParticleMeasure ParticleMeasure::from_flat(std::vector<double> data, std::size_t dim) {
    if (dim == 0) throw DimensionMismatch("from_flat: dim must be >= 1");
    if (data.empty() || data.size() % dim != 0)
        throw EmptyInput("from_flat: data size must be a positive multiple of dim");
    for (double x : data)
        if (!std::isfinite(x)) throw NonFiniteCoordinate("from_flat: non-finite coordinate");
    const std::size_t n = data.size() / dim;
    return ParticleMeasure(std::move(data), n, dim);
}

ParticleMeasure ParticleMeasure::pushforward(
    const std::function<void(std::span<const double>, std::span<double>)>& map) const {
    std::vector<double> out(data_.size());
    for (std::size_t i = 0; i < n_; ++i) {
        map(point(i), {out.data() + i * dim_, dim_});
    }
    for (double x : out)
        if (!std::isfinite(x))
            throw NonFiniteCoordinate("pushforward: map produced a non-finite coordinate");
    return ParticleMeasure(std::move(out), n_, dim_);
}

ParticleMeasure ParticleMeasure::translated(std::span<const double> shift) const {
    if (shift.size() != dim_) throw DimensionMismatch("translated: shift dimension mismatch");
    std::vector<double> out = data_;
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t k = 0; k < dim_; ++k) out[i * dim_ + k] += shift[k];
    return ParticleMeasure(std::move(out), n_, dim_);
}

ParticleMeasure ParticleMeasure::perturb_point(std::size_t j, std::size_t axis, double h) const {
    std::vector<double> out = data_;
    out[j * dim_ + axis] += h;
    return ParticleMeasure(std::move(out), n_, dim_);
}

double moment2(const ParticleMeasure& mu) { return mu.moment2(); }

namespace {

void require_compatible(const ParticleMeasure& mu, const ParticleMeasure& nu) {
    if (mu.size() != nu.size())
        throw SizeMismatch("coupling requires equal particle counts: " +
                           std::to_string(mu.size()) + " vs " + std::to_string(nu.size()));
    if (mu.dim() != nu.dim())
        throw DimensionMismatch("coupling requires equal dimensions: " +
                                std::to_string(mu.dim()) + " vs " + std::to_string(nu.dim()));
}

// Monotone rearrangement: in d=1 sorting both samples gives the optimal
// pairing for any convex cost, in particular both p=1 and p=2.
std::vector<std::size_t> sorted_pairing(const ParticleMeasure& mu, const ParticleMeasure& nu) {
    const std::size_t n = mu.size();
    std::vector<std::size_t> src(n), tgt(n);
    std::iota(src.begin(), src.end(), 0);
    std::iota(tgt.begin(), tgt.end(), 0);
    auto by_coord = [](const ParticleMeasure& m) {
        return [&m](std::size_t a, std::size_t b) { return m.point(a)[0] < m.point(b)[0]; };
    };
    std::stable_sort(src.begin(), src.end(), by_coord(mu));
    std::stable_sort(tgt.begin(), tgt.end(), by_coord(nu));
    std::vector<std::size_t> sigma(n);
    for (std::size_t r = 0; r < n; ++r) sigma[src[r]] = tgt[r];
    return sigma;
}

std::vector<double> pairwise_cost(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                  int order) {
    const std::size_t n = mu.size();
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = mu.point(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double d2 = sqdist(xi, nu.point(j));
            cost[i * n + j] = order == 2 ? d2 : std::sqrt(d2);
        }
    }
    return cost;
}

double pairing_cost(const ParticleMeasure& mu, const ParticleMeasure& nu,
                    const std::vector<std::size_t>& sigma, int order) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double d2 = sqdist(mu.point(i), nu.point(sigma[i]));
        s += order == 2 ? d2 : std::sqrt(d2);
    }
    return s / static_cast<double>(mu.size());
}

std::vector<std::size_t> min_cost_pairing(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                          int order) {
    if (mu.dim() == 1) return sorted_pairing(mu, nu);
    if (mu.size() > kAssignmentLimit)
        throw TooLargeForExactAssignment(
            "exact assignment supports n <= " + std::to_string(kAssignmentLimit) +
            " in d >= 2, got n = " + std::to_string(mu.size()));
    return solve_assignment(pairwise_cost(mu, nu, order), mu.size());
}

}  // namespace

// Shortest augmenting path assignment (Jonker-Volgenant flavor), O(n^3).
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> sigma(n);
    for (std::size_t j = 1; j <= n; ++j) sigma[p[j] - 1] = j - 1;
    return sigma;
}

Coupling optimal_coupling(const ParticleMeasure& mu, const ParticleMeasure& nu) {
    require_compatible(mu, nu);
    Coupling c;
    c.pairing = min_cost_pairing(mu, nu, 2);
    c.cost2 = pairing_cost(mu, nu, c.pairing, 2);
    return c;
}

double wasserstein(int order, const ParticleMeasure& mu, const ParticleMeasure& nu) {
    if (order != 1 && order != 2)
        throw UnsupportedOrder("wasserstein: order must be 1 or 2, got " + std::to_string(order));
    require_compatible(mu, nu);
    const auto sigma = min_cost_pairing(mu, nu, order);
    const double c = pairing_cost(mu, nu, sigma, order);
    return order == 2 ? std::sqrt(c) : c;
}

void save_measure_csv(const ParticleMeasure& mu, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.precision(17);
    for (std::size_t k = 0; k < mu.dim(); ++k) f << (k ? "," : "") << "x" << k;
    f << "\n";
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto x = mu.point(i);
        for (std::size_t k = 0; k < mu.dim(); ++k) f << (k ? "," : "") << x[k];
        f << "\n";
    }
}

ParticleMeasure load_measure_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty measure file: " + path);
    std::size_t dim = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (line.rfind("x0", 0) != 0)
        throw IoError("measure CSV must start with header x0,..: " + path);
    std::vector<double> flat;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t got = 0;
        while (std::getline(ss, cell, ',')) {
            flat.push_back(std::stod(cell));
            ++got;
        }
        if (got != dim) throw IoError("ragged row in measure CSV: " + path);
    }
    return ParticleMeasure::from_flat(std::move(flat), dim);
}

ParticleMeasure sample_gaussian(std::size_t n, std::size_t dim, std::span<const double> mean,
                                double sd, std::uint64_t seed) {
    if (mean.size() != dim) throw DimensionMismatch("sample_gaussian: mean dimension mismatch");
    Rng rng(seed);
    std::vector<double> flat(n * dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < dim; ++k) flat[i * dim + k] = mean[k] + sd * rng.gaussian();
    return ParticleMeasure::from_flat(std::move(flat), dim);
}

ParticleMeasure sample_uniform(std::size_t n, std::size_t dim, double lo, double hi,
                               std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> flat(n * dim);
    for (double& x : flat) x = rng.uniform(lo, hi);
    return ParticleMeasure::from_flat(std::move(flat), dim);
}

ParticleMeasure center_to_mean(const ParticleMeasure& mu, std::span<const double> target) {
    if (target.size() != mu.dim())
        throw DimensionMismatch("center_to_mean: target dimension mismatch");
    std::vector<double> shift(mu.dim());
    for (std::size_t k = 0; k < mu.dim(); ++k) shift[k] = target[k] - mu.mean()[k];
    return mu.translated(shift);
}

}  // namespace mfgkit
