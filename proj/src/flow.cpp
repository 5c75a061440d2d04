#include "mfgkit/flow.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mfgkit/hjb.hpp"
#include "mfgkit/integrate.hpp"
#include "mfgkit/linalg.hpp"
#include "mfgkit/parallel.hpp"

#include "json.hpp"

namespace mfgkit {

MeasureFlow::MeasureFlow(std::vector<double> times, std::vector<ParticleMeasure> measures)
    : times_(std::move(times)), measures_(std::move(measures)) {
    if (times_.size() < 2 || times_.size() != measures_.size())
        throw SizeMismatch("MeasureFlow: need one measure per time node, at least two nodes");
    if (std::fabs(times_.front()) > 1e-12)
        throw ParamOutOfRange("MeasureFlow: time grid must start at 0");
    const double dt = times_[1] - times_[0];
    if (dt <= 0.0) throw ParamOutOfRange("MeasureFlow: time grid must be increasing");
    for (std::size_t k = 1; k < times_.size(); ++k) {
        if (std::fabs(times_[k] - times_[k - 1] - dt) > 1e-9 * std::max(1.0, times_.back()))
            throw ParamOutOfRange("MeasureFlow: time grid must be uniform");
    }
    const std::size_t n = measures_.front().size(), d = measures_.front().dim();
    for (const auto& m : measures_)
        if (m.size() != n || m.dim() != d)
            throw SizeMismatch("MeasureFlow: all slices must share particle count and dim");
}

MeasureFlow MeasureFlow::stationary(const ParticleMeasure& rho0, std::size_t nt, double horizon) {
    std::vector<double> times(nt + 1);
    std::vector<ParticleMeasure> measures;
    measures.reserve(nt + 1);
    for (std::size_t k = 0; k <= nt; ++k) {
        times[k] = horizon * static_cast<double>(k) / static_cast<double>(nt);
        measures.push_back(rho0);
    }
    return MeasureFlow(std::move(times), std::move(measures));
}

const ParticleMeasure& MeasureFlow::nearest(double t) const {
    const double dt = times_[1] - times_[0];
    auto k = static_cast<std::ptrdiff_t>(std::llround(t / dt));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(times_.size()) - 1);
    return measures_[static_cast<std::size_t>(k)];
}

double MeasureFlow::max_moment2() const {
    double m = 0.0;
    for (const auto& mu : measures_) m = std::max(m, mu.moment2());
    return m;
}

double MeasureFlow::lipschitz_w1() const {
    double c = 0.0;
    const double dt = times_[1] - times_[0];
    for (std::size_t k = 0; k + 1 < measures_.size(); ++k)
        c = std::max(c, wasserstein(1, measures_[k], measures_[k + 1]) / dt);
    return c;
}

double MeasureFlow::sup_w1(const MeasureFlow& other) const {
    if (other.measures_.size() != measures_.size())
        throw SizeMismatch("sup_w1: flows live on different time grids");
    double s = 0.0;
    for (std::size_t k = 0; k < measures_.size(); ++k)
        s = std::max(s, wasserstein(1, measures_[k], other.measures_[k]));
    return s;
}

double MeasureFlow::sup_w2(const MeasureFlow& other) const {
    if (other.measures_.size() != measures_.size())
        throw SizeMismatch("sup_w2: flows live on different time grids");
    double s = 0.0;
    for (std::size_t k = 0; k < measures_.size(); ++k)
        s = std::max(s, wasserstein(2, measures_[k], other.measures_[k]));
    return s;
}

void MeasureFlow::save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["T"] = horizon();
    manifest["nt"] = steps();
    manifest["n"] = particles();
    manifest["dim"] = dim();
    std::ofstream mf(dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";
    for (std::size_t k = 0; k < measures_.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "/rho_%04zu.csv", k);
        save_measure_csv(measures_[k], dir + name);
    }
}

MeasureFlow MeasureFlow::load(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw IoError("missing manifest.json in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    const auto nt = manifest.at("nt").get<std::size_t>();
    const auto T = manifest.at("T").get<double>();
    std::vector<double> times(nt + 1);
    std::vector<ParticleMeasure> measures;
    measures.reserve(nt + 1);
    for (std::size_t k = 0; k <= nt; ++k) {
        times[k] = T * static_cast<double>(k) / static_cast<double>(nt);
        char name[32];
        std::snprintf(name, sizeof name, "/rho_%04zu.csv", k);
        measures.push_back(load_measure_csv(dir + name));
    }
    return MeasureFlow(std::move(times), std::move(measures));
}

VelocityField::VelocityField(const MfgProblem& problem, const ValueField& field,
                             const MeasureFlow& rho)
    : problem_(&problem), field_(&field), rho_(&rho) {
    if (rho.steps() != field.grid.nt)
        throw SizeMismatch("velocity_from_value: flow and value field time grids disagree");
}

void VelocityField::operator()(double t, std::span<const double> x, std::span<double> out) const {
    double grad[2];
    bool clamped = false;
    field_->interp_du(t, x, {grad, field_->grid.dim}, &clamped);
    if (clamped) clamps_.fetch_add(1, std::memory_order_relaxed);
    for (std::size_t c = 0; c < field_->grid.dim; ++c) grad[c] = -grad[c];
    problem_->hamiltonian.grad_p(x, {grad, field_->grid.dim}, rho_->nearest(t), out);
}

VelocityFn VelocityField::fn() const {
    return [this](double t, std::span<const double> x, std::span<double> out) {
        (*this)(t, x, out);
    };
}

VelocityField velocity_from_value(const MfgProblem& problem, const ValueField& field,
                                  const MeasureFlow& rho) {
    return VelocityField(problem, field, rho);
}

MeasureFlow integrate_flow(const VelocityFn& velocity, const ParticleMeasure& rho0,
                           std::size_t nt, double horizon, double blow_up_radius) {
    const std::size_t n = rho0.size(), d = rho0.dim();
    const double dt = horizon / static_cast<double>(nt);
    // positions[k] holds the whole cloud at t_k; particle index is preserved.
    std::vector<std::vector<double>> positions(nt + 1);
    positions[0].assign(rho0.flat().begin(), rho0.flat().end());
    for (std::size_t k = 1; k <= nt; ++k) positions[k].resize(n * d);

    std::atomic<bool> blew_up{false};
    parallel_for(n, [&](std::size_t i) {
        double x[2];
        for (std::size_t c = 0; c < d; ++c) x[c] = positions[0][i * d + c];
        auto rhs = [&](double t, const double* state, double* out) {
            velocity(t, {state, d}, {out, d});
        };
        for (std::size_t k = 0; k < nt; ++k) {
            rk4_step<2>(rhs, dt * static_cast<double>(k), dt, x, d);
            double r2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) r2 += x[c] * x[c];
            if (!(r2 <= blow_up_radius * blow_up_radius)) {
                blew_up.store(true);
                for (std::size_t kk = k + 1; kk <= nt; ++kk)
                    for (std::size_t c = 0; c < d; ++c) positions[kk][i * d + c] = x[c];
                return;
            }
            for (std::size_t c = 0; c < d; ++c) positions[k + 1][i * d + c] = x[c];
        }
    });
    if (blew_up.load())
        throw BlowUp("integrate_flow: a particle left the safety radius " +
                     std::to_string(blow_up_radius));

    std::vector<double> times(nt + 1);
    std::vector<ParticleMeasure> measures;
    measures.reserve(nt + 1);
    for (std::size_t k = 0; k <= nt; ++k) {
        times[k] = dt * static_cast<double>(k);
        measures.push_back(ParticleMeasure::from_flat(std::move(positions[k]), d));
    }
    return MeasureFlow(std::move(times), std::move(measures));
}

double growth_bound_defect(const MeasureFlow& flow, double c_v) {
    const std::size_t n = flow.particles();
    double defect = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= flow.steps(); ++k) {
        const double t = flow.times()[k];
        const double grow = std::exp(t * c_v);
        for (std::size_t i = 0; i < n; ++i) {
            const double r0 = norm2(flow.initial().point(i));
            const double rt = norm2(flow.at(k).point(i));
            defect = std::max(defect, rt - (r0 + c_v * t) * grow);
        }
    }
    return defect;
}

}  // namespace mfgkit
