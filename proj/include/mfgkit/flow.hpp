#pragma once

#include <atomic>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfgkit/measures.hpp"
#include "mfgkit/model.hpp"

namespace mfgkit {

struct ValueField;  // defined in mfgkit/hjb.hpp

/// Time-indexed particle flow on a uniform grid. Particle i at time t_k is
/// the flow image of particle i at t_0; indices are never resampled, so the
/// (X_i(0), X_i(t)) coupling is meaningful throughout.
class MeasureFlow {
   public:
    MeasureFlow() = default;  // empty placeholder; populate before use
    MeasureFlow(std::vector<double> times, std::vector<ParticleMeasure> measures);
    static MeasureFlow stationary(const ParticleMeasure& rho0, std::size_t nt, double horizon);

    bool empty() const { return times_.empty(); }

    std::size_t steps() const { return times_.size() - 1; }
    double horizon() const { return times_.back(); }
    double dt() const { return times_[1] - times_[0]; }
    const std::vector<double>& times() const { return times_; }
    const ParticleMeasure& at(std::size_t k) const { return measures_[k]; }
    const ParticleMeasure& initial() const { return measures_.front(); }
    const ParticleMeasure& terminal() const { return measures_.back(); }
    const ParticleMeasure& nearest(double t) const;
    std::size_t particles() const { return measures_.front().size(); }
    std::size_t dim() const { return measures_.front().dim(); }

    double max_moment2() const;
    /// max_k W1(rho_k, rho_{k+1}) / dt, the empirical time-Lipschitz constant.
    double lipschitz_w1() const;
    double sup_w1(const MeasureFlow& other) const;
    double sup_w2(const MeasureFlow& other) const;

    void save(const std::string& dir) const;
    static MeasureFlow load(const std::string& dir);

   private:
    std::vector<double> times_;
    std::vector<ParticleMeasure> measures_;
};

using VelocityFn = std::function<void(double, std::span<const double>, std::span<double>)>;

/// V(t,x) = D_pH(x, -du(t,x), rho_t): the optimal feedback drift built from a
/// solved value field. du is interpolated multilinearly in space and linearly
/// in time; queries outside the grid are clamped and counted.
class VelocityField {
   public:
    VelocityField(const MfgProblem& problem, const ValueField& field, const MeasureFlow& rho);

    void operator()(double t, std::span<const double> x, std::span<double> out) const;
    long clamp_count() const { return clamps_.load(); }
    VelocityFn fn() const;

   private:
    const MfgProblem* problem_;
    const ValueField* field_;
    const MeasureFlow* rho_;
    mutable std::atomic<long> clamps_{0};
};

VelocityField velocity_from_value(const MfgProblem& problem, const ValueField& field,
                                  const MeasureFlow& rho);

/// Classical 4th-order one-step integration of dX/dt = V(t, X) per particle.
/// The flow at t_k is the push-forward of rho0 by the time-k flow map.
MeasureFlow integrate_flow(const VelocityFn& velocity, const ParticleMeasure& rho0,
                           std::size_t nt, double horizon,
                           double blow_up_radius = 1e12);

/// Max defect of the growth bound |X_i(t)| <= (|X_i(0)| + C_V t) e^{t C_V};
/// nonpositive when the bound holds.
double growth_bound_defect(const MeasureFlow& flow, double c_v);

}  // namespace mfgkit
