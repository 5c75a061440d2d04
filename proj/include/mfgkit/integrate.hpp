#pragma once

#include <cstddef>

namespace mfgkit {

/// One classical 4th-order step of dy/dt = rhs(t, y) on a flat state of n
/// doubles (n <= MaxDim). Shared by the particle transport and the
/// characteristic (Pontryagin) system.
template <std::size_t MaxDim, typename Rhs>
void rk4_step(const Rhs& rhs, double t, double dt, double* state, std::size_t n) {
    double k1[MaxDim], k2[MaxDim], k3[MaxDim], k4[MaxDim], tmp[MaxDim];
    rhs(t, state, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k1[i];
    rhs(t + 0.5 * dt, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k2[i];
    rhs(t + 0.5 * dt, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + dt * k3[i];
    rhs(t + dt, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
        state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace mfgkit
