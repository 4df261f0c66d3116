// Conservative explicit solver for the pair of coupled, forced
// Fokker-Planck equations over the temperature grid: donor-cell upwind
// advection, central diffusion, zero interface flux at the domain ends,
// and the in-domain switching source. Forward Euler in time with internal
// CFL sub-stepping.

#ifndef TCLFLOCK_FPE_HPP
#define TCLFLOCK_FPE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tclflock/core.hpp"
#include "tclflock/grid.hpp"

namespace tclflock {

struct FpeParams {
    double beta = 0.1;  // diffusivity [degC^2/h]
    TclParams p;        // supplies the drift rates
    bool zero_drift = false;  // test hook: forces alpha0 = alpha1 = 0
};

namespace detail {

inline double alpha_on(const FpeParams& fp, double x) {
    return fp.zero_drift ? 0.0 : drift_on(x, fp.p);
}
inline double alpha_off(const FpeParams& fp, double x) {
    return fp.zero_drift ? 0.0 : drift_off(x, fp.p);
}

/// One forward-Euler update of a single field. Interface flux at face f
/// (between cells f-1 and f): F = beta*(c_f - c_{f-1})/dx - (alpha - u)*c_up,
/// with the donor cell picked by the sign of (alpha - u). End faces carry
/// zero flux, which makes conservation exact by telescoping.
template <typename AlphaFn>
inline void euler_update(std::vector<double>& c, const Grid& g, double beta, double u,
                         AlphaFn&& alpha, const double* source, double dt) {
    const int nx = g.nx;
    const double dx = g.dx;
    static thread_local std::vector<double> flux;
    flux.assign(static_cast<std::size_t>(nx) + 1, 0.0);
    for (int f = 1; f < nx; ++f) {
        const double vel = alpha(g.face(f)) - u;
        const double diff = beta * (c[f] - c[f - 1]) / dx;
        const double adv = vel * (vel > 0.0 ? c[f - 1] : c[f]);
        flux[f] = diff - adv;
    }
    for (int j = 0; j < nx; ++j) {
        double dc = (flux[j + 1] - flux[j]) / dx;
        if (source) dc += source[j];
        c[j] += dt * dc;
    }
}

}  // namespace detail

/// Largest stable forward-Euler step for the grid, diffusivity, and drift
/// range, with a 0.9 safety factor. The diffusive and advective limits share
/// one denominator so the donor-cell update stays positivity-preserving even
/// when both mechanisms are near their individual bounds; with either
/// mechanism absent this reduces to the usual dx^2/(2 beta) or dx/|alpha - u|
/// bound. Degenerate (no-transport) inputs return the sentinel 0.9*dx/eps
/// rather than infinity.
inline double cfl_dt(const Grid& g, const FpeParams& fp, double u) {
    constexpr double kSafety = 0.9;
    constexpr double kEps = 1e-12;
    double amax = 0.0;
    for (int j = 0; j < g.nx; ++j) {
        const double x = g.center(j);
        amax = std::max(amax, std::abs(detail::alpha_on(fp, x) - u));
        amax = std::max(amax, std::abs(detail::alpha_off(fp, x) - u));
    }
    return kSafety / (2.0 * fp.beta / (g.dx * g.dx) + (amax + kEps) / g.dx);
}

/// Advance both densities by dt under set-point rate u and switching source
/// delta (held constant). Steps beyond the CFL bound are split internally
/// into equal stable sub-steps.
inline DensityField fpe_step(const DensityField& f, const FpeParams& fp, double u,
                             const SwitchFlux& delta, double dt) {
    if (!(dt > 0.0))
        throw std::invalid_argument("fpe_step: dt must be positive");
    if (!delta.values.empty() && !delta.grid.same_as(f.grid))
        throw std::invalid_argument("fpe_step: flux recorded on a different grid");

    const double stable = cfl_dt(f.grid, fp, u);
    const int nsub = std::max(1, static_cast<int>(std::ceil(dt / stable)));
    const double h = dt / nsub;

    DensityField out = f;
    const double* src = delta.values.empty() ? nullptr : delta.values.data();
    static thread_local std::vector<double> neg_src;
    const double* src_neg = nullptr;
    if (src) {
        neg_src.assign(delta.values.size(), 0.0);
        for (std::size_t j = 0; j < delta.values.size(); ++j) neg_src[j] = -delta.values[j];
        src_neg = neg_src.data();
    }

    for (int s = 0; s < nsub; ++s) {
        detail::euler_update(out.w, f.grid, fp.beta, u,
                             [&](double x) { return detail::alpha_on(fp, x); }, src, h);
        detail::euler_update(out.v, f.grid, fp.beta, u,
                             [&](double x) { return detail::alpha_off(fp, x); }, src_neg, h);
    }
    out.t = f.t + dt;
    return out;
}

/// Trajectory of fields at control-period resolution: steps+1 entries
/// starting with f0. Series may be empty only when steps == 0.
inline std::vector<DensityField> fpe_solve(const DensityField& f0, const FpeParams& fp,
                                           const std::vector<double>& u_series,
                                           const std::vector<SwitchFlux>& delta_series,
                                           double dt_ctrl, std::size_t steps) {
    if (u_series.size() != steps || delta_series.size() != steps)
        throw std::invalid_argument("fpe_solve: series lengths must equal the step count");
    std::vector<DensityField> traj;
    traj.reserve(steps + 1);
    traj.push_back(f0);
    for (std::size_t k = 0; k < steps; ++k)
        traj.push_back(fpe_step(traj.back(), fp, u_series[k], delta_series[k], dt_ctrl));
    return traj;
}

}  // namespace tclflock

#endif
