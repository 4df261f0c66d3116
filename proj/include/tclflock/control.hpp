// Feedback-linearizing aggregate power controller: weighted output and
// regulation error, nonlinear damping, the set-point-rate control law,
// moving-average reference smoothing, and the closed-form error solution
// used as an oracle and audit bound.

#ifndef TCLFLOCK_CONTROL_HPP
#define TCLFLOCK_CONTROL_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tclflock/core.hpp"
#include "tclflock/grid.hpp"
#include "tclflock/population.hpp"

namespace tclflock {

struct StarvedPopulation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Controller memory. The control path uses only the ON density w, per the
/// partial state-feedback structure of the scheme.
struct ControllerState {
    double k0 = 1.0;             // damping gain [1/h]
    double a = -1.0;             // output weight slope (must be nonzero)
    double b = -20.0;            // output weight offset
    double y_d = 0.0;            // demand target in weighted output units
    double x_ref = 20.5;         // current broadcast set-point [degC]
    double delta0_guard = 10.0;  // minimum |integral of w| [loads]
    std::vector<double> u_hist;  // smoothing buffer, zero-filled at start
    std::size_t hist_pos = 0;
    double held_u = 0.0;         // last accepted raw u, reused on guard trips
    long guard_trips = 0;

    explicit ControllerState(int smoothing_window = 10)
        : u_hist(static_cast<std::size_t>(smoothing_window), 0.0) {}
};

/// Weighted total power consumption of the ON field.
inline double output_y(const DensityField& field, const TclParams& p,
                       const ControllerState& cs) {
    return aggregate_power(field, p, cs.a, cs.b).y;
}

/// Nonlinear damping: the auxiliary control that stabilizes the error ODE.
inline double damping_phi(double e, double k0) { return -k0 * e; }

/// Set-point rate that linearizes the output dynamics to de/dt = phi + Gamma:
///   u = -[beta (w(x_hi) - w(x_lo)) - integral(alpha1 w) + (eta/(a P)) phi]
///       / integral(w).
/// Boundary densities are read from the end cells. Throws StarvedPopulation
/// when the ON mass falls under the guard, i.e. the characteristic index of
/// the input-output dynamics is no longer defined.
inline double control_u(const DensityField& field, const TclParams& p, double beta,
                        const ControllerState& cs, double phi) {
    const Grid& g = field.grid;
    double mass = 0.0, adv = 0.0;
    for (int j = 0; j < g.nx; ++j) {
        const double wj = field.w[static_cast<std::size_t>(j)];
        mass += wj;
        adv += drift_on(g.center(j), p) * wj;
    }
    mass *= g.dx;
    adv *= g.dx;
    if (std::abs(mass) < cs.delta0_guard)
        throw StarvedPopulation("control_u: ON mass below the characteristic-index guard");
    const double boundary = beta * (field.w.back() - field.w.front());
    return -(boundary - adv + (p.eta / (cs.a * p.P)) * phi) / mass;
}

/// Exact integration of de/dt = -k0 e + Gamma over dt with Gamma constant.
inline double error_update(double e, double k0, double Gamma, double dt) {
    if (dt < 0.0) throw std::invalid_argument("error_update: negative dt");
    if (k0 == 0.0) return e + Gamma * dt;
    const double decay = std::exp(-k0 * dt);
    return e * decay + (Gamma / k0) * (1.0 - decay);
}

/// Envelope of the regulation error under a disturbance bounded by
/// Gamma_inf: |e(t)| <= |e0| e^{-k0 t} + (Gamma_inf/k0)(1 - e^{-k0 t}).
inline double error_bound(double e0, double Gamma_inf, double k0, double t) {
    if (Gamma_inf < 0.0) throw std::invalid_argument("error_bound: Gamma_inf must be >= 0");
    if (!(k0 > 0.0)) throw std::invalid_argument("error_bound: k0 must be positive");
    const double decay = std::exp(-k0 * t);
    return std::abs(e0) * decay + (Gamma_inf / k0) * (1.0 - decay);
}

/// Weighted disturbance produced by the recorded switching flux,
/// Gamma = (P/eta) * integral (a x + b) delta dx. Diagnostics only; the
/// controller never reads it.
inline double gamma_of_flux(const SwitchFlux& delta, const TclParams& p, double a, double b) {
    double s = 0.0;
    for (int j = 0; j < delta.grid.nx; ++j)
        s += (a * delta.grid.center(j) + b) * delta.values[static_cast<std::size_t>(j)];
    return (p.P / p.eta) * s * delta.grid.dx;
}

/// Push one raw set-point rate into the smoothing buffer and integrate the
/// buffer mean into the broadcast set-point. Returns the new broadcast value.
inline double update_reference(ControllerState& cs, double u_raw, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("update_reference: dt must be positive");
    cs.u_hist[cs.hist_pos] = u_raw;
    cs.hist_pos = (cs.hist_pos + 1) % cs.u_hist.size();
    double sum = 0.0;
    for (double u : cs.u_hist) sum += u;
    const double u_smooth = sum / static_cast<double>(cs.u_hist.size());
    cs.x_ref += u_smooth * dt;
    return cs.x_ref;
}

/// Buffer mean without mutating anything (the value update_reference would
/// integrate next).
inline double smoothed_u(const ControllerState& cs) {
    double sum = 0.0;
    for (double u : cs.u_hist) sum += u;
    return sum / static_cast<double>(cs.u_hist.size());
}

}  // namespace tclflock

#endif
