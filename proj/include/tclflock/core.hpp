// Single-load thermal model: first-order ODE of an ON/OFF
// thermostatically controlled load and its exact zero-order-hold
// discretization.

#ifndef TCLFLOCK_CORE_HPP
#define TCLFLOCK_CORE_HPP

#include <cmath>
#include <stdexcept>

namespace tclflock {

/// Physical parameters of one load. Mode is +1 for heating, -1 for cooling.
struct TclParams {
    double R = 2.0;     // thermal resistance [degC/kW]
    double C = 10.0;    // thermal capacitance [kWh/degC]
    double P = 14.0;    // thermal power [kW]
    double x_e = 32.0;  // ambient temperature [degC]
    int s = -1;         // +1 heating, -1 cooling
    double eta = 2.5;   // coefficient of performance

    bool valid() const {
        return R > 0.0 && C > 0.0 && P > 0.0 && eta > 0.0 && (s == 1 || s == -1);
    }
};

/// Hybrid state of one load: temperature, switch state, local clock [h].
struct TclState {
    double x = 20.0;
    int u = 0;  // 1 = ON, 0 = OFF
    double t = 0.0;
};

/// Exact discrete model x' = A x + B u + E x_e for a sampling period Ts.
struct ZohModel {
    double A = 1.0;
    double B = 0.0;
    double E = 0.0;
    double Ts = 0.0;  // [h]
};

/// Temperature rate with the compressor ON [degC/h].
inline double drift_on(double x, const TclParams& p) {
    return (p.x_e - x + p.s * p.R * p.P) / (p.R * p.C);
}

/// Temperature rate with the compressor OFF [degC/h].
inline double drift_off(double x, const TclParams& p) {
    return (p.x_e - x) / (p.R * p.C);
}

inline ZohModel make_zoh(const TclParams& p, double Ts) {
    if (!(Ts > 0.0))
        throw std::invalid_argument("make_zoh: sampling period must be positive");
    ZohModel m;
    m.Ts = Ts;
    m.A = std::exp(-Ts / (p.R * p.C));
    m.E = 1.0 - m.A;
    m.B = p.s * p.P * p.R * (1.0 - m.A);
    return m;
}

/// Advance one load by dt with the switch held at u. Exact for
/// piecewise-constant switching.
inline TclState step_exact(const TclState& st, int u, const TclParams& p, double dt) {
    const ZohModel m = make_zoh(p, dt);
    TclState out;
    out.x = m.A * st.x + m.B * static_cast<double>(u) + m.E * p.x_e;
    out.u = u;
    out.t = st.t + dt;
    return out;
}

/// Steady duty ratio at a fixed set-point: fraction of time ON during a
/// deadband cycle centered at x, alpha0/(alpha0 - alpha1). For cooling with
/// cooling parameters this reduces to (x_e - x)/(R P).
inline double duty_ratio(double x, const TclParams& p) {
    const double a0 = drift_off(x, p);
    const double a1 = drift_on(x, p);
    return a0 / (a0 - a1);
}

}  // namespace tclflock

#endif
