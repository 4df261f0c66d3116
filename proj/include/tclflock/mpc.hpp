// Binary MPC of one load: exhaustive enumeration over ON/OFF sequences
// with a soft deadband penalty, plus the per-load reference
// desynchronization transform (delayed reference sampling).

#ifndef TCLFLOCK_MPC_HPP
#define TCLFLOCK_MPC_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tclflock/core.hpp"

namespace tclflock {

struct MpcConfig {
    double Q_mpc = 100.0;   // tracking-error weight
    double R_mpc = 10.0;    // control-effort weight
    int M = 5;              // prediction horizon [steps]
    double band_lo = 0.5;   // deadband below reference [degC]
    double band_hi = 0.5;   // deadband above reference [degC]
    double ref_delay = 0.0; // desynchronization delay [h]
    double violation_penalty = 1e6;
};

/// Piecewise-constant reference signal: last broadcast value holds until the
/// next breakpoint; queries clamp to the recorded time span at both ends.
class RefSignal {
public:
    RefSignal() = default;
    RefSignal(double t0, double value) { append(t0, value); }

    void append(double t, double value) {
        if (!times_.empty() && !(t >= times_.back()))
            throw std::invalid_argument("RefSignal: breakpoints must be non-decreasing in time");
        times_.push_back(t);
        values_.push_back(value);
    }

    bool empty() const { return times_.empty(); }
    double latest_time() const { return times_.back(); }
    double latest_value() const { return values_.back(); }

    /// Value at time t; clamps to first/last breakpoint outside the span.
    double at(double t) const {
        if (times_.empty())
            throw std::logic_error("RefSignal: empty signal");
        if (t <= times_.front()) return values_.front();
        if (t >= times_.back()) return values_.back();
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

/// Reference trajectory seen by one load over its horizon: the broadcast
/// signal sampled at (now - ref_delay + k*Ts), k = 1..M. Pre-history times
/// hold the earliest value; times past the latest broadcast hold the latest.
inline std::vector<double> desync_reference(const RefSignal& ref, const MpcConfig& cfg,
                                            double now, double Ts) {
    std::vector<double> traj(static_cast<std::size_t>(cfg.M));
    for (int k = 1; k <= cfg.M; ++k) {
        const double tq = std::min(now, now - cfg.ref_delay + k * Ts);
        traj[static_cast<std::size_t>(k - 1)] = ref.at(tq);
    }
    return traj;
}

namespace detail {

/// Stage cost at horizon step k (1-based): x is the post-step temperature.
inline double mpc_stage_cost(double x, int u, double ref_k, const MpcConfig& cfg) {
    const double e = x - ref_k;
    double cost = cfg.Q_mpc * e * e + cfg.R_mpc * static_cast<double>(u * u);
    const double hi = ref_k + cfg.band_hi;
    const double lo = ref_k - cfg.band_lo;
    double viol = 0.0;
    if (x > hi) viol = x - hi;
    else if (x < lo) viol = lo - x;
    cost += cfg.violation_penalty * viol * viol;
    return cost;
}

}  // namespace detail

/// Result of one MPC solve: first control of the minimizing sequence, the
/// full sequence, and its cost. Sequence bit (M-k) holds u(k), so sequence
/// indices enumerate in lexicographic order with u(1) most significant and
/// OFF < ON.
struct MpcSolution {
    int u_first = 0;
    std::uint32_t sequence = 0;
    double cost = 0.0;
};

inline MpcSolution mpc_solve_full(const TclState& st, const std::vector<double>& ref_traj,
                                  const ZohModel& zoh, const TclParams& p, const MpcConfig& cfg) {
    if (cfg.M < 1)
        throw std::invalid_argument("mpc_solve: horizon must be at least 1");
    if (cfg.M > 20)
        throw std::invalid_argument("mpc_solve: horizon above 20 exceeds the enumeration guard");
    if (ref_traj.size() != static_cast<std::size_t>(cfg.M))
        throw std::invalid_argument("mpc_solve: reference trajectory length must equal the horizon");

    const std::uint32_t n_seq = 1u << cfg.M;
    MpcSolution best;
    bool have = false;
    for (std::uint32_t seq = 0; seq < n_seq; ++seq) {
        double x = st.x;
        double cost = 0.0;
        for (int k = 1; k <= cfg.M; ++k) {
            const int u = static_cast<int>((seq >> (cfg.M - k)) & 1u);
            x = zoh.A * x + zoh.B * static_cast<double>(u) + zoh.E * p.x_e;
            cost += detail::mpc_stage_cost(x, u, ref_traj[static_cast<std::size_t>(k - 1)], cfg);
        }
        // Strict comparison keeps the lexicographically smallest (OFF-heavy)
        // sequence on ties.
        if (!have || cost < best.cost) {
            best.cost = cost;
            best.sequence = seq;
            best.u_first = static_cast<int>((seq >> (cfg.M - 1)) & 1u);
            have = true;
        }
    }
    return best;
}

/// First control of the optimal binary sequence over the horizon.
inline int mpc_solve(const TclState& st, const std::vector<double>& ref_traj,
                     const ZohModel& zoh, const TclParams& p, const MpcConfig& cfg) {
    return mpc_solve_full(st, ref_traj, zoh, p, cfg).u_first;
}

}  // namespace tclflock

#endif
