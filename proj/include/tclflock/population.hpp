// Agent layer: sample a heterogeneous load population, advance every
// agent's MPC + exact dynamics through one control period, bin agent
// states into density fields, and record the switching flux.

#ifndef TCLFLOCK_POPULATION_HPP
#define TCLFLOCK_POPULATION_HPP

#include <cstddef>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tclflock/core.hpp"
#include "tclflock/grid.hpp"
#include "tclflock/mpc.hpp"
#include "tclflock/rng.hpp"

namespace tclflock {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PopulationSpec {
    int N = 1000;
    double C_mean = 10.0, C_std = 3.0, C_lo = 4.0, C_hi = 16.0;   // [kWh/degC]
    double Rmpc_mean = 10.0, Rmpc_std = 2.0, Rmpc_lo = 6.0, Rmpc_hi = 14.0;
    double delay_hi = 0.0;  // max desynchronization delay [h]
    TclParams base;         // template; C is replaced per agent
    MpcConfig mpc;          // template; R_mpc and ref_delay replaced per agent
    std::uint64_t seed = 1;
};

struct SwitchEvent {
    double t = 0.0;   // [h]
    double x = 0.0;   // temperature at the switch decision [degC]
    int dir = 0;      // +1 OFF->ON, -1 ON->OFF
};

struct Agent {
    TclParams p;
    MpcConfig mpc;
    ZohModel zoh;       // cached for the shared sampling period Ts
    TclState st;
    double phase = 0.0; // decision-clock offset as a fraction of Ts in [0,1)
};

/// Draw per-agent parameters: C and R_mpc from truncated normals (rejection
/// sampling), ref_delay uniform on [0, delay_hi], and a decision-clock
/// phase uniform in [0, Ts). Deterministic given the seed; each quantity
/// draws from its own forked stream so the draws of one never shift
/// another. The clock phases stagger the MPC sampling instants across the
/// population: with a shared clock the binary duty patterns lock to the
/// common grid and the aggregate develops large collective beats.
inline std::vector<Agent> sample_population(const PopulationSpec& spec, double Ts) {
    if (spec.N < 1) throw ConfigError("sample_population: population size must be >= 1");
    if (!spec.base.valid()) throw ConfigError("sample_population: invalid load parameters");
    if (!(spec.C_lo > 0.0)) throw ConfigError("sample_population: C_lo must be positive");
    if (!(spec.C_lo < spec.C_hi) || !(spec.Rmpc_lo < spec.Rmpc_hi))
        throw ConfigError("sample_population: degenerate truncation bounds");
    if (spec.delay_hi < 0.0) throw ConfigError("sample_population: negative delay bound");
    if (spec.mpc.Q_mpc < 0.0 || spec.mpc.R_mpc < 0.0 || spec.mpc.M < 1 ||
        !(spec.mpc.band_lo > 0.0) || !(spec.mpc.band_hi > 0.0))
        throw ConfigError("sample_population: invalid MPC configuration");

    Rng master(spec.seed);
    Rng rc = master.fork("capacitance");
    Rng rr = master.fork("rmpc");
    Rng rd = master.fork("delay");
    Rng rp = master.fork("phase");

    std::vector<Agent> agents(static_cast<std::size_t>(spec.N));
    for (auto& a : agents) {
        a.p = spec.base;
        a.p.C = (spec.C_std == 0.0) ? spec.C_mean
                                    : rc.trunc_normal(spec.C_mean, spec.C_std, spec.C_lo, spec.C_hi);
        a.mpc = spec.mpc;
        a.mpc.R_mpc = (spec.Rmpc_std == 0.0)
                          ? spec.Rmpc_mean
                          : rr.trunc_normal(spec.Rmpc_mean, spec.Rmpc_std, spec.Rmpc_lo, spec.Rmpc_hi);
        a.mpc.ref_delay = (spec.delay_hi == 0.0) ? 0.0 : rd.uniform(0.0, spec.delay_hi);
        a.phase = rp.uniform01();
        a.zoh = make_zoh(a.p, Ts);
        a.st = TclState{};
    }
    return agents;
}

/// Place every agent at a fresh initial state: temperature uniform in
/// [x_ref0 - band, x_ref0 + band], ON with the steady duty probability at
/// the set-point. Deterministic given the seed.
inline void init_states(std::vector<Agent>& agents, double x_ref0, double band,
                        std::uint64_t seed) {
    Rng master(seed);
    Rng rx = master.fork("init-x");
    Rng ru = master.fork("init-u");
    for (auto& a : agents) {
        a.st.x = rx.uniform(x_ref0 - band, x_ref0 + band);
        a.st.u = ru.bernoulli(duty_ratio(x_ref0, a.p)) ? 1 : 0;
        a.st.t = 0.0;
    }
}

/// Counts per bin divided by the bin width; out-of-domain temperatures clamp
/// into the end bins. Counts are exact integers before the division.
inline DensityField bin_density(const std::vector<Agent>& agents, const Grid& grid) {
    DensityField f(grid);
    std::vector<long> on(static_cast<std::size_t>(grid.nx), 0);
    std::vector<long> off(static_cast<std::size_t>(grid.nx), 0);
    for (const auto& a : agents) {
        const int j = grid.bin(a.st.x);
        if (a.st.u == 1) ++on[static_cast<std::size_t>(j)];
        else ++off[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < grid.nx; ++j) {
        f.w[static_cast<std::size_t>(j)] = static_cast<double>(on[static_cast<std::size_t>(j)]) / grid.dx;
        f.v[static_cast<std::size_t>(j)] = static_cast<double>(off[static_cast<std::size_t>(j)]) / grid.dx;
    }
    if (!agents.empty()) f.t = agents.front().st.t;
    return f;
}

/// Run every agent through one control period: per sub-step of length Ts,
/// sample its delayed reference, solve the MPC, emit a switch event when
/// the decision flips the state (stamped with the temperature the MPC saw),
/// then advance the exact dynamics. Agents are independent, so the work
/// fans out across workers; events are merged in agent order, which keeps
/// parallel runs bit-identical to serial ones.
inline std::vector<SwitchEvent> advance_population(std::vector<Agent>& agents,
                                                   const RefSignal& ref, double dt_ctrl,
                                                   double Ts, int workers = 1) {
    if (agents.empty()) return {};
    if (!(Ts > 0.0) || !(dt_ctrl > 0.0))
        throw std::invalid_argument("advance_population: periods must be positive");
    const int nsub = static_cast<int>(dt_ctrl / Ts + 0.5);
    if (nsub < 1 || std::abs(nsub * Ts - dt_ctrl) > 1e-9 * dt_ctrl)
        throw std::invalid_argument("advance_population: dt_ctrl must be an integer multiple of Ts");

    std::vector<std::vector<SwitchEvent>> per_agent(agents.size());

    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Agent& a = agents[i];
            if (a.zoh.Ts != Ts) a.zoh = make_zoh(a.p, Ts);
            // lead-in to this agent's first decision instant of the window
            const double lead = a.phase * Ts;
            if (lead > 0.0) a.st = step_exact(a.st, a.st.u, a.p, lead);
            for (int s = 0; s < nsub; ++s) {
                const auto traj = desync_reference(ref, a.mpc, a.st.t, Ts);
                const int u = mpc_solve(a.st, traj, a.zoh, a.p, a.mpc);
                if (u != a.st.u)
                    per_agent[i].push_back(SwitchEvent{a.st.t, a.st.x, u == 1 ? +1 : -1});
                // the last decided control runs out the window remainder;
                // its tail continues in the next window's lead-in
                const double span = (s + 1 < nsub) ? Ts : Ts - lead;
                a.st = step_exact(a.st, u, a.p, span);
            }
        }
    };

    if (workers <= 1 || agents.size() < 2) {
        run_range(0, agents.size());
    } else {
        const std::size_t n = agents.size();
        const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
        std::vector<std::thread> pool;
        pool.reserve(nw);
        for (std::size_t w = 0; w < nw; ++w) {
            const std::size_t lo = n * w / nw;
            const std::size_t hi = n * (w + 1) / nw;
            pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::vector<SwitchEvent> events;
    for (auto& lst : per_agent)
        events.insert(events.end(), lst.begin(), lst.end());
    return events;
}

/// Net OFF->ON flux density per bin over one period. Integer event counts
/// accumulate per bin before any division, so the result is independent of
/// event order.
inline SwitchFlux record_flux(const std::vector<SwitchEvent>& events, const Grid& grid,
                              double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("record_flux: period must be positive");
    SwitchFlux flux(grid);
    std::vector<long> net(static_cast<std::size_t>(grid.nx), 0);
    for (const auto& ev : events)
        net[static_cast<std::size_t>(grid.bin(ev.x))] += ev.dir;
    for (int j = 0; j < grid.nx; ++j)
        flux.values[static_cast<std::size_t>(j)] =
            static_cast<double>(net[static_cast<std::size_t>(j)]) / (grid.dx * dt);
    return flux;
}

struct PowerOutput {
    double y = 0.0;        // weighted output, (P/eta) * sum (a x + b) w dx
    double P_plain = 0.0;  // plain power [kW], (P/eta) * N_on
};

/// Weighted and plain aggregate power of the ON field by the midpoint rule.
inline PowerOutput aggregate_power(const DensityField& field, const TclParams& p, double a,
                                   double b) {
    if (a == 0.0) throw ConfigError("aggregate_power: weighting slope a must be nonzero");
    double wy = 0.0, wn = 0.0;
    for (int j = 0; j < field.grid.nx; ++j) {
        const double wj = field.w[static_cast<std::size_t>(j)];
        wy += (a * field.grid.center(j) + b) * wj;
        wn += wj;
    }
    PowerOutput out;
    out.y = (p.P / p.eta) * wy * field.grid.dx;
    out.P_plain = (p.P / p.eta) * wn * field.grid.dx;
    return out;
}

}  // namespace tclflock

#endif
