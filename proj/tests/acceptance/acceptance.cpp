// Acceptance suite: runs the shipped experiment presets and the numerical
// oracles end to end, printing one pass/fail line per criterion. Exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mpc_oracle.hpp"
#include "tclflock/io.hpp"
#include "tclflock/rng.hpp"
#include "tclflock/scenario.hpp"

using namespace tclflock;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& what, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

struct Timeseries {
    std::vector<std::string> cols;
    std::vector<std::vector<double>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return i;
        throw std::runtime_error("missing column " + name);
    }
};

Timeseries load_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Timeseries ts;
    std::string line;
    std::getline(in, line);
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const std::size_t comma = line.find(',', pos);
        ts.cols.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(ts.cols.size());
        const char* p = line.c_str();
        char* end = nullptr;
        for (std::size_t i = 0; i < ts.cols.size(); ++i) {
            row.push_back(std::strtod(p, &end));
            p = (*end == ',') ? end + 1 : end;
        }
        ts.rows.push_back(std::move(row));
    }
    return ts;
}

nlohmann::json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- criterion 1: unforced mass conservation ------------------------------

void criterion_mass_conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    const Grid g = make_grid(14.0, 26.0, 120);
    FpeParams fp;  // benchmark drift, beta = 0.1
    DensityField f(g);
    for (int j = 0; j < g.nx; ++j) {
        const double x = g.center(j);
        f.w[static_cast<std::size_t>(j)] = 410.0 * std::exp(-2.0 * (x - 20.2) * (x - 20.2));
        f.v[static_cast<std::size_t>(j)] = 590.0 * std::exp(-2.0 * (x - 20.8) * (x - 20.8));
    }
    const double m0 = f.mass_total();
    const double dt = cfl_dt(g, fp, 0.0);
    const SwitchFlux none(g);
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
        f = fpe_step(f, fp, 0.0, none, dt);
        worst = std::max(worst, std::abs(f.mass_total() - m0) / m0);
    }
    const double wall = elapsed_s(t0);
    const bool ok = worst <= 1e-10 && wall < 5.0;
    report(1, ok, "unforced mass conservation over 1e4 steps",
           fmt("max rel drift %.3e <= 1e-10, %.2fs < 5s", worst, wall));
}

// ---- criterion 3: error-dynamics closed form ------------------------------

void criterion_error_oracle() {
    Rng rng(424242);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const double k0 = rng.uniform(0.02, 50.0);
        const double dt = rng.uniform(0.001, 0.5);
        const double e0 = rng.uniform(-100.0, 100.0);
        std::vector<double> gammas(25);
        for (auto& gm : gammas) gm = rng.uniform(-80.0, 80.0);

        double e = e0;
        for (double gm : gammas) e = error_update(e, k0, gm, dt);

        // closed form of the same piecewise-constant disturbance
        const double T = gammas.size() * dt;
        double exact = e0 * std::exp(-k0 * T);
        for (std::size_t s = 0; s < gammas.size(); ++s) {
            const double a = s * dt, b = a + dt;
            exact += gammas[s] / k0 * (std::exp(-k0 * (T - b)) - std::exp(-k0 * (T - a)));
        }
        worst = std::max(worst, std::abs(e - exact) / std::max(std::abs(exact), 1e-9));
    }
    report(3, worst <= 1e-12, "error update matches the closed-form solution",
           fmt("100 draws, max rel err %.3e <= 1e-12", worst));
}

// ---- criterion 9: MPC brute-force equivalence ------------------------------

void criterion_mpc_bruteforce() {
    Rng rng(987654321);
    const TclParams base;
    int exact = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        TclParams p = base;
        p.C = rng.uniform(4.0, 16.0);
        MpcConfig cfg;
        cfg.M = 1 + static_cast<int>(rng.uniform01() * 5.0);
        if (cfg.M > 5) cfg.M = 5;
        cfg.Q_mpc = rng.uniform(0.0, 300.0);
        cfg.R_mpc = rng.uniform(0.0, 50.0);
        cfg.band_lo = rng.uniform(0.2, 0.8);
        cfg.band_hi = rng.uniform(0.2, 0.8);
        cfg.violation_penalty = rng.uniform(1e3, 1e7);
        const double Ts = rng.uniform(0.02, 1.5);
        const ZohModel zoh = make_zoh(p, Ts);
        const TclState st{rng.uniform(17.0, 24.0), rng.bernoulli(0.5) ? 1 : 0, 0.0};
        std::vector<double> ref(static_cast<std::size_t>(cfg.M));
        for (auto& r : ref) r = rng.uniform(18.5, 21.5);

        const MpcSolution sol = mpc_solve_full(st, ref, zoh, p, cfg);
        const auto oracle = tclflock_test::oracle_solve(st, ref, zoh, p, cfg);
        if (sol.cost == oracle.cost && sol.u_first == oracle.seq.front()) ++exact;
    }
    report(9, exact == trials, "MPC equals the independent enumerator, bit-for-bit",
           fmt("%d/%d instances exact", exact, trials));
}

// ---- criterion 10: heat-kernel variance growth -----------------------------

void criterion_diffusion_oracle() {
    const Grid g = make_grid(14.0, 26.0, 240);
    FpeParams fp;
    fp.beta = 0.1;
    fp.zero_drift = true;
    DensityField f0(g);
    double sum = 0.0;
    for (int j = 0; j < g.nx; ++j) {
        const double x = g.center(j);
        f0.w[static_cast<std::size_t>(j)] = std::exp(-0.5 * (x - 20.0) * (x - 20.0) / 0.09);
        sum += f0.w[static_cast<std::size_t>(j)];
    }
    for (auto& w : f0.w) w *= 1000.0 / (sum * g.dx);

    auto variance = [&](const DensityField& f) {
        double m0 = 0.0, m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < g.nx; ++j) {
            m0 += f.w[static_cast<std::size_t>(j)];
            m1 += g.center(j) * f.w[static_cast<std::size_t>(j)];
        }
        const double mu = m1 / m0;
        for (int j = 0; j < g.nx; ++j) {
            const double d = g.center(j) - mu;
            m2 += d * d * f.w[static_cast<std::size_t>(j)];
        }
        return m2 / m0;
    };

    const double var0 = variance(f0);
    const double t_end = 0.5;
    const std::size_t steps = 10;
    const auto traj = fpe_solve(f0, fp, std::vector<double>(steps, 0.0),
                                std::vector<SwitchFlux>(steps, SwitchFlux(g)), t_end / steps,
                                steps);
    const double var1 = variance(traj.back());
    const double expected = var0 + 2.0 * fp.beta * t_end;
    const double rel = std::abs(var1 - expected) / expected;
    report(10, rel < 0.02, "heat-kernel variance growth at Nx=240",
           fmt("sigma^2: %.6f vs %.6f, rel err %.4f < 0.02", var1, expected, rel));
}

// ---- closed-loop criteria from the step preset (2, 4, 5, 6) ----------------

struct ClosedLoopResults {
    nlohmann::json summary;
    Timeseries ts;
    double wall = 0.0;
};

ClosedLoopResults run_closed_loop(const fs::path& preset_dir, const fs::path& out_dir, int n,
                                  double k0_cfg) {
    ScenarioConfig cfg = load_scenario(preset_dir / "fig4_step.json");
    cfg.population.N = n;
    cfg.k0_cfg = k0_cfg;
    const auto t0 = std::chrono::steady_clock::now();
    run_scenario(cfg, out_dir);
    ClosedLoopResults r;
    r.wall = elapsed_s(t0);
    r.summary = load_json(out_dir / "summary.json");
    r.ts = load_csv(out_dir / "timeseries.csv");
    return r;
}

void criterion_ledger(const ClosedLoopResults& r) {
    const double err = r.summary.at("ledger_rel_err_max").get<double>();
    report(2, err <= 1e-12, "forced mass ledger holds every period",
           fmt("max rel mismatch %.3e <= 1e-12", err));
}

void criterion_bound_audit(const ClosedLoopResults& r) {
    // recomputed from the logged series rather than trusting the run's verdict
    const double k0 = r.summary.at("k0_eff_per_hour").get<double>();
    const double t0h = r.summary.at("t0_hours").get<double>();
    const double y_max = r.summary.at("power_norm_kw").get<double>();
    const std::size_t ct = r.ts.col("t"), ce = r.ts.col("e"), cg = r.ts.col("Gamma");
    double gamma_hat = 0.0;
    for (const auto& row : r.ts.rows) gamma_hat = std::max(gamma_hat, std::abs(row[cg]));
    const double e0 = std::abs(r.ts.rows.front()[ce]);
    double worst = -1e300;
    for (const auto& row : r.ts.rows) {
        const double t_h = row[ct] * t0h;
        const double bound = error_bound(e0, gamma_hat, k0, t_h) + 1e-6 * y_max;
        worst = std::max(worst, std::abs(row[ce]) - bound);
    }
    const bool ok = worst <= 0.0 && r.wall < 120.0;
    report(4, ok, "measured error within the disturbance envelope",
           fmt("margin %.3e (<=0 passes), Gamma_hat %.0f, %.0fs < 120s", worst, gamma_hat,
               r.wall));
}

void criterion_step_tracking(const ClosedLoopResults& r, int criterion_n, double tol,
                             const char* label) {
    // hourly-metered plain-power error over the assessment window [20, 30]
    const std::size_t ct = r.ts.col("t");
    const std::size_t cm = r.ts.col("P_plain_mean_norm");
    const std::size_t cd = r.ts.col("P_d_norm");
    std::vector<double> per_period;
    for (std::size_t i = 0; i + 1 < r.ts.rows.size(); ++i) {  // last row has no period
        const auto& row = r.ts.rows[i];
        if (row[ct] >= 20.0) per_period.push_back(row[cm] - row[cd]);
    }
    // one nominal hour = 0.05 normalized = 20 control periods of the preset
    const std::size_t win = 20;
    double sup = 0.0;
    for (std::size_t i = 0; i + win <= per_period.size(); i += win) {
        double mean = 0.0;
        for (std::size_t k = 0; k < win; ++k) mean += per_period[i + k];
        mean /= static_cast<double>(win);
        sup = std::max(sup, std::abs(mean));
    }
    report(criterion_n, sup < tol, fmt("step tracking, %s", label),
           fmt("sup hourly |err| %.4f < %.3f over t in [20,30]", sup, tol));
}

void criterion_deadband(const ClosedLoopResults& r) {
    const double frac = r.summary.at("deadband_compliance").get<double>();
    const long trips = r.summary.at("guard_trips").get<long>();
    report(6, frac >= 0.99 && trips == 0, "deadband compliance outside settle windows",
           fmt("%.5f >= 0.99, guard trips %ld", frac, trips));
}

// ---- criterion 7: desynchronization peak reduction --------------------------

void criterion_desync(const fs::path& preset_dir, const fs::path& out_dir) {
    ScenarioConfig cfg = load_scenario(preset_dir / "fig2_desync.json");
    const RunSummary s = compare_desync(cfg, out_dir);
    const double ratio = s.json.at("peak_ratio").get<double>();
    report(7, ratio <= 0.8, "desynchronized MPC reduces the pickup peak",
           fmt("peak ratio %.3f <= 0.8 (uniform %.3f, desync %.3f)", ratio,
               s.json.at("peak_uniform").get<double>(),
               s.json.at("peak_desync").get<double>()));
}

// ---- criterion 8: diffusivity estimation ------------------------------------

void criterion_beta(const fs::path& preset_dir, const fs::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    ScenarioConfig gen = load_scenario(preset_dir / "fig3_beta.json");
    run_scenario(gen, out_dir / "data");
    const RunRecord rec = load_run_record(out_dir / "data" / "run_archive.json");

    std::vector<double> betas;
    for (int i = 0; i <= 20; ++i) betas.push_back(0.01 * i);

    // solver self-consistency: regenerate the truth with the solver itself
    bool self_ok = true;
    std::string self_detail;
    for (int i_true : {2, 10, 18}) {
        const double beta_true = 0.01 * i_true;
        RunRecord synth = rec;
        FpeParams fp;
        fp.beta = beta_true;
        fp.p = rec.params;
        DensityField f0(rec.grid);
        f0.w = rec.w0;
        f0.v = rec.v0;
        const auto traj =
            fpe_solve(f0, fp, rec.u_series, rec.delta_series, rec.dt_ctrl, rec.periods());
        synth.w_truth.clear();
        synth.v_truth.clear();
        synth.non_truth.clear();
        synth.noff_truth.clear();
        for (std::size_t k = 1; k < traj.size(); ++k) {
            synth.w_truth.push_back(traj[k].w);
            synth.v_truth.push_back(traj[k].v);
            synth.non_truth.push_back(traj[k].mass_on());
            synth.noff_truth.push_back(traj[k].mass_off());
        }
        const BetaEstimate est = estimate_beta(synth, betas);
        if (est.beta_star != beta_true) self_ok = false;
        self_detail += fmt("%g->%g ", beta_true, est.beta_star);
    }

    // agent-generated data
    const BetaEstimate est = estimate_beta(rec, betas);
    double lo_min = 1e300, lo_max = -1e300, hi_min = 1e300, hi_max = -1e300;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (betas[i] <= 0.1 + 1e-12) {
            lo_min = std::min(lo_min, est.nme_curve[i]);
            lo_max = std::max(lo_max, est.nme_curve[i]);
        }
        if (betas[i] >= 0.1 - 1e-12) {
            hi_min = std::min(hi_min, est.nme_curve[i]);
            hi_max = std::max(hi_max, est.nme_curve[i]);
        }
    }
    const bool window_ok = est.beta_star >= 0.05 - 1e-12 && est.beta_star <= 0.15 + 1e-12;
    const bool flat_ok = (lo_max - lo_min) < (hi_max - hi_min);
    const double wall = elapsed_s(t0);
    const bool ok = self_ok && window_ok && flat_ok && wall < 600.0;
    report(8, ok, "diffusivity estimation",
           fmt("self-consistency %s; agent beta* %.2f in [0.05,0.15]; flat-below "
               "(%.4f < %.4f); %.0fs < 600s",
               self_detail.c_str(), est.beta_star, lo_max - lo_min, hi_max - hi_min, wall));
}

}  // namespace

int main(int argc, char** argv) {
    fs::path out_dir = "acceptance_out";
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) out_dir = argv[i + 1];
    }
    const fs::path preset_dir = TCLFLOCK_PRESET_DIR;
    fs::create_directories(out_dir);

    std::printf("acceptance suite (presets: %s)\n", preset_dir.string().c_str());

    try {
        criterion_mass_conservation();

        // one full benchmark closed-loop run feeds criteria 2, 4, 5, 6
        const ClosedLoopResults full =
            run_closed_loop(preset_dir, out_dir / "fig4_full", 1000, 5600.0);
        criterion_ledger(full);
        criterion_error_oracle();
        criterion_bound_audit(full);
        criterion_step_tracking(full, 5, 0.025, "benchmark scale N=1000");

        // desk-scale variant at the same effective gain
        const ClosedLoopResults desk =
            run_closed_loop(preset_dir, out_dir / "fig4_desk", 200, 1120.0);
        criterion_step_tracking(desk, 5, 0.04, "desk scale N=200");

        criterion_deadband(full);
        criterion_desync(preset_dir, out_dir / "fig2");
        criterion_beta(preset_dir, out_dir / "fig3");
        criterion_mpc_bruteforce();
        criterion_diffusion_oracle();
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "acceptance suite aborted: %s\n", ex.what());
        return 2;
    }

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
