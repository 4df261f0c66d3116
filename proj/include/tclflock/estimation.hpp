// Diffusion-coefficient estimation by grid search: replay the recorded
// (set-point rate, switching flux) inputs through the Fokker-Planck solver
// for each candidate beta and score the solution against the binned agent
// truth.

#ifndef TCLFLOCK_ESTIMATION_HPP
#define TCLFLOCK_ESTIMATION_HPP

#include <cstddef>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tclflock/fpe.hpp"
#include "tclflock/grid.hpp"

namespace tclflock {

/// Everything a replay needs: initial densities, per-period inputs, and the
/// per-period agent truth (total counts and binned histograms).
struct RunRecord {
    Grid grid;
    std::vector<double> w0, v0;              // initial densities [loads/degC]
    std::vector<double> u_series;            // realized set-point rate per period [degC/h]
    std::vector<SwitchFlux> delta_series;    // recorded flux per period
    std::vector<double> non_truth, noff_truth;  // agent ON/OFF counts per period end
    std::vector<std::vector<double>> w_truth, v_truth;  // binned truth per period end
    double dt_ctrl = 1.0;                    // [h]
    int N = 0;
    TclParams params;

    std::size_t periods() const { return u_series.size(); }
};

/// Normalized mean absolute error of total ON/OFF counts.
inline double nme(const std::vector<double>& non_fpe, const std::vector<double>& noff_fpe,
                  const std::vector<double>& non_truth, const std::vector<double>& noff_truth,
                  int N) {
    if (non_fpe.empty()) throw std::invalid_argument("nme: empty series");
    if (non_fpe.size() != noff_fpe.size() || non_fpe.size() != non_truth.size() ||
        non_fpe.size() != noff_truth.size())
        throw std::invalid_argument("nme: series lengths differ");
    double acc = 0.0;
    for (std::size_t k = 0; k < non_fpe.size(); ++k)
        acc += std::abs(non_fpe[k] - non_truth[k]) + std::abs(noff_fpe[k] - noff_truth[k]);
    return acc / (2.0 * static_cast<double>(N) * static_cast<double>(non_fpe.size()));
}

/// Normalized mean absolute error of the per-bin ON/OFF counts (the count
/// distribution over temperature). This is the estimator's objective: the
/// total-count error is blind to beta because the conservative solver
/// reproduces total counts from the flux ledger exactly, for every beta.
inline double nme_binned(const std::vector<DensityField>& traj,
                         const std::vector<std::vector<double>>& w_truth,
                         const std::vector<std::vector<double>>& v_truth, int N) {
    if (traj.size() < 2) throw std::invalid_argument("nme_binned: empty trajectory");
    const std::size_t periods = traj.size() - 1;
    if (w_truth.size() != periods || v_truth.size() != periods)
        throw std::invalid_argument("nme_binned: truth length mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < periods; ++k) {
        const DensityField& f = traj[k + 1];
        const double dx = f.grid.dx;
        double l1 = 0.0;
        for (std::size_t j = 0; j < f.w.size(); ++j) {
            l1 += std::abs(f.w[j] - w_truth[k][j]);
            l1 += std::abs(f.v[j] - v_truth[k][j]);
        }
        acc += l1 * dx;
    }
    return acc / (2.0 * static_cast<double>(N) * static_cast<double>(periods));
}

struct BetaEstimate {
    double beta_star = 0.0;
    std::vector<double> betas;
    std::vector<double> nme_curve;
};

/// Replay the record once per candidate and return the argmin of the binned
/// error (ties resolve toward the smaller beta). Candidate solves are
/// independent; with workers > 1 they run in parallel and reduce by index,
/// so the result does not depend on the worker count.
inline BetaEstimate estimate_beta(const RunRecord& rec, const std::vector<double>& betas,
                                  int workers = 1) {
    if (betas.empty()) throw std::invalid_argument("estimate_beta: no candidates");
    for (double b : betas)
        if (b < 0.0) throw std::invalid_argument("estimate_beta: negative diffusivity candidate");
    if (rec.periods() == 0 || rec.delta_series.size() != rec.periods())
        throw std::invalid_argument("estimate_beta: inconsistent run record");

    DensityField f0(rec.grid);
    f0.w = rec.w0;
    f0.v = rec.v0;

    BetaEstimate out;
    out.betas = betas;
    out.nme_curve.assign(betas.size(), 0.0);

    auto eval = [&](std::size_t i) {
        FpeParams fp;
        fp.beta = betas[i];
        fp.p = rec.params;
        const auto traj = fpe_solve(f0, fp, rec.u_series, rec.delta_series, rec.dt_ctrl,
                                    rec.periods());
        out.nme_curve[i] = nme_binned(traj, rec.w_truth, rec.v_truth, rec.N);
    };

    if (workers <= 1 || betas.size() < 2) {
        for (std::size_t i = 0; i < betas.size(); ++i) eval(i);
    } else {
        const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), betas.size());
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nw; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < betas.size(); i += nw) eval(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < betas.size(); ++i) {
        if (out.nme_curve[i] < out.nme_curve[best] ||
            (out.nme_curve[i] == out.nme_curve[best] && betas[i] < betas[best]))
            best = i;
    }
    out.beta_star = betas[best];
    return out;
}

}  // namespace tclflock

#endif
