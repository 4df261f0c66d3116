#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "tclflock/estimation.hpp"
#include "tclflock/rng.hpp"

using namespace tclflock;

namespace {

// Small synthetic record whose truth is produced by the solver itself.
RunRecord synthetic_record(double beta_true, std::size_t periods) {
    RunRecord rec;
    rec.grid = make_grid(14.0, 26.0, 60);
    rec.N = 100;
    rec.dt_ctrl = 1.0;
    rec.params = TclParams{};

    const Grid& g = rec.grid;
    rec.w0.assign(static_cast<std::size_t>(g.nx), 0.0);
    rec.v0.assign(static_cast<std::size_t>(g.nx), 0.0);
    for (int j = 0; j < g.nx; ++j) {
        const double x = g.center(j);
        rec.w0[static_cast<std::size_t>(j)] =
            4.0 * std::exp(-2.0 * (x - 20.2) * (x - 20.2));
        rec.v0[static_cast<std::size_t>(j)] =
            6.0 * std::exp(-2.0 * (x - 20.8) * (x - 20.8));
    }

    Rng rng(5);
    for (std::size_t k = 0; k < periods; ++k) {
        rec.u_series.push_back(rng.uniform(-0.3, 0.3));
        SwitchFlux d(g);
        const int j1 = 20 + static_cast<int>(rng.uniform01() * 20);
        const int j2 = 20 + static_cast<int>(rng.uniform01() * 20);
        d.values[static_cast<std::size_t>(j1)] += 2.0;
        d.values[static_cast<std::size_t>(j2)] -= 2.0;
        rec.delta_series.push_back(d);
    }

    FpeParams fp;
    fp.beta = beta_true;
    fp.p = rec.params;
    DensityField f0(g);
    f0.w = rec.w0;
    f0.v = rec.v0;
    const auto traj = fpe_solve(f0, fp, rec.u_series, rec.delta_series, rec.dt_ctrl, periods);
    for (std::size_t k = 1; k < traj.size(); ++k) {
        rec.w_truth.push_back(traj[k].w);
        rec.v_truth.push_back(traj[k].v);
        rec.non_truth.push_back(traj[k].mass_on());
        rec.noff_truth.push_back(traj[k].mass_off());
    }
    return rec;
}

}  // namespace

TEST_CASE("nme on total counts") {
    const int N = 100;
    const std::vector<double> on{40, 42, 44};
    const std::vector<double> off{60, 58, 56};

    SECTION("identical series") {
        CHECK(nme(on, off, on, off, N) == 0.0);
    }
    SECTION("constant offset on the ON channel") {
        std::vector<double> shifted = on;
        for (auto& x : shifted) x += 5.0;
        CHECK(nme(shifted, off, on, off, N) == Catch::Approx(5.0 / (2.0 * N)).epsilon(1e-14));
    }
    SECTION("consistent permutation leaves the mean unchanged") {
        const std::vector<double> on_p{44, 40, 42};
        const std::vector<double> off_p{56, 60, 58};
        std::vector<double> on_t{on[2], on[0], on[1]};
        std::vector<double> off_t{off[2], off[0], off[1]};
        CHECK(nme(on_p, off_p, on_t, off_t, N) == nme(on, off, on, off, N));
    }
    SECTION("empty series rejected") {
        CHECK_THROWS_AS(nme({}, {}, {}, {}, N), std::invalid_argument);
    }
}

TEST_CASE("estimate_beta") {
    SECTION("single candidate returns it") {
        const RunRecord rec = synthetic_record(0.1, 5);
        const BetaEstimate est = estimate_beta(rec, {0.07});
        CHECK(est.beta_star == 0.07);
        REQUIRE(est.nme_curve.size() == 1);
    }

    SECTION("self-consistency: recovers the generating beta") {
        for (double beta_true : {0.05, 0.1, 0.15}) {
            const RunRecord rec = synthetic_record(beta_true, 8);
            const BetaEstimate est = estimate_beta(rec, {0.0, 0.05, 0.1, 0.15, 0.2});
            CHECK(est.beta_star == beta_true);
        }
    }

    SECTION("parallel candidate evaluation matches serial") {
        const RunRecord rec = synthetic_record(0.1, 6);
        const std::vector<double> betas{0.0, 0.05, 0.1, 0.15, 0.2};
        const BetaEstimate a = estimate_beta(rec, betas, 1);
        const BetaEstimate b = estimate_beta(rec, betas, 3);
        CHECK(a.beta_star == b.beta_star);
        for (std::size_t i = 0; i < betas.size(); ++i)
            CHECK(a.nme_curve[i] == b.nme_curve[i]);
    }

    SECTION("guards") {
        const RunRecord rec = synthetic_record(0.1, 3);
        CHECK_THROWS_AS(estimate_beta(rec, {}), std::invalid_argument);
        CHECK_THROWS_AS(estimate_beta(rec, {-0.1}), std::invalid_argument);
    }
}
