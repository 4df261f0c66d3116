#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tclflock/core.hpp"

using namespace tclflock;

namespace {
TclParams benchmark_params() { return TclParams{}; }  // the standard air-conditioner set
}

TEST_CASE("drift_on roots and values") {
    const TclParams p = benchmark_params();
    CHECK(drift_on(4.0, p) == 0.0);  // root at x_e - R P for cooling
    CHECK(drift_on(20.0, p) == Catch::Approx(-0.8).margin(1e-15));

    TclParams heater = p;
    heater.s = +1;
    heater.P = 0.0;  // degenerate limit: no injected power
    CHECK(drift_on(heater.x_e, heater) == 0.0);
}

TEST_CASE("drift_off values and symmetry about ambient") {
    const TclParams p = benchmark_params();
    CHECK(drift_off(32.0, p) == 0.0);
    CHECK(drift_off(20.0, p) == Catch::Approx(0.6).margin(1e-15));
    CHECK(drift_off(44.0, p) == Catch::Approx(-0.6).margin(1e-15));
}

TEST_CASE("make_zoh closed form") {
    const TclParams p = benchmark_params();

    SECTION("benchmark values at Ts = 0.1 h") {
        const ZohModel m = make_zoh(p, 0.1);
        CHECK(m.A == Catch::Approx(0.9950124791926823).epsilon(1e-14));
        CHECK(m.E == Catch::Approx(0.00498752080731768).epsilon(1e-12));
        CHECK(m.B == Catch::Approx(-0.13965058260489505).epsilon(1e-12));
    }
    SECTION("A + E = 1 exactly, any period") {
        for (double Ts : {1e-6, 0.05, 0.1, 1.0, 10.0}) {
            const ZohModel m = make_zoh(p, Ts);
            CHECK(m.A + m.E == 1.0);
        }
    }
    SECTION("short-period limit") {
        const ZohModel m = make_zoh(p, 1e-10);
        CHECK(m.A == Catch::Approx(1.0).margin(1e-11));
        CHECK(std::abs(m.B) < 1e-9);
        CHECK(m.E < 1e-11);
    }
    SECTION("invalid period rejected") {
        CHECK_THROWS_AS(make_zoh(p, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(make_zoh(p, -0.1), std::invalid_argument);
    }
}

TEST_CASE("step_exact fixed point and benchmark value") {
    const TclParams p = benchmark_params();

    TclState st{p.x_e, 0, 0.0};
    const TclState amb = step_exact(st, 0, p, 3.7);
    CHECK(amb.x == Catch::Approx(p.x_e).epsilon(1e-14));
    CHECK(amb.t == Catch::Approx(3.7));

    st = TclState{20.5, 0, 0.0};
    const TclState next = step_exact(st, 0, p, 0.1);
    CHECK(next.x == Catch::Approx(20.557356489284153).epsilon(1e-13));
    CHECK(next.u == 0);
}

TEST_CASE("step_exact semigroup property") {
    const TclParams p = benchmark_params();
    for (int u : {0, 1}) {
        TclState a{20.9, u, 0.0};
        TclState b = a;
        const double dt = 0.07;
        const int n = 16;
        for (int i = 0; i < n; ++i) a = step_exact(a, u, p, dt);
        b = step_exact(b, u, p, n * dt);
        CHECK(a.x == Catch::Approx(b.x).epsilon(1e-12));
    }
}

TEST_CASE("duty ratio at benchmark set-points") {
    const TclParams p = benchmark_params();
    CHECK(duty_ratio(20.5, p) == Catch::Approx(0.4107142857142857).epsilon(1e-13));
    CHECK(duty_ratio(19.0, p) == Catch::Approx(0.4642857142857143).epsilon(1e-13));
}
