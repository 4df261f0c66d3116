// Uniform cell-centered temperature grid and the fields living on it:
// ON/OFF load densities and the per-bin switching flux.

#ifndef TCLFLOCK_GRID_HPP
#define TCLFLOCK_GRID_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace tclflock {

struct Grid {
    double x_lo = 14.0;
    double x_hi = 26.0;
    int nx = 120;
    double dx = 0.1;

    double center(int j) const { return x_lo + (j + 0.5) * dx; }
    double face(int f) const { return x_lo + f * dx; }  // f = 0..nx

    /// Bin index of a temperature, clamped into the end cells.
    int bin(double x) const {
        if (x <= x_lo) return 0;
        if (x >= x_hi) return nx - 1;
        int j = static_cast<int>((x - x_lo) / dx);
        if (j > nx - 1) j = nx - 1;
        return j;
    }

    bool same_as(const Grid& o) const {
        return x_lo == o.x_lo && x_hi == o.x_hi && nx == o.nx;
    }
};

inline Grid make_grid(double x_lo, double x_hi, int nx) {
    if (!(x_hi > x_lo))
        throw std::invalid_argument("make_grid: domain bounds must satisfy x_hi > x_lo");
    if (nx < 4)
        throw std::invalid_argument("make_grid: need at least 4 cells");
    Grid g;
    g.x_lo = x_lo;
    g.x_hi = x_hi;
    g.nx = nx;
    g.dx = (x_hi - x_lo) / nx;
    return g;
}

/// Discretized pair of load densities [loads/degC] over a grid. Densities
/// are absolute counts per degC, not probabilities.
struct DensityField {
    Grid grid;
    std::vector<double> w;  // ON
    std::vector<double> v;  // OFF
    double t = 0.0;         // [h]

    explicit DensityField(const Grid& g = Grid{})
        : grid(g),
          w(static_cast<std::size_t>(g.nx), 0.0),
          v(static_cast<std::size_t>(g.nx), 0.0) {}

    double mass_on() const {
        double s = 0.0;
        for (double x : w) s += x;
        return s * grid.dx;
    }
    double mass_off() const {
        double s = 0.0;
        for (double x : v) s += x;
        return s * grid.dx;
    }
    double mass_total() const { return mass_on() + mass_off(); }
};

/// Net OFF->ON switching rate density per bin [loads/degC/h], recorded over
/// one control period. Positive values feed the ON field and drain OFF.
struct SwitchFlux {
    Grid grid;
    std::vector<double> values;

    explicit SwitchFlux(const Grid& g = Grid{})
        : grid(g), values(static_cast<std::size_t>(g.nx), 0.0) {}

    bool zero() const {
        for (double d : values)
            if (d != 0.0) return false;
        return true;
    }

    /// Integral of the flux density over the domain [loads/h].
    double net_rate() const {
        double s = 0.0;
        for (double d : values) s += d;
        return s * grid.dx;
    }
};

}  // namespace tclflock

#endif
