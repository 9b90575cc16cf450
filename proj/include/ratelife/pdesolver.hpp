#pragma once

// Explicit finite-difference solver for the reserve PDE
//   d/dt V_i = x V_i - g_i - sum_{j!=i} mu_ij (h_ij + V_j - V_i) - L V_i
// with generator L = drift * d/dx + x * d/dy + tau^2/2 * d^2/dx^2, marched
// backward from the terminal payoff. One spatial dimension (t,x) or two
// (t,x,y) with first-order upwind transport in y.
//
// Scheme notes, load-bearing for accuracy:
//  - Payoffs and running rates are sampled as cell averages via the two-point
//    midpoint rule (f(x-dx/4)+f(x+dx/4))/2. Second order for smooth data,
//    and a jump located exactly on a node contributes its half-cell mass 1/2,
//    which removes an O(dx) bias that node sampling would carry. Stored
//    terminal layers still hold the raw nodal payoff.
//  - Drift term: central difference where the cell Peclet number
//    |drift|*dx <= tau^2 (keeps second order), first-order upwind elsewhere
//    (keeps monotonicity). In reversed time the drift transports from the
//    upstream side x + dt*drift, so upwind means forward difference for
//    drift > 0.
//  - Boundaries in x: zero second derivative, V[0] = 2V[1] - V[2].
//  - y transport likewise upwinds from y + dt*x; one-sided at the y edges.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ratelife/common.hpp"
#include "ratelife/lifestate.hpp"
#include "ratelife/policy.hpp"
#include "ratelife/shortrate.hpp"

namespace ratelife::pdesolver {

struct Grid {
    Time t0 = 0.0, t1 = 0.0;
    std::size_t n_steps = 0;  // time steps over [t0, t1]
    Rate x_min = 0.0, x_max = 0.0;
    std::size_t n_x = 0;  // spatial nodes
    std::size_t store_every = 1;  // keep every k-th time layer (t0, t1 always)

    double dt() const { return (t1 - t0) / static_cast<double>(n_steps); }
    double dx() const { return (x_max - x_min) / static_cast<double>(n_x - 1); }
    Time t(std::size_t k) const { return t0 + dt() * static_cast<double>(k); }
    Rate x(std::size_t m) const { return x_min + dx() * static_cast<double>(m); }

    std::size_t nearest_x(double v) const {
        double idx = (v - x_min) / dx();
        auto m = static_cast<long>(std::lround(idx));
        m = std::clamp(m, 0l, static_cast<long>(n_x) - 1);
        return static_cast<std::size_t>(m);
    }
    /// Distance from v to the closest node; callers snap thresholds onto
    /// nodes and report this.
    double snap_distance(double v) const { return std::abs(x(nearest_x(v)) - v); }

    void validate() const {
        if (!(t1 > t0)) throw DomainError("Grid: requires t1 > t0");
        if (n_steps < 1) throw DomainError("Grid: n_steps >= 1");
        if (n_x < 3) throw DomainError("Grid: n_x >= 3");
        if (!(x_max > x_min)) throw DomainError("Grid: x_max > x_min");
        if (store_every < 1) throw DomainError("Grid: store_every >= 1");
    }
};

struct Grid2 {
    Grid base;
    double y_min = 0.0, y_max = 0.0;
    std::size_t n_y = 0;

    double dy() const { return (y_max - y_min) / static_cast<double>(n_y - 1); }
    double y(std::size_t n) const { return y_min + dy() * static_cast<double>(n); }

    std::size_t nearest_y(double v) const {
        double idx = (v - y_min) / dy();
        auto n = static_cast<long>(std::lround(idx));
        n = std::clamp(n, 0l, static_cast<long>(n_y) - 1);
        return static_cast<std::size_t>(n);
    }

    void validate() const {
        base.validate();
        if (n_y < 3) throw DomainError("Grid2: n_y >= 3");
        if (!(y_max > y_min)) throw DomainError("Grid2: y_max > y_min");
    }
};

/// Solved reserve values for one state on the stored time layers.
/// values is row-major over [time][x] or [time][x][y].
struct ReserveSurface {
    std::size_t state = 0;
    std::vector<Time> times;  // ascending
    std::vector<Rate> xs;
    std::vector<double> ys;  // empty in 1d
    std::vector<double> values;

    bool two_dim() const { return !ys.empty(); }

    double value(std::size_t k, std::size_t m) const {
        return values[k * xs.size() + m];
    }
    double value(std::size_t k, std::size_t m, std::size_t n) const {
        return values[(k * xs.size() + m) * ys.size() + n];
    }

    /// Index of the stored layer at time t (must match a stored time).
    std::size_t time_index(Time t) const {
        for (std::size_t k = 0; k < times.size(); ++k)
            if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return k;
        throw DomainError("ReserveSurface: time not stored");
    }
};

namespace detail {

inline double cap_large(double v) {
    const double cap = 1e12;
    return (std::isfinite(v) && v < cap) ? v : cap;
}

// Max |drift| and tau^2 over the grid nodes at both time endpoints.
inline void coefficient_extremes(const shortrate::DiffusionModel& model,
                                 const Grid& g, double& drift_max,
                                 double& tau2_max) {
    drift_max = 0.0;
    tau2_max = 0.0;
    for (Time t : {g.t0, g.t1})
        for (std::size_t m = 0; m < g.n_x; ++m) {
            double x = g.x(m);
            drift_max = std::max(drift_max, std::abs(model.risk_neutral_drift(t, x)));
            double tau = model.volatility(t, x);
            tau2_max = std::max(tau2_max, tau * tau);
        }
}

}  // namespace detail

/// Largest time step the explicit scheme admits on this grid:
/// dt <= dx^2 / (tau_max^2 + dx*|drift|_max + dx^2*max(x_max,0)).
inline double max_stable_dt(const shortrate::DiffusionModel& model, const Grid& g) {
    g.validate();
    double drift_max, tau2_max;
    detail::coefficient_extremes(model, g, drift_max, tau2_max);
    const double dx = g.dx();
    double denom = tau2_max + dx * drift_max + dx * dx * std::max(g.x_max, 0.0);
    if (denom <= 0.0) return detail::cap_large(std::numeric_limits<double>::infinity());
    return detail::cap_large(dx * dx / denom);
}

/// 2d bound: the 1d diffusive bound and the y-advection bound
/// dt <= dy / max(|x_min|, |x_max|).
inline double max_stable_dt(const shortrate::DiffusionModel& model, const Grid2& g) {
    g.validate();
    double diffusive = max_stable_dt(model, g.base);
    double speed = std::max(std::abs(g.base.x_min), std::abs(g.base.x_max));
    double advective = speed > 0.0
                           ? g.dy() / speed
                           : std::numeric_limits<double>::infinity();
    // Both terms drain the same node, so their rates add: the positivity
    // condition is dt * (1/dt_diff + 1/dt_adv) <= 1, tighter than the min.
    return detail::cap_large(1.0 / (1.0 / diffusive + 1.0 / advective));
}

namespace detail {

inline void require_stable(double dt, double bound) {
    if (dt > bound * (1.0 + 1e-12))
        throw StabilityError("explicit scheme unstable: dt exceeds CFL bound", bound);
}

inline void require_breakpoints(const policy::PolicySpec& spec, const Grid& g) {
    for (Time b : spec.breakpoints) {
        if (b <= g.t0 || b >= g.t1) continue;
        double steps = (b - g.t0) / g.dt();
        if (std::abs(steps - std::round(steps)) > 1e-6)
            throw DomainError("time grid must include every cash-flow breakpoint");
    }
}

inline void check_finite(const std::vector<double>& v, const Grid& g, Time t) {
    for (std::size_t m = 0; m < v.size(); ++m)
        if (!std::isfinite(v[m]))
            throw DivergenceError("non-finite reserve value during marching", t,
                                  g.x(m % g.n_x));
}

}  // namespace detail

inline std::vector<ReserveSurface> solve_thiele_1d(
    const shortrate::DiffusionModel& model, const lifestate::TransitionModel& life,
    const policy::PolicySpec& spec, const Grid& g) {
    g.validate();
    if (spec.uses_average)
        throw DomainError("solve_thiele_1d: policy reads the average state; use 2d");
    detail::require_stable(g.dt(), max_stable_dt(model, g));
    detail::require_breakpoints(spec, g);

    const std::size_t S = spec.n_states, nx = g.n_x, nt = g.n_steps;
    const double dt = g.dt(), dx = g.dx(), q = dx / 4.0;

    // Working layers, cell-average initialized; cur[i][m] is state i at node m.
    std::vector<std::vector<double>> cur(S, std::vector<double>(nx));
    std::vector<std::vector<double>> nxt = cur;
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t m = 0; m < nx; ++m) {
            double x = g.x(m);
            cur[i][m] = 0.5 * (spec.terminal_payoff(i, x - q, 0.0) +
                               spec.terminal_payoff(i, x + q, 0.0));
        }

    std::vector<ReserveSurface> out(S);
    std::vector<Rate> xs(nx);
    for (std::size_t m = 0; m < nx; ++m) xs[m] = g.x(m);
    auto store = [&](Time t, bool exact_terminal) {
        for (std::size_t i = 0; i < S; ++i) {
            out[i].times.push_back(t);
            for (std::size_t m = 0; m < nx; ++m)
                out[i].values.push_back(exact_terminal
                                            ? spec.terminal_payoff(i, g.x(m), 0.0)
                                            : cur[i][m]);
        }
    };
    store(g.t1, true);

    std::vector<double> drift(nx), tau2(nx), mu(S * S);
    for (std::size_t k = nt; k-- > 0;) {
        const Time t = g.t(k);  // left endpoint of the step
        for (std::size_t m = 0; m < nx; ++m) {
            drift[m] = model.risk_neutral_drift(t, g.x(m));
            double tau = model.volatility(t, g.x(m));
            tau2[m] = tau * tau;
        }
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < S; ++j)
                mu[i * S + j] = i == j ? 0.0 : life.rate(i, j, t);
        for (std::size_t i = 0; i < S; ++i) {
            const auto& w = cur[i];
            auto& v = nxt[i];
            for (std::size_t m = 1; m + 1 < nx; ++m) {
                const double x = g.x(m);
                double dxx = (w[m + 1] - 2.0 * w[m] + w[m - 1]) / (dx * dx);
                double dxw;
                if (std::abs(drift[m]) * dx <= tau2[m])
                    dxw = (w[m + 1] - w[m - 1]) / (2.0 * dx);
                else if (drift[m] > 0.0)
                    dxw = (w[m + 1] - w[m]) / dx;
                else
                    dxw = (w[m] - w[m - 1]) / dx;
                double gbar = 0.5 * (spec.running_rate(i, t, x - q, 0.0) +
                                     spec.running_rate(i, t, x + q, 0.0));
                double coupling = 0.0;
                for (std::size_t j = 0; j < S; ++j) {
                    double mu_ij = mu[i * S + j];
                    if (mu_ij == 0.0) continue;
                    coupling += mu_ij * (spec.transition_payment(i, j, t, x, 0.0) +
                                         cur[j][m] - w[m]);
                }
                double dVdt = x * w[m] - gbar - coupling -
                              (drift[m] * dxw + 0.5 * tau2[m] * dxx);
                v[m] = w[m] - dt * dVdt;
            }
            v[0] = 2.0 * v[1] - v[2];
            v[nx - 1] = 2.0 * v[nx - 2] - v[nx - 3];
        }
        std::swap(cur, nxt);
        for (std::size_t i = 0; i < S; ++i) detail::check_finite(cur[i], g, t);
        if (k == 0 || (nt - k) % g.store_every == 0) store(t, false);
    }

    for (std::size_t i = 0; i < S; ++i) {
        out[i].state = i;
        out[i].xs = xs;
        // Layers were appended newest-first in time-reversed order.
        std::reverse(out[i].times.begin(), out[i].times.end());
        const std::size_t layers = out[i].times.size();
        std::vector<double> flipped(out[i].values.size());
        for (std::size_t k = 0; k < layers; ++k)
            std::copy(out[i].values.begin() + static_cast<long>(k * nx),
                      out[i].values.begin() + static_cast<long>((k + 1) * nx),
                      flipped.begin() + static_cast<long>((layers - 1 - k) * nx));
        out[i].values = std::move(flipped);
    }
    return out;
}

inline std::vector<ReserveSurface> solve_thiele_2d(
    const shortrate::DiffusionModel& model, const lifestate::TransitionModel& life,
    const policy::PolicySpec& spec, const Grid2& g2) {
    g2.validate();
    const Grid& g = g2.base;
    detail::require_stable(g.dt(), max_stable_dt(model, g2));
    detail::require_breakpoints(spec, g);

    const std::size_t S = spec.n_states, nx = g.n_x, ny = g2.n_y, nt = g.n_steps;
    const double dt = g.dt(), dx = g.dx(), dy = g2.dy();
    const double qx = dx / 4.0, qy = dy / 4.0;
    auto idx = [ny](std::size_t m, std::size_t n) { return m * ny + n; };

    std::vector<std::vector<double>> cur(S, std::vector<double>(nx * ny));
    std::vector<std::vector<double>> nxt = cur;
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t m = 0; m < nx; ++m)
            for (std::size_t n = 0; n < ny; ++n) {
                double x = g.x(m), y = g2.y(n);
                cur[i][idx(m, n)] =
                    0.25 * (spec.terminal_payoff(i, x - qx, y - qy) +
                            spec.terminal_payoff(i, x - qx, y + qy) +
                            spec.terminal_payoff(i, x + qx, y - qy) +
                            spec.terminal_payoff(i, x + qx, y + qy));
            }

    std::vector<ReserveSurface> out(S);
    std::vector<Rate> xs(nx);
    std::vector<double> ys(ny);
    for (std::size_t m = 0; m < nx; ++m) xs[m] = g.x(m);
    for (std::size_t n = 0; n < ny; ++n) ys[n] = g2.y(n);
    auto store = [&](Time t, bool exact_terminal) {
        for (std::size_t i = 0; i < S; ++i) {
            out[i].times.push_back(t);
            for (std::size_t m = 0; m < nx; ++m)
                for (std::size_t n = 0; n < ny; ++n)
                    out[i].values.push_back(
                        exact_terminal ? spec.terminal_payoff(i, g.x(m), g2.y(n))
                                       : cur[i][idx(m, n)]);
        }
    };
    store(g.t1, true);

    std::vector<double> drift(nx), tau2(nx), mu(S * S);
    for (std::size_t k = nt; k-- > 0;) {
        const Time t = g.t(k);
        for (std::size_t m = 0; m < nx; ++m) {
            drift[m] = model.risk_neutral_drift(t, g.x(m));
            double tau = model.volatility(t, g.x(m));
            tau2[m] = tau * tau;
        }
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < S; ++j)
                mu[i * S + j] = i == j ? 0.0 : life.rate(i, j, t);
        for (std::size_t i = 0; i < S; ++i) {
            const auto& w = cur[i];
            auto& v = nxt[i];
            for (std::size_t m = 1; m + 1 < nx; ++m) {
                const double x = g.x(m);
                const bool central = std::abs(drift[m]) * dx <= tau2[m];
                for (std::size_t n = 0; n < ny; ++n) {
                    const std::size_t c = idx(m, n);
                    const double y = g2.y(n);
                    double dxx =
                        (w[idx(m + 1, n)] - 2.0 * w[c] + w[idx(m - 1, n)]) /
                        (dx * dx);
                    double dxw;
                    if (central)
                        dxw = (w[idx(m + 1, n)] - w[idx(m - 1, n)]) / (2.0 * dx);
                    else if (drift[m] > 0.0)
                        dxw = (w[idx(m + 1, n)] - w[c]) / dx;
                    else
                        dxw = (w[c] - w[idx(m - 1, n)]) / dx;
                    // Upwind in y from y + dt*x; one-sided at the edges.
                    double dyw;
                    if (x > 0.0)
                        dyw = (n + 1 < ny) ? (w[idx(m, n + 1)] - w[c]) / dy
                                           : (w[c] - w[idx(m, n - 1)]) / dy;
                    else
                        dyw = (n > 0) ? (w[c] - w[idx(m, n - 1)]) / dy
                                      : (w[idx(m, n + 1)] - w[c]) / dy;
                    double gbar = 0.5 * (spec.running_rate(i, t, x - qx, y) +
                                         spec.running_rate(i, t, x + qx, y));
                    double coupling = 0.0;
                    for (std::size_t j = 0; j < S; ++j) {
                        double mu_ij = mu[i * S + j];
                        if (mu_ij == 0.0) continue;
                        coupling +=
                            mu_ij * (spec.transition_payment(i, j, t, x, y) +
                                     cur[j][c] - w[c]);
                    }
                    double dVdt =
                        x * w[c] - gbar - coupling -
                        (drift[m] * dxw + x * dyw + 0.5 * tau2[m] * dxx);
                    v[c] = w[c] - dt * dVdt;
                }
            }
            for (std::size_t n = 0; n < ny; ++n) {
                v[idx(0, n)] = 2.0 * v[idx(1, n)] - v[idx(2, n)];
                v[idx(nx - 1, n)] = 2.0 * v[idx(nx - 2, n)] - v[idx(nx - 3, n)];
            }
        }
        std::swap(cur, nxt);
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t c = 0; c < nx * ny; ++c)
                if (!std::isfinite(cur[i][c]))
                    throw DivergenceError("non-finite reserve value during marching",
                                          t, g.x(c / ny));
        if (k == 0 || (nt - k) % g.store_every == 0) store(t, false);
    }

    for (std::size_t i = 0; i < S; ++i) {
        out[i].state = i;
        out[i].xs = xs;
        out[i].ys = ys;
        std::reverse(out[i].times.begin(), out[i].times.end());
        const std::size_t layers = out[i].times.size();
        const std::size_t plane = nx * ny;
        std::vector<double> flipped(out[i].values.size());
        for (std::size_t k = 0; k < layers; ++k)
            std::copy(out[i].values.begin() + static_cast<long>(k * plane),
                      out[i].values.begin() + static_cast<long>((k + 1) * plane),
                      flipped.begin() + static_cast<long>((layers - 1 - k) * plane));
        out[i].values = std::move(flipped);
    }
    return out;
}

/// Monotone piecewise-cubic interpolant (Fritsch-Carlson slopes). Used to
/// carry stage-one reserve values onto the stage-two grid without
/// overshooting. Extrapolates linearly with the endpoint slope.
class MonotoneCubic {
public:
    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw DomainError("MonotoneCubic: need >= 2 matching nodes");
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (!(x_[i + 1] > x_[i]))
                throw DomainError("MonotoneCubic: abscissae must increase");
        d_.resize(n);
        std::vector<double> h(n - 1), s(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = x_[i + 1] - x_[i];
            s[i] = (y_[i + 1] - y_[i]) / h[i];
        }
        d_[0] = s[0];
        d_[n - 1] = s[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (s[i - 1] * s[i] <= 0.0) {
                d_[i] = 0.0;
            } else {
                double w1 = 2.0 * h[i] + h[i - 1];
                double w2 = h[i] + 2.0 * h[i - 1];
                d_[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
    }

    double operator()(double x) const {
        const std::size_t n = x_.size();
        if (x <= x_[0]) return y_[0] + d_[0] * (x - x_[0]);
        if (x >= x_[n - 1]) return y_[n - 1] + d_[n - 1] * (x - x_[n - 1]);
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        double h = x_[i + 1] - x_[i], u = (x - x_[i]) / h;
        double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        double h10 = u * (1.0 - u) * (1.0 - u);
        double h01 = u * u * (3.0 - 2.0 * u);
        double h11 = u * u * (u - 1.0);
        return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
    }

private:
    std::vector<double> x_, y_, d_;
};

struct ReinsuranceSolution {
    ReserveSurface inner;  // active-state reserve on [retirement, maturity]
    ReserveSurface outer;  // active-state reserve on [0, retirement]
};

/// Two-stage reinsurance solve: the inner pension PDE on
/// [retirement, maturity] in 1d, then the outer claim on [0, retirement] in
/// 2d with terminal factor * inner(retirement, x) * 1{y < K * retirement}.
inline ReinsuranceSolution solve_reinsurance(const shortrate::DiffusionModel& model,
                                             const lifestate::TransitionModel& life,
                                             const policy::ProductParams& params,
                                             const Grid& inner_grid,
                                             const Grid2& outer_grid) {
    if (std::abs(inner_grid.t0 - params.retirement) > 1e-9 ||
        std::abs(inner_grid.t1 - params.maturity) > 1e-9)
        throw DomainError("solve_reinsurance: inner grid must span [retirement, maturity]");
    if (std::abs(outer_grid.base.t1 - params.retirement) > 1e-9)
        throw DomainError("solve_reinsurance: outer grid must end at retirement");

    auto inner = solve_thiele_1d(model, life, policy::make_reinsurance_inner(params),
                                 inner_grid);
    const auto& s0 = inner[0];
    std::vector<double> at_retirement(s0.xs.size());
    for (std::size_t m = 0; m < s0.xs.size(); ++m)
        at_retirement[m] = s0.value(0, m);  // first stored layer is t = retirement
    MonotoneCubic interp(s0.xs, at_retirement);

    auto outer_spec = policy::make_reinsurance_outer(
        params, [interp](Rate x) { return interp(x); });
    auto outer = solve_thiele_2d(model, life, outer_spec, outer_grid);
    return ReinsuranceSolution{std::move(inner[0]), std::move(outer[0])};
}

}  // namespace ratelife::pdesolver
