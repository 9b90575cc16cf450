#pragma once

// Risk-neutral Monte Carlo pricing of an arbitrary PolicySpec, used as an
// independent oracle against the PDE and closed-form values. State
// uncertainty is integrated out analytically via transition probabilities;
// only the rate path is sampled.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ratelife/common.hpp"
#include "ratelife/lifestate.hpp"
#include "ratelife/pdesolver.hpp"
#include "ratelife/policy.hpp"
#include "ratelife/shortrate.hpp"

namespace ratelife::montecarlo {

struct McEstimate {
    Money mean = 0.0;
    Money stderr_ = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Per-step data shared by all paths: occupation probabilities from the
// starting state and the mortality-weighted cash-flow coefficients.
struct StateTable {
    std::size_t n_states;
    std::size_t n_steps;
    std::vector<double> occupancy;  // [step][state] p_{state0,j}(t, t_k)
    std::vector<double> mu;         // [step][from][to]

    double occ(std::size_t k, std::size_t j) const {
        return occupancy[k * n_states + j];
    }
    double rate(std::size_t k, std::size_t from, std::size_t to) const {
        return mu[(k * n_states + from) * n_states + to];
    }
};

inline StateTable build_state_table(const lifestate::TransitionModel& life,
                                    std::size_t state0, Time t, double dt,
                                    std::size_t n_steps) {
    const std::size_t S = life.size();
    StateTable tab;
    tab.n_states = S;
    tab.n_steps = n_steps;
    tab.occupancy.resize((n_steps + 1) * S);
    tab.mu.resize((n_steps + 1) * S * S);

    auto P = lifestate::TransitionMatrix::identity(S);
    for (std::size_t k = 0; k <= n_steps; ++k) {
        const Time tk = t + dt * static_cast<double>(k);
        for (std::size_t j = 0; j < S; ++j)
            tab.occupancy[k * S + j] = P(state0, j);
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < S; ++j)
                tab.mu[(k * S + i) * S + j] = i == j ? 0.0 : life.rate(i, j, tk);
        if (k < n_steps)
            P = P.multiply(
                lifestate::transition_probabilities(life, tk, tk + dt, 4));
    }
    return tab;
}

// Expected cash-flow rate at step k given (r, ybar): occupancy-weighted
// running payments plus transition payments at their intensities.
inline double flow_rate(const policy::PolicySpec& spec, const StateTable& tab,
                        std::size_t k, Time tk, double r, double ybar) {
    double acc = 0.0;
    for (std::size_t j = 0; j < tab.n_states; ++j) {
        double pj = tab.occ(k, j);
        if (pj == 0.0) continue;
        double flow = spec.running_rate(j, tk, r, ybar);
        for (std::size_t l = 0; l < tab.n_states; ++l) {
            if (l == j) continue;
            double mu = tab.rate(k, j, l);
            if (mu != 0.0) flow += mu * spec.transition_payment(j, l, tk, r, ybar);
        }
        acc += pj * flow;
    }
    return acc;
}

inline McEstimate finalize(double sum, double sumsq, std::size_t n_paths,
                           std::uint64_t seed) {
    McEstimate est;
    est.n_paths = n_paths;
    est.seed = seed;
    const auto n = static_cast<double>(n_paths);
    est.mean = sum / n;
    double var = (sumsq - sum * sum / n) / (n - 1.0);
    est.stderr_ = std::sqrt(std::max(var, 0.0) / n);
    return est;
}

}  // namespace detail

/// Prices the policy at (t, x, y) for a holder in `state0` by pathwise
/// discounting over exact Vasicek transitions of (r, rbar). The running leg
/// integrates by the trapezoid rule on the simulation grid. Deterministic:
/// identical (seed, n_paths, dt) gives bit-identical results.
inline McEstimate mc_reserve(const shortrate::VasicekModel& model,
                             const lifestate::TransitionModel& life,
                             const policy::PolicySpec& spec, Time t, Rate x,
                             double y, double dt, std::size_t n_paths,
                             std::uint64_t seed, std::size_t state0 = 0) {
    if (dt <= 0.0) throw DomainError("mc_reserve: dt must be > 0");
    if (n_paths < 2) throw DomainError("mc_reserve: n_paths >= 2");
    if (t > spec.horizon) throw DomainError("mc_reserve: t beyond policy horizon");
    const double span = spec.horizon - t;
    const auto n_steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(span / dt)));
    const double dt_eff = span / static_cast<double>(n_steps);
    shortrate::VasicekTransition trans(model, dt_eff);
    auto tab = detail::build_state_table(life, state0, t, dt_eff, n_steps);
    const std::size_t S = tab.n_states;

    double sum = 0.0, sumsq = 0.0;
    for (std::size_t chunk_start = 0; chunk_start < n_paths;
         chunk_start += shortrate::kChunkSize) {
        shortrate::NormalSampler rng(
            shortrate::chunk_seed(seed, chunk_start / shortrate::kChunkSize));
        const std::size_t end =
            std::min(chunk_start + shortrate::kChunkSize, n_paths);
        for (std::size_t p = chunk_start; p < end; ++p) {
            double r = x, ybar = y;
            double value = 0.5 * dt_eff * detail::flow_rate(spec, tab, 0, t, r, ybar);
            for (std::size_t k = 1; k <= n_steps; ++k) {
                trans.step(r, ybar, rng);
                const Time tk = t + dt_eff * static_cast<double>(k);
                const double disc = std::exp(-(ybar - y));
                const double w = (k == n_steps) ? 0.5 * dt_eff : dt_eff;
                value += w * disc * detail::flow_rate(spec, tab, k, tk, r, ybar);
                if (k == n_steps) {
                    double terminal = 0.0;
                    for (std::size_t j = 0; j < S; ++j)
                        terminal +=
                            tab.occ(k, j) * spec.terminal_payoff(j, r, ybar);
                    value += disc * terminal;
                }
            }
            sum += value;
            sumsq += value * value;
        }
    }
    return detail::finalize(sum, sumsq, n_paths, seed);
}

/// Generic-diffusion fallback with Euler-Maruyama rate steps and trapezoidal
/// accumulation of the rate integral. Carries O(dt) bias; halve dt until the
/// estimate moves by less than the target accuracy.
inline McEstimate mc_reserve(const shortrate::DiffusionModel& model,
                             const lifestate::TransitionModel& life,
                             const policy::PolicySpec& spec, Time t, Rate x,
                             double y, double dt, std::size_t n_paths,
                             std::uint64_t seed, std::size_t state0 = 0) {
    if (dt <= 0.0) throw DomainError("mc_reserve: dt must be > 0");
    if (n_paths < 2) throw DomainError("mc_reserve: n_paths >= 2");
    if (t > spec.horizon) throw DomainError("mc_reserve: t beyond policy horizon");
    const double span = spec.horizon - t;
    const auto n_steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(span / dt)));
    const double dt_eff = span / static_cast<double>(n_steps);
    auto tab = detail::build_state_table(life, state0, t, dt_eff, n_steps);
    const std::size_t S = tab.n_states;
    const double sqrt_dt = std::sqrt(dt_eff);

    double sum = 0.0, sumsq = 0.0;
    for (std::size_t chunk_start = 0; chunk_start < n_paths;
         chunk_start += shortrate::kChunkSize) {
        shortrate::NormalSampler rng(
            shortrate::chunk_seed(seed, chunk_start / shortrate::kChunkSize));
        const std::size_t end =
            std::min(chunk_start + shortrate::kChunkSize, n_paths);
        for (std::size_t p = chunk_start; p < end; ++p) {
            double r = x, ybar = y;
            double value = 0.5 * dt_eff * detail::flow_rate(spec, tab, 0, t, r, ybar);
            for (std::size_t k = 1; k <= n_steps; ++k) {
                const Time tk_prev = t + dt_eff * static_cast<double>(k - 1);
                double r_next = r + model.risk_neutral_drift(tk_prev, r) * dt_eff +
                                model.volatility(tk_prev, r) * sqrt_dt * rng();
                ybar += 0.5 * (r + r_next) * dt_eff;
                r = r_next;
                const Time tk = t + dt_eff * static_cast<double>(k);
                const double disc = std::exp(-(ybar - y));
                const double w = (k == n_steps) ? 0.5 * dt_eff : dt_eff;
                value += w * disc * detail::flow_rate(spec, tab, k, tk, r, ybar);
                if (k == n_steps) {
                    double terminal = 0.0;
                    for (std::size_t j = 0; j < S; ++j)
                        terminal +=
                            tab.occ(k, j) * spec.terminal_payoff(j, r, ybar);
                    value += disc * terminal;
                }
            }
            sum += value;
            sumsq += value * value;
        }
    }
    return detail::finalize(sum, sumsq, n_paths, seed);
}

struct SpotNode {
    Time t = 0.0;
    Rate x = 0.0;
    double y = 0.0;  // ignored for 1d surfaces
};

struct SpotCheck {
    SpotNode node;
    double surface_value = 0.0;
    McEstimate mc;
    double z = 0.0;  // (surface - mc.mean) / mc.stderr
};

struct SpotcheckReport {
    std::vector<SpotCheck> checks;
    double max_abs_z = 0.0;
    bool pass(double limit = 3.0) const { return max_abs_z <= limit; }
};

/// Runs mc_reserve at each sample node of a solved surface and reports
/// z-scores. Nodes must coincide with stored grid nodes.
inline SpotcheckReport surface_spotcheck(const shortrate::VasicekModel& model,
                                         const lifestate::TransitionModel& life,
                                         const policy::PolicySpec& spec,
                                         const pdesolver::ReserveSurface& surface,
                                         const std::vector<SpotNode>& nodes,
                                         double dt, std::size_t n_paths,
                                         std::uint64_t seed) {
    SpotcheckReport rep;
    for (const auto& node : nodes) {
        std::size_t k = surface.time_index(node.t);
        std::size_t m = 0;
        while (m < surface.xs.size() &&
               std::abs(surface.xs[m] - node.x) > 1e-9)
            ++m;
        if (m == surface.xs.size())
            throw DomainError("surface_spotcheck: x not on the surface grid");
        SpotCheck chk;
        chk.node = node;
        if (surface.two_dim()) {
            std::size_t n = 0;
            while (n < surface.ys.size() &&
                   std::abs(surface.ys[n] - node.y) > 1e-9)
                ++n;
            if (n == surface.ys.size())
                throw DomainError("surface_spotcheck: y not on the surface grid");
            chk.surface_value = surface.value(k, m, n);
        } else {
            chk.surface_value = surface.value(k, m);
        }
        chk.mc = mc_reserve(model, life, spec, node.t, node.x, node.y, dt, n_paths,
                            seed, surface.state);
        double diff = chk.surface_value - chk.mc.mean;
        chk.z = chk.mc.stderr_ > 0.0
                    ? diff / chk.mc.stderr_
                    : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(chk.z));
        rep.checks.push_back(std::move(chk));
    }
    return rep;
}

}  // namespace ratelife::montecarlo
