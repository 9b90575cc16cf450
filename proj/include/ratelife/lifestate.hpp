#pragma once

// Multi-state Markov life model: transition rates, transition probabilities
// via the Kolmogorov forward equations, Gompertz-Makeham mortality.

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "ratelife/common.hpp"

namespace ratelife::lifestate {

/// Force of mortality mu(t) = alpha0 + alpha1 * exp(alpha2 * t).
/// Contract time t is measured from entry; use with_entry_age to pre-shift
/// the law so mu(t) is the force at age entry_age + t.
struct GompertzMakeham {
    double alpha0;
    double alpha1;  // >= 0
    double alpha2;

    GompertzMakeham(double a0, double a1, double a2)
        : alpha0(a0), alpha1(a1), alpha2(a2) {
        if (a1 < 0.0) throw DomainError("GompertzMakeham: alpha1 must be >= 0");
    }

    GompertzMakeham with_entry_age(double age) const {
        return GompertzMakeham(alpha0, alpha1 * std::exp(alpha2 * age), alpha2);
    }

    double rate(Time t) const { return alpha0 + alpha1 * std::exp(alpha2 * t); }

    /// Integral of mu over [s, t], in closed form.
    double integrated(Time s, Time t) const {
        if (alpha2 == 0.0) return (alpha0 + alpha1) * (t - s);
        return alpha0 * (t - s) +
               alpha1 / alpha2 * (std::exp(alpha2 * t) - std::exp(alpha2 * s));
    }
};

inline double mortality_rate(const GompertzMakeham& m, Time t) { return m.rate(t); }

/// Survival probability exp(-int_s^t mu(u) du), closed form.
inline double survival_probability(const GompertzMakeham& m, Time s, Time t) {
    if (s > t) throw DomainError("survival_probability: requires s <= t");
    return std::exp(-m.integrated(s, t));
}

/// Finite-state Markov chain with time-dependent transition rates.
/// Immutable after construction; rate functions must be continuous in t
/// and nonnegative. Absorbing states have all outgoing rates zero.
class TransitionModel {
public:
    using RateFn = std::function<double(Time)>;

    explicit TransitionModel(std::size_t n_states)
        : n_(n_states), rates_(n_states * n_states) {
        if (n_states < 2) throw DomainError("TransitionModel: need at least 2 states");
    }

    std::size_t size() const { return n_; }

    void set_rate(std::size_t from, std::size_t to, RateFn fn) {
        check(from); check(to);
        if (from == to) throw DomainError("TransitionModel: no diagonal rates");
        rates_[from * n_ + to] = std::move(fn);
    }

    void set_rate(std::size_t from, std::size_t to, double constant) {
        set_rate(from, to, [constant](Time) { return constant; });
    }

    double rate(std::size_t from, std::size_t to, Time t) const {
        check(from); check(to);
        if (from == to) return 0.0;
        const auto& fn = rates_[from * n_ + to];
        if (!fn) return 0.0;
        double r = fn(t);
        if (!std::isfinite(r))
            throw EvaluationError("TransitionModel: non-finite rate evaluation");
        return r;
    }

    /// Total exit rate from state i at time t.
    double exit_rate(std::size_t i, Time t) const {
        double sum = 0.0;
        for (std::size_t j = 0; j < n_; ++j)
            if (j != i) sum += rate(i, j, t);
        return sum;
    }

    bool absorbing(std::size_t i, Time t) const { return exit_rate(i, t) == 0.0; }

    /// Two-state {alive, dead} model from a mortality law.
    static TransitionModel two_state(const GompertzMakeham& mortality) {
        TransitionModel m(2);
        m.set_rate(0, 1, [mortality](Time t) { return mortality.rate(t); });
        return m;
    }

private:
    void check(std::size_t i) const {
        if (i >= n_) throw DomainError("TransitionModel: state index out of range");
    }
    std::size_t n_;
    std::vector<RateFn> rates_;
};

/// Row-stochastic matrix of p_ij(s,t), row = starting state.
class TransitionMatrix {
public:
    explicit TransitionMatrix(std::size_t n) : n_(n), p_(n * n, 0.0) {}

    static TransitionMatrix identity(std::size_t n) {
        TransitionMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m.p_[i * n + i] = 1.0;
        return m;
    }

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return p_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return p_[i * n_ + j]; }

    TransitionMatrix multiply(const TransitionMatrix& o) const {
        TransitionMatrix out(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < n_; ++k) {
                double a = (*this)(i, k);
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < n_; ++j) out(i, j) += a * o(k, j);
            }
        return out;
    }

private:
    std::size_t n_;
    std::vector<double> p_;
};

namespace detail {

// dP/dt = P * Q(t): one row block of the forward equation.
inline void forward_rhs(const TransitionModel& m, Time t,
                        const std::vector<double>& p, std::vector<double>& out) {
    const std::size_t n = m.size();
    // Q(t): off-diagonal rate(i,j,t), diagonal -exit_rate.
    std::vector<double> q(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double exit = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double r = m.rate(i, j, t);
            q[i * n + j] = r;
            exit += r;
        }
        q[i * n + i] = -exit;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += p[i * n + k] * q[k * n + j];
            out[i * n + j] = acc;
        }
}

}  // namespace detail

/// Transition probabilities p_ij(s,t) by integrating the Kolmogorov forward
/// ODE system with a fixed-step classical RK4 scheme.
///
/// Entries in [-1e-12, 0) are clamped to 0; anything below -1e-12 signals an
/// unstable step count and raises.
inline TransitionMatrix transition_probabilities(const TransitionModel& model,
                                                 Time s, Time t, std::size_t steps) {
    if (s > t) throw DomainError("transition_probabilities: requires s <= t");
    if (steps < 1) throw DomainError("transition_probabilities: steps >= 1");
    const std::size_t n = model.size();
    if (s == t) return TransitionMatrix::identity(n);

    const double h = (t - s) / static_cast<double>(steps);
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 1.0;

    std::vector<double> k1(n * n), k2(n * n), k3(n * n), k4(n * n), tmp(n * n);
    for (std::size_t step = 0; step < steps; ++step) {
        const double t0 = s + h * static_cast<double>(step);
        detail::forward_rhs(model, t0, p, k1);
        for (std::size_t m = 0; m < n * n; ++m) tmp[m] = p[m] + 0.5 * h * k1[m];
        detail::forward_rhs(model, t0 + 0.5 * h, tmp, k2);
        for (std::size_t m = 0; m < n * n; ++m) tmp[m] = p[m] + 0.5 * h * k2[m];
        detail::forward_rhs(model, t0 + 0.5 * h, tmp, k3);
        for (std::size_t m = 0; m < n * n; ++m) tmp[m] = p[m] + h * k3[m];
        detail::forward_rhs(model, t0 + h, tmp, k4);
        for (std::size_t m = 0; m < n * n; ++m)
            p[m] += h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
    }

    TransitionMatrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double v = p[i * n + j];
            if (v < 0.0) {
                if (v < -1e-12)
                    throw EvaluationError(
                        "transition_probabilities: negative entry beyond clamp "
                        "tolerance; increase steps");
                v = 0.0;
            }
            out(i, j) = v;
        }
    return out;
}

}  // namespace ratelife::lifestate
