#pragma once

// Policy cash-flow representation: per-state terminal payoffs f_i(x,y),
// running payment rates g_i(t,x,y), transition payments h_ij(t,x,y), and
// constructors for the standard product templates.
//
// Sign convention: benefits positive, premiums negative inside g.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ratelife/common.hpp"

namespace ratelife::policy {

/// 1{x >= K}, closed on the right; the infinite tags give the constant 1/0.
inline double indicator_geq(double x, const Strike& K) {
    switch (K.kind()) {
        case Strike::Kind::neg_inf: return 1.0;
        case Strike::Kind::pos_inf: return 0.0;
        default: return x >= K.value() ? 1.0 : 0.0;
    }
}

inline double indicator_leq(double x, const Strike& K) {
    switch (K.kind()) {
        case Strike::Kind::neg_inf: return 0.0;
        case Strike::Kind::pos_inf: return 1.0;
        default: return x <= K.value() ? 1.0 : 0.0;
    }
}

/// Cash flows of a contract over states 0..n_states-1. Dead/exited states
/// carry identically zero functions by convention. Functions must return
/// finite values on the computational domain; g may be piecewise in t with
/// the discontinuity times declared in `breakpoints`.
struct PolicySpec {
    using TerminalFn = std::function<Money(Rate x, double y)>;
    using RunningFn = std::function<Money(Time t, Rate x, double y)>;
    using TransitionFn = std::function<Money(Time t, Rate x, double y)>;

    std::size_t n_states = 2;
    Time horizon = 0.0;                  // terminal payment time T
    std::vector<TerminalFn> terminal;    // f_i, size n_states
    std::vector<RunningFn> running;      // g_i, size n_states
    std::vector<TransitionFn> transition;  // h_ij row-major, size n_states^2
    bool uses_average = false;           // whether any function reads y
    std::vector<Time> breakpoints;       // required time-grid nodes

    static PolicySpec zero(std::size_t n_states, Time horizon) {
        PolicySpec s;
        s.n_states = n_states;
        s.horizon = horizon;
        s.terminal.assign(n_states, nullptr);
        s.running.assign(n_states, nullptr);
        s.transition.assign(n_states * n_states, nullptr);
        return s;
    }

    Money terminal_payoff(std::size_t i, Rate x, double y) const {
        check_state(i);
        return terminal[i] ? terminal[i](x, y) : 0.0;
    }
    Money running_rate(std::size_t i, Time t, Rate x, double y) const {
        check_state(i);
        return running[i] ? running[i](t, x, y) : 0.0;
    }
    Money transition_payment(std::size_t i, std::size_t j, Time t, Rate x,
                             double y) const {
        check_state(i);
        check_state(j);
        const auto& fn = transition[i * n_states + j];
        return fn ? fn(t, x, y) : 0.0;
    }

private:
    void check_state(std::size_t i) const {
        if (i >= n_states) throw DomainError("PolicySpec: state index out of range");
    }
};

enum class CashflowKind { terminal, running, transition };

/// Uniform evaluation entry point used by solvers and tests.
inline Money evaluate_cashflow(const PolicySpec& spec, CashflowKind kind,
                               std::size_t from, std::size_t to, Time t, Rate x,
                               double y) {
    switch (kind) {
        case CashflowKind::terminal: return spec.terminal_payoff(from, x, y);
        case CashflowKind::running: return spec.running_rate(from, t, x, y);
        case CashflowKind::transition:
            return spec.transition_payment(from, to, t, x, y);
    }
    throw DomainError("evaluate_cashflow: unknown kind");
}

enum class ProductTemplate {
    endowment_reduction,
    pension_bonus,
    rate_cap,
    rate_floor,
    caplet,
    floorlet,
    binary_average_endowment,
    reinsurance_treaty,
};

struct ProductParams {
    ProductTemplate kind = ProductTemplate::endowment_reduction;
    Money amount = 0.0;     // E
    Money amount_high = 0.0;  // E1 (binary)
    Money amount_low = 0.0;   // E2 (binary)
    Money pension = 0.0;    // P
    Strike threshold = Strike(0.0);  // K
    double factor = 0.0;    // rho in [0,1]
    Money premium = 0.0;    // pi per year
    Time maturity = 0.0;    // T
    Time retirement = 0.0;  // That, where applicable
    // Pension premium leg gated by 1{x < K} instead of flat. The flat form
    // is the reserve-consistent default; the gated form matches the product
    // PDE as sometimes written and is kept selectable for comparison.
    bool gated_premium = false;

    void validate() const {
        if (factor < 0.0 || factor > 1.0)
            throw DomainError("ProductParams: factor must lie in [0,1]");
        if (amount < 0.0 || amount_high < 0.0 || amount_low < 0.0 || pension < 0.0)
            throw DomainError("ProductParams: amounts must be >= 0");
        if (maturity <= 0.0) throw DomainError("ProductParams: maturity must be > 0");
        const bool needs_retirement = kind == ProductTemplate::pension_bonus ||
                                      kind == ProductTemplate::reinsurance_treaty;
        if (needs_retirement && !(retirement > 0.0 && retirement < maturity))
            throw DomainError("ProductParams: requires 0 < retirement < maturity");
    }
};

/// Builds the two-state PolicySpec for a single-stage product template.
/// reinsurance_treaty is two-stage; use make_reinsurance_inner/outer.
inline PolicySpec make_product(const ProductParams& p) {
    p.validate();
    PolicySpec s = PolicySpec::zero(2, p.maturity);
    const Strike K = p.threshold;
    switch (p.kind) {
        case ProductTemplate::endowment_reduction: {
            const Money E = p.amount, pi = p.premium;
            const double rho = p.factor;
            s.terminal[0] = [E](Rate, double) { return E; };
            s.running[0] = [pi, rho, K](Time, Rate x, double) {
                return -pi * (1.0 - rho * indicator_geq(x, K));
            };
            break;
        }
        case ProductTemplate::pension_bonus: {
            const Money pi = p.premium, P = p.pension;
            const double rho = p.factor;
            const Time That = p.retirement;
            const bool gated = p.gated_premium;
            s.running[0] = [pi, P, rho, K, That, gated](Time t, Rate x, double) {
                if (t < That)
                    return -pi * (gated ? 1.0 - indicator_geq(x, K) : 1.0);
                return P * (1.0 + rho * indicator_geq(x, K));
            };
            s.breakpoints.push_back(That);
            break;
        }
        case ProductTemplate::rate_cap: {
            const Money E = p.amount;
            s.terminal[0] = [E, K](Rate x, double) { return E * indicator_geq(x, K); };
            break;
        }
        case ProductTemplate::rate_floor: {
            const Money E = p.amount;
            s.terminal[0] = [E, K](Rate x, double) { return E * indicator_leq(x, K); };
            break;
        }
        case ProductTemplate::caplet: {
            const Money E = p.amount;
            const double k = K.value();
            s.terminal[0] = [E, k](Rate x, double) { return E * std::max(x - k, 0.0); };
            break;
        }
        case ProductTemplate::floorlet: {
            const Money E = p.amount;
            const double k = K.value();
            s.terminal[0] = [E, k](Rate x, double) { return E * std::max(k - x, 0.0); };
            break;
        }
        case ProductTemplate::binary_average_endowment: {
            const Money E1 = p.amount_high, E2 = p.amount_low, pi = p.premium;
            const Time T = p.maturity;
            s.terminal[0] = [E1, E2, K, T](Rate, double y) {
                double hi = indicator_geq(y, K.finite() ? Strike(K.value() * T) : K);
                return E1 * hi + E2 * (1.0 - hi);
            };
            s.running[0] = [pi](Time, Rate, double) { return -pi; };
            s.uses_average = true;
            break;
        }
        case ProductTemplate::reinsurance_treaty:
            throw DomainError(
                "make_product: reinsurance is two-stage; use "
                "make_reinsurance_inner/make_reinsurance_outer");
    }
    return s;
}

/// Inner pension leg of the reinsurance treaty on [retirement, maturity]:
/// pays P per survival year, zero terminal value.
inline PolicySpec make_reinsurance_inner(const ProductParams& p) {
    if (p.kind != ProductTemplate::reinsurance_treaty)
        throw DomainError("make_reinsurance_inner: wrong template");
    p.validate();
    PolicySpec s = PolicySpec::zero(2, p.maturity);
    const Money P = p.pension;
    s.running[0] = [P](Time, Rate, double) { return P; };
    return s;
}

/// Outer reinsurance claim on [0, retirement]: terminal payoff
/// factor * inner_value(x) * 1{y < K * retirement}. `inner_value` is the
/// inner reserve at retirement as a function of the rate level.
inline PolicySpec make_reinsurance_outer(const ProductParams& p,
                                         std::function<Money(Rate)> inner_value) {
    if (p.kind != ProductTemplate::reinsurance_treaty)
        throw DomainError("make_reinsurance_outer: wrong template");
    p.validate();
    if (!inner_value) throw DomainError("make_reinsurance_outer: missing inner value");
    PolicySpec s = PolicySpec::zero(2, p.retirement);
    const double rho = p.factor;
    const Strike K = p.threshold;
    const Time That = p.retirement;
    s.terminal[0] = [rho, K, That, fn = std::move(inner_value)](Rate x, double y) {
        double gate =
            1.0 - indicator_geq(y, K.finite() ? Strike(K.value() * That) : K);
        return rho * fn(x) * gate;
    };
    s.uses_average = true;
    return s;
}

}  // namespace ratelife::policy
