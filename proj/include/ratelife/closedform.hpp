#pragma once

// Quadrature evaluation of prospective reserves for the standard products,
// built on the Vasicek closed forms, plus fair-premium solving and the
// mean-difference curve estimator.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ratelife/common.hpp"
#include "ratelife/lifestate.hpp"
#include "ratelife/policy.hpp"
#include "ratelife/shortrate.hpp"

namespace ratelife::closedform {

struct QuadratureRule {
    enum class Scheme { trapezoid, simpson };
    Scheme scheme = Scheme::simpson;
    int panels_per_year = 32;

    void validate() const {
        if (panels_per_year < 2)
            throw DomainError("QuadratureRule: panels_per_year >= 2");
    }

    /// Integrates f over [a, b]. Panel count scales with the interval and is
    /// forced even for Simpson.
    double integrate(const std::function<double(double)>& f, double a,
                     double b) const {
        validate();
        if (b <= a) return 0.0;
        auto n = static_cast<std::size_t>(
            std::ceil(static_cast<double>(panels_per_year) * (b - a) - 1e-12));
        n = std::max<std::size_t>(n, 2);
        if (scheme == Scheme::simpson && n % 2 == 1) ++n;
        const double h = (b - a) / static_cast<double>(n);
        if (scheme == Scheme::trapezoid) {
            double acc = 0.5 * (f(a) + f(b));
            for (std::size_t k = 1; k < n; ++k)
                acc += f(a + h * static_cast<double>(k));
            return acc * h;
        }
        double acc = f(a) + f(b);
        for (std::size_t k = 1; k < n; ++k)
            acc += (k % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(k));
        return acc * h / 3.0;
    }
};

/// Endowment with premium reduction at high rates: reserve at (t, x):
/// -pi int_t^T p(t,s) (zcb - rho U^K)(s-t, x) ds + E p(t,T) zcb(T-t, x).
inline Money endowment_reduction_reserve(const policy::ProductParams& p,
                                         const lifestate::GompertzMakeham& gm,
                                         const shortrate::VasicekModel& m, Time t,
                                         Rate x, const QuadratureRule& rule) {
    if (t < 0.0 || t > p.maturity)
        throw DomainError("endowment_reduction_reserve: t outside [0, T]");
    const Time T = p.maturity;
    const double rho = p.factor;
    const Strike K = p.threshold;
    double annuity = rule.integrate(
        [&](double s) {
            return lifestate::survival_probability(gm, t, s) *
                   (shortrate::zcb_price(m, s - t, x) -
                    rho * shortrate::digital_rate_price(m, s - t, x, K));
        },
        t, T);
    double benefit = p.amount * lifestate::survival_probability(gm, t, T) *
                     shortrate::zcb_price(m, T - t, x);
    return benefit - p.premium * annuity;
}

/// Pension with bonus at high rates: premium leg on [t, That], pension leg
/// P (zcb + rho U^K) on [max(t, That), T], everything discounted from t.
inline Money pension_bonus_reserve(const policy::ProductParams& p,
                                   const lifestate::GompertzMakeham& gm,
                                   const shortrate::VasicekModel& m, Time t, Rate x,
                                   const QuadratureRule& rule) {
    if (t < 0.0 || t > p.maturity)
        throw DomainError("pension_bonus_reserve: t outside [0, T]");
    const Time T = p.maturity, That = p.retirement;
    const double rho = p.factor;
    const Strike K = p.threshold;
    double premium_leg = 0.0;
    if (t < That)
        premium_leg = rule.integrate(
            [&](double s) {
                return lifestate::survival_probability(gm, t, s) *
                       shortrate::zcb_price(m, s - t, x);
            },
            t, That);
    double pension_leg = rule.integrate(
        [&](double s) {
            return lifestate::survival_probability(gm, t, s) *
                   (shortrate::zcb_price(m, s - t, x) +
                    rho * shortrate::digital_rate_price(m, s - t, x, K));
        },
        std::max(t, That), T);
    return p.pension * pension_leg - p.premium * premium_leg;
}

/// Truncation error bound for the pension's finite upper limit: the value of
/// deferring past T cannot exceed P p(t,T) zcb(T-t, x_max).
inline Money pension_truncation_bound(const policy::ProductParams& p,
                                      const lifestate::GompertzMakeham& gm,
                                      const shortrate::VasicekModel& m, Time t,
                                      Rate x_max) {
    return p.pension * lifestate::survival_probability(gm, t, p.maturity) *
           shortrate::zcb_price(m, p.maturity - t, x_max);
}

/// Binary endowment on the average rate: terminal leg
/// p(t,T)[E1 Ubar^K + E2 (Ubar^{-inf} - Ubar^K)] minus the premium annuity.
/// y is the realized rate integral at time t.
inline Money binary_endowment_reserve(const policy::ProductParams& p,
                                      const lifestate::GompertzMakeham& gm,
                                      const shortrate::VasicekModel& m, Time t,
                                      Rate x, double y, const QuadratureRule& rule) {
    if (t < 0.0 || t > p.maturity)
        throw DomainError("binary_endowment_reserve: t outside [0, T]");
    const Time T = p.maturity;
    double u_k = shortrate::digital_average_price(m, t, T, x, y, p.threshold);
    double u_all = shortrate::zcb_price(m, T - t, x);
    double benefit = lifestate::survival_probability(gm, t, T) *
                     (p.amount_high * u_k + p.amount_low * (u_all - u_k));
    double annuity = rule.integrate(
        [&](double s) {
            return lifestate::survival_probability(gm, t, s) *
                   shortrate::zcb_price(m, s - t, x);
        },
        t, T);
    return benefit - p.premium * annuity;
}

/// Where the pension leg of a deferred product is valued when solving for
/// the premium: discounted to inception, or valued at retirement against an
/// inception-valued premium annuity. Deferred pensions conventionally use
/// the retirement basis.
enum class PremiumBasis { inception, retirement };

struct PremiumReport {
    Money premium = 0.0;        // fair pi
    Money benefit_value = 0.0;  // value of benefits at pi = 0
    Money annuity_factor = 0.0; // value of a unit premium stream
};

/// Fair premium via linearity: the reserve is affine in pi, so
/// pi = benefit_value / annuity_factor, each from one quadrature pass.
/// For the binary product the average accumulator is seeded with y0
/// (default: the spot rate r0).
inline PremiumReport solve_premium_report(
    const policy::ProductParams& p, const lifestate::GompertzMakeham& gm,
    const shortrate::VasicekModel& m, Rate r0, const QuadratureRule& rule,
    PremiumBasis basis = PremiumBasis::retirement,
    double y0 = std::numeric_limits<double>::quiet_NaN()) {
    p.validate();
    PremiumReport rep;
    const double rho = p.factor;
    const Strike K = p.threshold;
    auto survival_discount = [&](double s) {
        return lifestate::survival_probability(gm, 0.0, s) *
               shortrate::zcb_price(m, s, r0);
    };
    switch (p.kind) {
        case policy::ProductTemplate::endowment_reduction: {
            rep.benefit_value = p.amount *
                                lifestate::survival_probability(gm, 0.0, p.maturity) *
                                shortrate::zcb_price(m, p.maturity, r0);
            rep.annuity_factor = rule.integrate(
                [&](double s) {
                    return lifestate::survival_probability(gm, 0.0, s) *
                           (shortrate::zcb_price(m, s, r0) -
                            rho * shortrate::digital_rate_price(m, s, r0, K));
                },
                0.0, p.maturity);
            break;
        }
        case policy::ProductTemplate::pension_bonus: {
            const Time That = p.retirement, T = p.maturity;
            if (basis == PremiumBasis::retirement) {
                // Pension leg valued at retirement: survival conditional on
                // reaching That, discounting over s - That at the spot rate.
                rep.benefit_value = p.pension * rule.integrate(
                    [&](double s) {
                        return lifestate::survival_probability(gm, That, s) *
                               (shortrate::zcb_price(m, s - That, r0) +
                                rho * shortrate::digital_rate_price(m, s - That,
                                                                    r0, K));
                    },
                    That, T);
            } else {
                rep.benefit_value = p.pension * rule.integrate(
                    [&](double s) {
                        return lifestate::survival_probability(gm, 0.0, s) *
                               (shortrate::zcb_price(m, s, r0) +
                                rho * shortrate::digital_rate_price(m, s, r0, K));
                    },
                    That, T);
            }
            rep.annuity_factor = rule.integrate(survival_discount, 0.0, That);
            break;
        }
        case policy::ProductTemplate::binary_average_endowment: {
            double y = std::isnan(y0) ? r0 : y0;
            double u_k = shortrate::digital_average_price(m, 0.0, p.maturity, r0, y,
                                                          K);
            double u_all = shortrate::zcb_price(m, p.maturity, r0);
            rep.benefit_value = lifestate::survival_probability(gm, 0.0, p.maturity) *
                                (p.amount_high * u_k +
                                 p.amount_low * (u_all - u_k));
            rep.annuity_factor = rule.integrate(survival_discount, 0.0, p.maturity);
            break;
        }
        default:
            throw DomainError("solve_premium: product has no premium leg");
    }
    if (rep.annuity_factor <= 0.0)
        throw EvaluationError("solve_premium: degenerate product, zero annuity factor");
    rep.premium = rep.benefit_value / rep.annuity_factor;
    return rep;
}

inline Money solve_premium(const policy::ProductParams& p,
                           const lifestate::GompertzMakeham& gm,
                           const shortrate::VasicekModel& m, Rate r0,
                           const QuadratureRule& rule,
                           PremiumBasis basis = PremiumBasis::retirement) {
    return solve_premium_report(p, gm, m, r0, rule, basis).premium;
}

struct MeanDiffEstimate {
    Money mean = 0.0;
    Money stderr_ = 0.0;
    std::size_t n_paths = 0;
};

/// Mean difference E[V^rho(t, r_t) - V^0(t, r_t)] for the endowment with
/// premium reduction against its rho = 0 twin, by sampling r_t from the
/// exact transition law and applying the closed forms pathwise. The benefit
/// legs cancel, leaving
///   (pi^0 - pi^rho) int_t^T p(t,s) zcb ds + pi^rho rho int_t^T p(t,s) U^K ds.
inline MeanDiffEstimate mean_reserve_difference(const policy::ProductParams& p,
                                                const lifestate::GompertzMakeham& gm,
                                                const shortrate::VasicekModel& m,
                                                Time t, std::size_t n_paths,
                                                std::uint64_t seed,
                                                const QuadratureRule& rule) {
    if (p.kind != policy::ProductTemplate::endowment_reduction)
        throw DomainError("mean_reserve_difference: endowment template required");
    if (n_paths < 2) throw DomainError("mean_reserve_difference: n_paths >= 2");
    if (t < 0.0 || t > p.maturity)
        throw DomainError("mean_reserve_difference: t outside [0, T]");

    policy::ProductParams flat = p;
    flat.factor = 0.0;
    const double pi0 =
        solve_premium_report(flat, gm, m, m.r0(), rule, PremiumBasis::inception)
            .premium;
    const double pi_rho =
        solve_premium_report(p, gm, m, m.r0(), rule, PremiumBasis::inception)
            .premium;

    auto diff_at = [&](Rate x) {
        double annuity = rule.integrate(
            [&](double s) {
                return lifestate::survival_probability(gm, t, s) *
                       shortrate::zcb_price(m, s - t, x);
            },
            t, p.maturity);
        double digital = rule.integrate(
            [&](double s) {
                return lifestate::survival_probability(gm, t, s) *
                       shortrate::digital_rate_price(m, s - t, x, p.threshold);
            },
            t, p.maturity);
        return (pi0 - pi_rho) * annuity + pi_rho * p.factor * digital;
    };

    MeanDiffEstimate est;
    est.n_paths = n_paths;
    if (t == 0.0) {
        est.mean = diff_at(m.r0());
        est.stderr_ = 0.0;
        return est;
    }
    auto cm = shortrate::conditional_moments(m, t, m.r0());
    const double sd = std::sqrt(cm.var_rate);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t chunk_start = 0; chunk_start < n_paths;
         chunk_start += shortrate::kChunkSize) {
        shortrate::NormalSampler rng(
            shortrate::chunk_seed(seed, chunk_start / shortrate::kChunkSize));
        const std::size_t end =
            std::min(chunk_start + shortrate::kChunkSize, n_paths);
        for (std::size_t i = chunk_start; i < end; ++i) {
            double d = diff_at(cm.mean_rate + sd * rng());
            sum += d;
            sumsq += d * d;
        }
    }
    const auto n = static_cast<double>(n_paths);
    est.mean = sum / n;
    double var = (sumsq - sum * sum / n) / (n - 1.0);
    est.stderr_ = std::sqrt(std::max(var, 0.0) / n);
    return est;
}

}  // namespace ratelife::closedform
