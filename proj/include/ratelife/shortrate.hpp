#pragma once

// Short-rate models. Vasicek dynamics dr = a(b - r)dt + sigma dW with exact
// conditional moments of the terminal rate r_s and the accumulated rate
// integral over the horizon, closed-form discounted digitals, and exact
// bivariate transition simulation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ratelife/common.hpp"

namespace ratelife::shortrate {

/// Generic Ito diffusion dr = lambda(t,r)dt + tau(t,r)dW with a market price
/// of risk gamma(t,r). Risk-neutral drift is lambda + gamma*tau.
struct DiffusionModel {
    std::function<double(Time, Rate)> drift;       // lambda
    std::function<double(Time, Rate)> volatility;  // tau > 0
    std::function<double(Time, Rate)> price_of_risk;
    Rate r0 = 0.0;

    double risk_neutral_drift(Time t, Rate x) const {
        double lam = drift(t, x);
        double tau = volatility(t, x);
        double gam = price_of_risk ? price_of_risk(t, x) : 0.0;
        double d = lam + gam * tau;
        if (!std::isfinite(d) || !std::isfinite(tau))
            throw EvaluationError("DiffusionModel: non-finite coefficient");
        return d;
    }
};

/// Joint law of (r_s, int_t^s r du) given r_t = x, horizon h = s - t.
struct ConditionalMoments {
    double mean_rate;       // E[r_s | r_t = x]
    double var_rate;        // Var[r_s]
    double mean_integral;   // E[int_t^s r du]
    double var_integral;    // Var[int]
    double covariance;      // Cov(r_s, int)
    double correlation;     // 0 when h = 0
};

class VasicekModel {
public:
    /// A nonzero constant gamma is folded into the long-run level at
    /// construction (b <- b + sigma*gamma/a), so all pricing below is under
    /// the risk-neutral parameterization. a = 0 is rejected: the closed
    /// forms divide by a; use the generic PDE/MC path for that case.
    VasicekModel(double a, double b, double sigma, double gamma, Rate r0)
        : a_(a), b_(b + sigma * gamma / (a == 0.0 ? 1.0 : a)), sigma_(sigma), r0_(r0) {
        if (a == 0.0) throw DomainError("VasicekModel: a must be nonzero");
        if (sigma <= 0.0) throw DomainError("VasicekModel: sigma must be > 0");
    }

    double a() const { return a_; }
    double b() const { return b_; }  // risk-neutral long-run level
    double sigma() const { return sigma_; }
    Rate r0() const { return r0_; }

    double drift(Rate x) const { return a_ * (b_ - x); }

    DiffusionModel as_diffusion() const {
        double a = a_, b = b_, s = sigma_;
        return DiffusionModel{
            [a, b](Time, Rate x) { return a * (b - x); },
            [s](Time, Rate) { return s; },
            [](Time, Rate) { return 0.0; },
            r0_};
    }

private:
    double a_, b_, sigma_;
    Rate r0_;
};

inline ConditionalMoments conditional_moments(const VasicekModel& m, Time h, Rate x) {
    if (h < 0.0) throw DomainError("conditional_moments: horizon must be >= 0");
    const double a = m.a(), b = m.b(), s2 = m.sigma() * m.sigma();
    const double e = std::exp(-a * h), e2 = std::exp(-2.0 * a * h);
    ConditionalMoments cm;
    cm.mean_rate = x * e + b * (1.0 - e);
    cm.mean_integral = (x - b) * (1.0 - e) / a + b * h;
    cm.var_rate = s2 * (1.0 - e2) / (2.0 * a);
    cm.var_integral =
        s2 / (a * a) * (h - 2.0 * (1.0 - e) / a + (1.0 - e2) / (2.0 * a));
    cm.covariance = s2 / a * ((1.0 - e) / a - (1.0 - e2) / (2.0 * a));
    cm.correlation =
        (h == 0.0 || cm.var_rate <= 0.0 || cm.var_integral <= 0.0)
            ? 0.0
            : cm.covariance / std::sqrt(cm.var_rate * cm.var_integral);
    return cm;
}

/// Zero-coupon bond price over horizon h given current rate x:
/// E[exp(-int r)] = exp(-mean_integral + var_integral/2).
inline Money zcb_price(const VasicekModel& m, Time h, Rate x) {
    if (h < 0.0) throw DomainError("zcb_price: horizon must be >= 0");
    auto cm = conditional_moments(m, h, x);
    return std::exp(-cm.mean_integral + 0.5 * cm.var_integral);
}

/// Discounted digital on the terminal rate: E[exp(-int r) 1{r_s >= K}].
///
/// Derived from the bivariate normal law of (r_s, int r): tilting by the
/// discount factor shifts the mean of r_s by -covariance, variances
/// unchanged, so the digital weight is Phi((mean_rate - cov - K)/sd_rate).
/// Validated against a Monte Carlo oracle (see tests).
inline Money digital_rate_price(const VasicekModel& m, Time h, Rate x, Strike K) {
    if (h < 0.0) throw DomainError("digital_rate_price: horizon must be >= 0");
    if (K.kind() == Strike::Kind::pos_inf) return 0.0;
    if (K.kind() == Strike::Kind::neg_inf) return zcb_price(m, h, x);
    if (h == 0.0) return x >= K.value() ? 1.0 : 0.0;
    auto cm = conditional_moments(m, h, x);
    double bond = std::exp(-cm.mean_integral + 0.5 * cm.var_integral);
    double d = (cm.mean_rate - cm.covariance - K.value()) / std::sqrt(cm.var_rate);
    return bond * normal_cdf(d);
}

/// Discounted digital on the running integral: with y = realized integral up
/// to t, pays when y + int_t^s r du >= K*s. Tilting shifts the integral's
/// mean by -var_integral.
inline Money digital_average_price(const VasicekModel& m, Time t, Time s, Rate x,
                                   double y, Strike K) {
    if (t > s) throw DomainError("digital_average_price: requires t <= s");
    const double h = s - t;
    if (K.kind() == Strike::Kind::pos_inf) return 0.0;
    if (K.kind() == Strike::Kind::neg_inf) return zcb_price(m, h, x);
    const double threshold = K.value() * s - y;
    if (h == 0.0) return 0.0 >= threshold ? 1.0 : 0.0;
    auto cm = conditional_moments(m, h, x);
    double bond = std::exp(-cm.mean_integral + 0.5 * cm.var_integral);
    double d = (cm.mean_integral - cm.var_integral - threshold) /
               std::sqrt(cm.var_integral);
    return bond * normal_cdf(d);
}

// ---------------------------------------------------------------------------
// Deterministic random number generation.
//
// Stream-splitting rule: paths are partitioned into fixed chunks of
// kChunkSize; chunk c draws from mt19937_64 seeded with
// splitmix64(seed ^ (c+1)*0x9E3779B97F4A7C15). Results are therefore
// bit-identical for a given seed regardless of how chunks are scheduled.
// ---------------------------------------------------------------------------

constexpr std::size_t kChunkSize = 4096;

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t chunk_seed(std::uint64_t seed, std::size_t chunk) {
    return splitmix64(seed ^ (static_cast<std::uint64_t>(chunk) + 1) *
                                 0x9E3779B97F4A7C15ull);
}

/// Standard normal draws by the basic Box-Muller transform on explicitly
/// constructed (0,1] uniforms, so the stream is fully specified.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    double uniform01() {  // in (0, 1]
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1p-53;
    }
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Exact one-step transition of (r, accumulated integral) over dt, sampled
/// from the bivariate Gaussian law given by conditional_moments.
class VasicekTransition {
public:
    VasicekTransition(const VasicekModel& m, double dt) : dt_(dt) {
        if (dt <= 0.0) throw DomainError("VasicekTransition: dt must be > 0");
        // The means are affine in the current rate and the second moments are
        // rate-free, so everything is precomputable.
        auto cm = conditional_moments(m, dt, 0.0);
        const double e = std::exp(-m.a() * dt);
        rate_slope_ = e;
        rate_shift_ = m.b() * (1.0 - e);
        int_slope_ = (1.0 - e) / m.a();
        int_shift_ = m.b() * (dt - int_slope_);
        sd_r_ = std::sqrt(cm.var_rate);
        sd_i_ = std::sqrt(cm.var_integral);
        rho_ = cm.correlation;
        rho_c_ = std::sqrt(std::max(0.0, 1.0 - rho_ * rho_));
    }

    /// Advances (r, ybar): ybar accumulates the rate integral.
    void step(double& r, double& ybar, NormalSampler& rng) const {
        double z1 = rng();
        double z2 = rng();
        double dr = rate_slope_ * r + rate_shift_ + sd_r_ * z1;
        double di = int_slope_ * r + int_shift_ + sd_i_ * (rho_ * z1 + rho_c_ * z2);
        r = dr;
        ybar += di;
    }

    double dt() const { return dt_; }

private:
    double dt_, rate_slope_, rate_shift_, int_slope_, int_shift_;
    double sd_r_, sd_i_, rho_, rho_c_;
};

struct PathPoint {
    double r;
    double ybar;  // accumulated rate integral from the path's start value
};

/// Dense path ensemble; paths[p][k] is the state after k steps.
struct PathEnsemble {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<std::vector<PathPoint>> paths;
};

/// Exact-transition simulation of (r, rbar) under the pricing measure.
/// Identical seeds produce bit-identical ensembles.
inline PathEnsemble simulate_exact(const VasicekModel& m, Time t0, Rate x0,
                                   double y0, Time horizon, Time dt,
                                   std::size_t n_paths, std::uint64_t seed) {
    if (dt <= 0.0) throw DomainError("simulate_exact: dt must be > 0");
    if (n_paths < 1) throw DomainError("simulate_exact: n_paths must be >= 1");
    const auto n_steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    VasicekTransition trans(m, dt);

    PathEnsemble e;
    e.t0 = t0;
    e.dt = dt;
    e.paths.resize(n_paths);
    for (std::size_t chunk_start = 0; chunk_start < n_paths;
         chunk_start += kChunkSize) {
        NormalSampler rng(chunk_seed(seed, chunk_start / kChunkSize));
        const std::size_t end = std::min(chunk_start + kChunkSize, n_paths);
        for (std::size_t p = chunk_start; p < end; ++p) {
            auto& path = e.paths[p];
            path.resize(n_steps + 1);
            double r = x0, ybar = y0;
            path[0] = {r, ybar};
            for (std::size_t k = 0; k < n_steps; ++k) {
                trans.step(r, ybar, rng);
                path[k + 1] = {r, ybar};
            }
        }
    }
    return e;
}

}  // namespace ratelife::shortrate
