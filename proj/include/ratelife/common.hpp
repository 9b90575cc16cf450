#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ratelife {

using Rate = double;   // per year
using Time = double;   // years
using Money = double;

/// Standard normal CDF via the complementary error function.
/// Absolute error <= 1e-12 over the full range; premium golden values
/// depend on this tolerance, so it is part of the contract.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Strike threshold that may be -inf (degenerates to a plain bond) or
/// +inf (price 0). Tagged explicitly rather than using sentinel floats.
class Strike {
public:
    enum class Kind { finite, neg_inf, pos_inf };

    Strike(double k) : kind_(Kind::finite), value_(k) {
        if (!std::isfinite(k))
            throw std::invalid_argument("finite Strike constructed from non-finite value");
    }
    static Strike minus_infinity() { return Strike(Kind::neg_inf); }
    static Strike plus_infinity() { return Strike(Kind::pos_inf); }

    Kind kind() const { return kind_; }
    bool finite() const { return kind_ == Kind::finite; }
    double value() const {
        if (!finite()) throw std::logic_error("value() on infinite Strike");
        return value_;
    }

private:
    explicit Strike(Kind k) : kind_(k), value_(0.0) {}
    Kind kind_;
    double value_;
};

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StabilityError : std::runtime_error {
    double max_stable_dt;
    StabilityError(const std::string& msg, double bound)
        : std::runtime_error(msg), max_stable_dt(bound) {}
};

struct DivergenceError : std::runtime_error {
    double t, x;
    DivergenceError(const std::string& msg, double t_, double x_)
        : std::runtime_error(msg), t(t_), x(x_) {}
};

}  // namespace ratelife
