#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include "ratelife/lifestate.hpp"

using namespace ratelife;
using lifestate::GompertzMakeham;
using lifestate::TransitionMatrix;
using lifestate::TransitionModel;

namespace {

// Independent high-precision oracle: adaptive Simpson integration of a rate
// function, refined until successive halvings agree to `tol`.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol = 1e-12) {
    auto simpson = [&](std::size_t n) {
        double h = (b - a) / static_cast<double>(n);
        double acc = f(a) + f(b);
        for (std::size_t k = 1; k < n; ++k)
            acc += (k % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(k));
        return acc * h / 3.0;
    };
    double prev = simpson(64);
    for (std::size_t n = 128; n <= (1u << 22); n *= 2) {
        double cur = simpson(n);
        if (std::abs(cur - prev) < tol) return cur;
        prev = cur;
    }
    return prev;
}

GompertzMakeham reference_mortality() {
    return GompertzMakeham(0.00127529, 2.51137e-6, 0.1271853).with_entry_age(30.0);
}

}  // namespace

TEST_CASE("constant-rate transition matches the exponential closed form") {
    TransitionModel m(2);
    m.set_rate(0, 1, 0.01);
    auto p = lifestate::transition_probabilities(m, 0.0, 10.0, 100);
    CHECK(p(0, 0) == Catch::Approx(std::exp(-0.1)).margin(1e-7));
    CHECK(p(0, 1) == Catch::Approx(1.0 - std::exp(-0.1)).margin(1e-7));
    CHECK(p(1, 1) == 1.0);
}

TEST_CASE("zero-length interval gives the identity matrix") {
    TransitionModel m(3);
    m.set_rate(0, 1, 0.5);
    m.set_rate(1, 2, [](Time t) { return 0.1 + t; });
    auto p = lifestate::transition_probabilities(m, 2.0, 2.0, 10);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(p(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("age-30 mortality survival vs independent quadrature oracle") {
    auto gm = reference_mortality();
    double integral =
        integrate_adaptive([&](double u) { return gm.rate(u); }, 0.0, 10.0, 1e-10);
    double expected = std::exp(-integral);
    auto model = TransitionModel::two_state(gm);
    auto p = lifestate::transition_probabilities(model, 0.0, 10.0, 200);
    CHECK(p(0, 0) == Catch::Approx(expected).margin(1e-7));
    CHECK(lifestate::survival_probability(gm, 0.0, 10.0) ==
          Catch::Approx(expected).margin(1e-10));
}

TEST_CASE("survival probability closed form") {
    SECTION("pure Makeham term") {
        GompertzMakeham gm(0.02, 0.0, 0.3);
        CHECK(lifestate::survival_probability(gm, 0.0, 5.0) ==
              Catch::Approx(std::exp(-0.1)).epsilon(1e-12));
    }
    SECTION("degenerate exponent") {
        GompertzMakeham gm(0.01, 0.02, 0.0);
        CHECK(lifestate::survival_probability(gm, 1.0, 3.0) ==
              Catch::Approx(std::exp(-0.06)).epsilon(1e-12));
    }
    SECTION("coincident times") {
        CHECK(lifestate::survival_probability(reference_mortality(), 4.0, 4.0) == 1.0);
    }
    SECTION("reversed times rejected") {
        CHECK_THROWS_AS(lifestate::survival_probability(reference_mortality(), 2.0, 1.0),
                        DomainError);
    }
}

TEST_CASE("survival closed form agrees with RK4 over a long horizon") {
    auto gm = reference_mortality();
    auto model = TransitionModel::two_state(gm);
    auto p = lifestate::transition_probabilities(model, 0.0, 40.0, 800);
    CHECK(p(0, 0) ==
          Catch::Approx(lifestate::survival_probability(gm, 0.0, 40.0)).margin(1e-7));
}

TEST_CASE("mortality rate evaluation") {
    auto gm = reference_mortality();
    GompertzMakeham base(0.00127529, 2.51137e-6, 0.1271853);
    CHECK(lifestate::mortality_rate(base, 0.0) ==
          Catch::Approx(0.00127529 + 2.51137e-6).epsilon(1e-12));
    CHECK(lifestate::mortality_rate(base, 40.0) ==
          Catch::Approx(0.00127529 + 2.51137e-6 * std::exp(0.1271853 * 40.0))
              .epsilon(1e-12));
    // The entry-age shift composes the exponentials.
    CHECK(gm.rate(10.0) ==
          Catch::Approx(base.rate(40.0)).epsilon(1e-12));
    SECTION("alpha1 = 0 is flat") {
        GompertzMakeham flat(0.004, 0.0, 0.2);
        CHECK(flat.rate(0.0) == 0.004);
        CHECK(flat.rate(55.0) == 0.004);
    }
}

TEST_CASE("Chapman-Kolmogorov holds for randomized rate functions") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        TransitionModel m(3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                if (i == j) continue;
                double c = 0.05 * unif(rng);
                double amp = 0.02 * unif(rng);
                m.set_rate(i, j, [c, amp](Time t) {
                    return c + amp * (1.0 + std::sin(t));
                });
            }
        const double s = 0.0, u = 3.7, t = 9.2;
        auto whole = lifestate::transition_probabilities(m, s, t, 400);
        auto first = lifestate::transition_probabilities(m, s, u, 200);
        auto second = lifestate::transition_probabilities(m, u, t, 200);
        auto chained = first.multiply(second);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(whole(i, j) == Catch::Approx(chained(i, j)).margin(1e-7));
    }
}

TEST_CASE("rows of every transition matrix sum to one") {
    TransitionModel m(3);
    m.set_rate(0, 1, [](Time t) { return 0.02 + 0.01 * t; });
    m.set_rate(0, 2, 0.005);
    m.set_rate(1, 2, 0.1);
    for (double t : {0.5, 2.0, 10.0, 30.0}) {
        auto p = lifestate::transition_probabilities(m, 0.0, t, 200);
        for (std::size_t i = 0; i < 3; ++i) {
            double row = p(i, 0) + p(i, 1) + p(i, 2);
            CHECK(row == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("two-state survival is nonincreasing in the horizon") {
    auto model = TransitionModel::two_state(reference_mortality());
    double prev = 1.0;
    for (int k = 1; k <= 20; ++k) {
        auto p = lifestate::transition_probabilities(model, 0.0, 3.0 * k, 300);
        CHECK(p(0, 0) <= prev + 1e-12);
        prev = p(0, 0);
    }
}

TEST_CASE("RK4 refinement shows fourth-order convergence") {
    TransitionModel m(2);
    m.set_rate(0, 1, [](Time t) { return 0.02 + 0.015 * std::sin(t); });
    double exact = std::exp(-integrate_adaptive(
        [](double t) { return 0.02 + 0.015 * std::sin(t); }, 0.0, 10.0, 1e-13));
    double err_coarse =
        std::abs(lifestate::transition_probabilities(m, 0.0, 10.0, 5)(0, 0) - exact);
    double err_fine =
        std::abs(lifestate::transition_probabilities(m, 0.0, 10.0, 10)(0, 0) - exact);
    CHECK(err_fine * 8.0 < err_coarse);
}

TEST_CASE("validation and error paths") {
    SECTION("reversed interval") {
        TransitionModel m(2);
        m.set_rate(0, 1, 0.01);
        CHECK_THROWS_AS(lifestate::transition_probabilities(m, 5.0, 1.0, 10),
                        DomainError);
    }
    SECTION("non-finite rate evaluation") {
        TransitionModel m(2);
        m.set_rate(0, 1, [](Time) { return std::nan(""); });
        CHECK_THROWS_AS(lifestate::transition_probabilities(m, 0.0, 1.0, 10),
                        EvaluationError);
    }
    SECTION("unstable step count reports instead of clamping") {
        TransitionModel m(2);
        m.set_rate(0, 1, 100.0);
        CHECK_THROWS_AS(lifestate::transition_probabilities(m, 0.0, 1.0, 1),
                        EvaluationError);
    }
    SECTION("constructor validation") {
        CHECK_THROWS_AS(GompertzMakeham(0.01, -1e-9, 0.1), DomainError);
        CHECK_THROWS_AS(TransitionModel(1), DomainError);
        TransitionModel m(2);
        CHECK_THROWS_AS(m.set_rate(0, 0, 0.1), DomainError);
        CHECK_THROWS_AS(m.set_rate(0, 2, 0.1), DomainError);
    }
    SECTION("absorbing state detection") {
        auto model = TransitionModel::two_state(reference_mortality());
        CHECK(model.absorbing(1, 5.0));
        CHECK_FALSE(model.absorbing(0, 5.0));
    }
}
