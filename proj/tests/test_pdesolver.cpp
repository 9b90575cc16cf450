#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ratelife/lifestate.hpp"
#include "ratelife/montecarlo.hpp"
#include "ratelife/pdesolver.hpp"
#include "ratelife/policy.hpp"
#include "ratelife/shortrate.hpp"

using namespace ratelife;
using pdesolver::Grid;
using pdesolver::Grid2;
using policy::PolicySpec;

namespace {

shortrate::VasicekModel model() {
    return shortrate::VasicekModel(0.1, 0.02, 0.01, 0.0, 0.03);
}

lifestate::GompertzMakeham mortality() {
    return lifestate::GompertzMakeham(0.00127529, 2.51137e-6, 0.1271853)
        .with_entry_age(30.0);
}

lifestate::TransitionModel no_mortality() {
    lifestate::TransitionModel m(2);
    m.set_rate(0, 1, 0.0);
    return m;
}

// x step 1/1200 with K = 0.04 on a node; CFL-compliant step count.
Grid standard_grid(double T, std::size_t n_steps) {
    Grid g;
    g.t0 = 0.0;
    g.t1 = T;
    g.n_steps = n_steps;
    g.x_min = -0.04;
    g.x_max = 0.10;
    g.n_x = 169;
    return g;
}

}  // namespace

TEST_CASE("zero policy solves to zero everywhere") {
    auto spec = PolicySpec::zero(2, 5.0);
    auto g = standard_grid(5.0, 900);
    auto surfaces =
        pdesolver::solve_thiele_1d(model().as_diffusion(), no_mortality(), spec, g);
    for (const auto& s : surfaces)
        for (double v : s.values) CHECK(v == 0.0);
}

TEST_CASE("terminal layer stores the payoff bit-exactly at nodes") {
    policy::ProductParams p;
    p.kind = policy::ProductTemplate::rate_cap;
    p.amount = 100000.0;
    p.threshold = Strike(0.04);
    p.maturity = 5.0;
    auto spec = policy::make_product(p);
    auto g = standard_grid(5.0, 900);
    auto surfaces = pdesolver::solve_thiele_1d(model().as_diffusion(),
                                               lifestate::TransitionModel::two_state(
                                                   mortality()),
                                               spec, g);
    const auto& s = surfaces[0];
    std::size_t last = s.times.size() - 1;
    REQUIRE(s.times[last] == 5.0);
    for (std::size_t m = 0; m < s.xs.size(); ++m)
        CHECK(s.value(last, m) == spec.terminal_payoff(0, s.xs[m], 0.0));
}

TEST_CASE("unit payoff with no mortality reproduces the bond price") {
    auto spec = PolicySpec::zero(2, 10.0);
    spec.terminal[0] = [](Rate, double) { return 1.0; };
    auto m = model();
    auto g = standard_grid(10.0, 1800);
    auto surfaces = pdesolver::solve_thiele_1d(m.as_diffusion(), no_mortality(),
                                               spec, g);
    const auto& s = surfaces[0];
    std::size_t k0 = s.time_index(0.0);
    for (std::size_t i = g.n_x / 4; i <= 3 * g.n_x / 4; ++i) {
        double exact = shortrate::zcb_price(m, 10.0, s.xs[i]);
        CHECK(std::abs(s.value(k0, i) - exact) / exact < 0.002);
    }
}

TEST_CASE("stability bound") {
    auto diffusion = model().as_diffusion();
    SECTION("degenerate coefficients report a capped bound") {
        shortrate::DiffusionModel still{[](Time, Rate) { return 0.0; },
                                        [](Time, Rate) { return 0.0; },
                                        nullptr, 0.0};
        Grid g;
        g.t0 = 0.0;
        g.t1 = 1.0;
        g.n_steps = 10;
        g.x_min = -0.2;
        g.x_max = -0.1;
        g.n_x = 11;
        CHECK(pdesolver::max_stable_dt(still, g) == 1e12);
    }
    SECTION("halving dx quarters the diffusive bound") {
        shortrate::DiffusionModel pure{[](Time, Rate) { return 0.0; },
                                       [](Time, Rate) { return 0.05; },
                                       nullptr, 0.0};
        Grid g;
        g.t0 = 0.0;
        g.t1 = 1.0;
        g.n_steps = 10;
        g.x_min = -0.2;
        g.x_max = -0.1;
        g.n_x = 11;
        double coarse = pdesolver::max_stable_dt(pure, g);
        g.n_x = 21;
        double fine = pdesolver::max_stable_dt(pure, g);
        CHECK(fine == Catch::Approx(coarse / 4.0).epsilon(1e-9));
    }
    SECTION("reference grid in natural units is comfortably stable") {
        // Time step 0.1, space step 1/12 read in natural rate units.
        shortrate::VasicekModel fast_reverting(0.1, 0.2, 0.01, 0.0, 0.03);
        Grid g;
        g.t0 = 0.0;
        g.t1 = 10.0;
        g.n_steps = 100;
        g.x_min = 0.0;
        g.x_max = 1.0 / 12.0 * 2.0;
        g.n_x = 3;
        CHECK(pdesolver::max_stable_dt(fast_reverting.as_diffusion(), g) >= 0.1);
    }
    SECTION("violating the bound raises with the computed limit") {
        auto g = standard_grid(10.0, 10);  // dt = 1 far above the bound
        auto spec = PolicySpec::zero(2, 10.0);
        try {
            pdesolver::solve_thiele_1d(diffusion, no_mortality(), spec, g);
            FAIL("expected StabilityError");
        } catch (const StabilityError& e) {
            CHECK(e.max_stable_dt > 0.0);
            CHECK(e.max_stable_dt < 1.0);
        }
    }
}

TEST_CASE("divergent payoff values are reported with their location") {
    auto spec = PolicySpec::zero(2, 1.0);
    spec.terminal[0] = [](Rate x, double) { return std::exp(1e6 * x); };
    auto g = standard_grid(1.0, 200);
    CHECK_THROWS_AS(
        pdesolver::solve_thiele_1d(model().as_diffusion(), no_mortality(), spec, g),
        DivergenceError);
}

TEST_CASE("solution is linear in the payoff data") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    const double alpha = unif(rng), beta = unif(rng);
    auto g = standard_grid(5.0, 900);
    auto life = lifestate::TransitionModel::two_state(mortality());
    auto diffusion = model().as_diffusion();

    auto spec1 = PolicySpec::zero(2, 5.0);
    spec1.terminal[0] = [](Rate x, double) { return 1000.0 * (1.0 + x); };
    spec1.running[0] = [](Time t, Rate, double) { return 50.0 + 10.0 * t; };
    auto spec2 = PolicySpec::zero(2, 5.0);
    spec2.terminal[0] = [](Rate x, double) { return x >= 0.04 ? 700.0 : 0.0; };
    spec2.running[0] = [](Time, Rate x, double) { return -30.0 * x; };

    auto combined = PolicySpec::zero(2, 5.0);
    combined.terminal[0] = [&](Rate x, double y) {
        return alpha * spec1.terminal[0](x, y) + beta * spec2.terminal[0](x, y);
    };
    combined.running[0] = [&](Time t, Rate x, double y) {
        return alpha * spec1.running[0](t, x, y) + beta * spec2.running[0](t, x, y);
    };

    auto s1 = pdesolver::solve_thiele_1d(diffusion, life, spec1, g)[0];
    auto s2 = pdesolver::solve_thiele_1d(diffusion, life, spec2, g)[0];
    auto sc = pdesolver::solve_thiele_1d(diffusion, life, combined, g)[0];
    double scale = 0.0;
    for (double v : sc.values) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < sc.values.size(); ++i) {
        double expect = alpha * s1.values[i] + beta * s2.values[i];
        CHECK(std::abs(sc.values[i] - expect) <= 1e-9 * scale);
    }
}

TEST_CASE("nonnegative data keeps the surface nonnegative on x >= 0") {
    auto spec = PolicySpec::zero(2, 5.0);
    spec.terminal[0] = [](Rate x, double) { return x >= 0.04 ? 100.0 : 0.0; };
    spec.running[0] = [](Time, Rate, double) { return 5.0; };
    Grid g;
    g.t0 = 0.0;
    g.t1 = 5.0;
    g.n_steps = 1200;
    g.x_min = 0.0;
    g.x_max = 0.12;
    g.n_x = 145;
    auto s = pdesolver::solve_thiele_1d(model().as_diffusion(),
                                        lifestate::TransitionModel::two_state(
                                            mortality()),
                                        spec, g)[0];
    for (double v : s.values) CHECK(v >= -1e-12);
}

TEST_CASE("refinement differences shrink") {
    policy::ProductParams p;
    p.kind = policy::ProductTemplate::rate_cap;
    p.amount = 100000.0;
    p.threshold = Strike(0.04);
    p.maturity = 5.0;
    auto spec = policy::make_product(p);
    auto life = lifestate::TransitionModel::two_state(mortality());
    auto diffusion = model().as_diffusion();

    auto value_at = [&](std::size_t n_x, std::size_t n_steps) {
        Grid g;
        g.t0 = 0.0;
        g.t1 = 5.0;
        g.n_steps = n_steps;
        g.x_min = -0.04;
        g.x_max = 0.10;
        g.n_x = n_x;
        auto s = pdesolver::solve_thiele_1d(diffusion, life, spec, g)[0];
        return s.value(s.time_index(0.0), g.nearest_x(0.03));
    };
    double coarse = value_at(85, 240);
    double mid = value_at(169, 960);
    double fine = value_at(337, 3840);
    CHECK(std::abs(fine - mid) < std::abs(mid - coarse));
}

TEST_CASE("cap value at inception agrees with MC") {
    policy::ProductParams p;
    p.kind = policy::ProductTemplate::rate_cap;
    p.amount = 100000.0;
    p.threshold = Strike(0.04);
    p.maturity = 10.0;
    auto spec = policy::make_product(p);
    auto m = model();
    auto life = lifestate::TransitionModel::two_state(mortality());
    auto g = standard_grid(10.0, 1800);
    auto s = pdesolver::solve_thiele_1d(m.as_diffusion(), life, spec, g)[0];
    double pde = s.value(s.time_index(0.0), g.nearest_x(0.03));
    auto mc = montecarlo::mc_reserve(m, life, spec, 0.0, 0.03, 0.0, 0.05, 40000, 5);
    CHECK(std::abs(pde - mc.mean) < 3.0 * mc.stderr_);
}

TEST_CASE("two-dimensional solver") {
    auto m = model();
    auto life = lifestate::TransitionModel::two_state(mortality());
    auto diffusion = m.as_diffusion();

    policy::ProductParams p;
    p.kind = policy::ProductTemplate::binary_average_endowment;
    p.amount_high = 150000.0;
    p.amount_low = 100000.0;
    p.threshold = Strike(0.04);
    p.maturity = 10.0;

    Grid2 g2;
    g2.base.t0 = 0.0;
    g2.base.t1 = 10.0;
    g2.base.x_min = -0.04;
    g2.base.x_max = 0.10;
    g2.base.n_x = 85;  // dx = 1/600, K on a node
    g2.y_min = -0.2;
    g2.y_max = 1.0;
    g2.n_y = 181;      // dy = 1/150, K*T = 0.4 on a node
    g2.base.n_steps = 1;
    double cap = pdesolver::max_stable_dt(diffusion, g2);
    g2.base.n_steps = static_cast<std::size_t>(std::ceil(10.0 / (0.95 * cap)));
    g2.base.store_every = g2.base.n_steps;  // keep first and last layers only

    SECTION("equal amounts reduce to the plain endowment in one dimension") {
        auto flat = p;
        flat.amount_high = flat.amount_low = 120000.0;
        auto spec2 = policy::make_product(flat);
        auto s2 = pdesolver::solve_thiele_2d(diffusion, life, spec2, g2)[0];
        auto spec1 = PolicySpec::zero(2, 10.0);
        spec1.terminal[0] = [](Rate, double) { return 120000.0; };
        auto s1 = pdesolver::solve_thiele_1d(diffusion, life, spec1, g2.base)[0];
        std::size_t k0 = s2.time_index(0.0);
        std::size_t m0 = g2.base.nearest_x(0.03);
        double v1 = s1.value(s1.time_index(0.0), m0);
        for (std::size_t n = 2; n + 2 < g2.n_y; n += 30) {
            double v2 = s2.value(k0, m0, n);
            CHECK(std::abs(v2 - v1) / std::abs(v1) < 0.005);
        }
    }
    SECTION("binary value matches the closed form at inception") {
        auto spec = policy::make_product(p);
        auto s = pdesolver::solve_thiele_2d(diffusion, life, spec, g2)[0];
        double pde = s.value(s.time_index(0.0), g2.base.nearest_x(0.03),
                             g2.nearest_y(0.0));
        double u_k = shortrate::digital_average_price(m, 0.0, 10.0, 0.03, 0.0,
                                                      Strike(0.04));
        double u_all = shortrate::zcb_price(m, 10.0, 0.03);
        double cf = lifestate::survival_probability(mortality(), 0.0, 10.0) *
                    (150000.0 * u_k + 100000.0 * (u_all - u_k));
        CHECK(std::abs(pde - cf) / cf < 0.01);
    }
    SECTION("average-dependent policies are rejected by the 1d solver") {
        auto spec = policy::make_product(p);
        CHECK_THROWS_AS(
            pdesolver::solve_thiele_1d(diffusion, life, spec, g2.base),
            DomainError);
    }
}

TEST_CASE("monotone cubic interpolation") {
    pdesolver::MonotoneCubic f({0.0, 1.0, 2.0, 3.0}, {0.0, 0.5, 0.6, 2.0});
    CHECK(f(0.0) == 0.0);
    CHECK(f(1.0) == 0.5);
    CHECK(f(3.0) == 2.0);
    double prev = -1.0;
    for (double x = 0.0; x <= 3.0; x += 0.01) {
        double v = f(x);
        CHECK(v >= prev - 1e-12);  // monotone data stays monotone
        prev = v;
    }
    // Linear extrapolation beyond the range.
    CHECK(f(4.0) == Catch::Approx(2.0 + (f(3.0) - f(2.999)) / 0.001 * 1.0)
                        .epsilon(1e-2));
    CHECK_THROWS_AS(pdesolver::MonotoneCubic({0.0, 0.0}, {1.0, 2.0}), DomainError);
    CHECK_THROWS_AS(pdesolver::MonotoneCubic({0.0}, {1.0}), DomainError);
}

TEST_CASE("reinsurance orchestration") {
    auto m = model();
    auto life = lifestate::TransitionModel::two_state(mortality());
    auto diffusion = m.as_diffusion();

    policy::ProductParams p;
    p.kind = policy::ProductTemplate::reinsurance_treaty;
    p.pension = 20000.0;
    p.threshold = Strike(0.04);
    p.factor = 0.25;
    p.maturity = 90.0;
    p.retirement = 40.0;

    Grid inner;
    inner.t0 = 40.0;
    inner.t1 = 90.0;
    inner.x_min = -0.04;
    inner.x_max = 0.10;
    inner.n_x = 85;
    inner.n_steps = 1;
    inner.n_steps = static_cast<std::size_t>(
        std::ceil(50.0 / (0.95 * pdesolver::max_stable_dt(diffusion, inner))));
    inner.store_every = inner.n_steps;

    Grid2 outer;
    outer.base = inner;
    outer.base.t0 = 0.0;
    outer.base.t1 = 40.0;
    outer.y_min = -0.4;
    outer.y_max = 2.4;
    outer.n_y = 113;  // dy = 0.025, K * That = 1.6 on a node
    outer.base.n_steps = 1;
    outer.base.n_steps = static_cast<std::size_t>(
        std::ceil(40.0 / (0.95 * pdesolver::max_stable_dt(diffusion, outer))));
    outer.base.store_every = outer.base.n_steps;

    SECTION("zero participation gives a zero outer surface") {
        auto p0 = p;
        p0.factor = 0.0;
        auto sol = pdesolver::solve_reinsurance(diffusion, life, p0, inner, outer);
        for (double v : sol.outer.values) CHECK(v == 0.0);
    }
    SECTION("zero pension gives zero everywhere") {
        auto p0 = p;
        p0.pension = 0.0;
        auto sol = pdesolver::solve_reinsurance(diffusion, life, p0, inner, outer);
        for (double v : sol.inner.values) CHECK(v == 0.0);
        for (double v : sol.outer.values) CHECK(v == 0.0);
    }
    SECTION("inner stage matches the annuity quadrature") {
        auto sol = pdesolver::solve_reinsurance(diffusion, life, p, inner, outer);
        auto gm = mortality();
        std::size_t k = sol.inner.time_index(40.0);
        for (double x : {0.0, 0.03, 0.06}) {
            // Composite Simpson over the pension leg.
            const std::size_t n = 800;
            double acc = 0.0;
            for (std::size_t i = 0; i <= n; ++i) {
                double s = 40.0 + 50.0 * static_cast<double>(i) /
                                      static_cast<double>(n);
                double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
                acc += w * lifestate::survival_probability(gm, 40.0, s) *
                       shortrate::zcb_price(m, s - 40.0, x);
            }
            double quad = 20000.0 * acc * (50.0 / static_cast<double>(n)) / 3.0;
            double pde = sol.inner.value(k, inner.nearest_x(x));
            CHECK(std::abs(pde - quad) / quad < 0.003);
        }
    }
    SECTION("grid extents are validated") {
        auto bad = inner;
        bad.t0 = 35.0;
        CHECK_THROWS_AS(
            pdesolver::solve_reinsurance(diffusion, life, p, bad, outer),
            DomainError);
    }
}

TEST_CASE("breakpoints must land on time nodes") {
    policy::ProductParams p;
    p.kind = policy::ProductTemplate::pension_bonus;
    p.pension = 20000.0;
    p.threshold = Strike(0.04);
    p.maturity = 9.0;
    p.retirement = 4.0;
    auto spec = policy::make_product(p);
    Grid g;
    g.t0 = 0.0;
    g.t1 = 9.0;
    g.n_steps = 2000;  // 4.0 not on a node
    g.x_min = -0.04;
    g.x_max = 0.10;
    g.n_x = 169;
    CHECK_THROWS_AS(
        pdesolver::solve_thiele_1d(model().as_diffusion(), no_mortality(), spec, g),
        DomainError);
}
