// Minimal library walkthrough: price an endowment whose premium is reduced
// when the short rate is high, then cross-check the closed form against the
// PDE solver and a Monte Carlo estimate at the same point.

#include <cstdio>

#include "ratelife/closedform.hpp"
#include "ratelife/lifestate.hpp"
#include "ratelife/montecarlo.hpp"
#include "ratelife/pdesolver.hpp"
#include "ratelife/policy.hpp"
#include "ratelife/shortrate.hpp"

using namespace ratelife;

int main() {
    shortrate::VasicekModel model(0.1, 0.02, 0.01, 0.0, 0.03);
    auto gm = lifestate::GompertzMakeham(0.00127529, 2.51137e-6, 0.1271853)
                  .with_entry_age(30.0);
    auto life = lifestate::TransitionModel::two_state(gm);

    policy::ProductParams params;
    params.kind = policy::ProductTemplate::endowment_reduction;
    params.amount = 100000.0;
    params.threshold = Strike(0.04);
    params.factor = 0.2;
    params.maturity = 10.0;

    closedform::QuadratureRule rule;
    params.premium = closedform::solve_premium(params, gm, model, model.r0(), rule);
    std::printf("fair premium: %.2f per year\n", params.premium);

    double cf = closedform::endowment_reduction_reserve(params, gm, model, 2.0,
                                                        0.03, rule);
    std::printf("closed-form reserve at (t=2, x=0.03): %.2f\n", cf);

    auto spec = policy::make_product(params);
    auto diffusion = model.as_diffusion();
    pdesolver::Grid g;
    g.t0 = 0.0;
    g.t1 = params.maturity;
    g.x_min = -0.04;
    g.x_max = 0.10;
    g.n_x = 169;  // K = 0.04 lands on a node
    g.n_steps = 2000;
    auto surfaces = pdesolver::solve_thiele_1d(diffusion, life, spec, g);
    std::size_t k = surfaces[0].time_index(2.0);
    std::size_t m = g.nearest_x(0.03);
    std::printf("PDE reserve at the same point:        %.2f\n",
                surfaces[0].value(k, m));

    auto mc = montecarlo::mc_reserve(model, life, spec, 2.0, 0.03, 0.0, 0.05,
                                     20000, 42);
    std::printf("MC reserve at the same point:         %.2f (se %.2f)\n", mc.mean,
                mc.stderr_);
    return 0;
}
