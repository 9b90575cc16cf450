// Command-line front-end: premium reports, reserve surfaces as CSV,
// MC validation of PDE surfaces, and the mean-difference curve.
//
// Exit codes: 0 success/PASS, 1 validation FAIL, 2 config error,
// 3 unsupported method/product combination.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ratelife/closedform.hpp"
#include "ratelife/config.hpp"
#include "ratelife/csv.hpp"
#include "ratelife/lifestate.hpp"
#include "ratelife/montecarlo.hpp"
#include "ratelife/pdesolver.hpp"
#include "ratelife/policy.hpp"
#include "ratelife/shortrate.hpp"

namespace rl = ratelife;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitUnsupported = 3;

struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) { return rl::csv::format_double(v); }

// Picks n_steps so dt clears the CFL bound with margin and every cash-flow
// breakpoint lands on a time node.
std::size_t auto_steps(double t0, double t1, double dt_cap,
                       const std::vector<double>& breakpoints) {
    const double span = t1 - t0;
    auto n = static_cast<std::size_t>(std::ceil(span / (0.95 * dt_cap)));
    n = std::max<std::size_t>(n, 1);
    for (std::size_t extra = 0; extra < 100000; ++extra, ++n) {
        const double dt = span / static_cast<double>(n);
        bool ok = true;
        for (double b : breakpoints) {
            if (b <= t0 || b >= t1) continue;
            double steps = (b - t0) / dt;
            if (std::abs(steps - std::round(steps)) > 1e-6) { ok = false; break; }
        }
        if (ok) return n;
    }
    throw rl::config::ConfigError("cannot align time grid with breakpoints");
}

rl::pdesolver::Grid build_grid(const rl::config::RunConfig& cfg, double t0,
                               double t1, const rl::shortrate::DiffusionModel& model,
                               const std::vector<double>& breakpoints) {
    if (!cfg.has_grid || cfg.grid.n_x < 3)
        throw rl::config::ConfigError("surface requires a [grid] section with n_x >= 3");
    rl::pdesolver::Grid g;
    g.t0 = t0;
    g.t1 = t1;
    g.x_min = cfg.grid.x_min;
    g.x_max = cfg.grid.x_max;
    g.n_x = cfg.grid.n_x;
    g.store_every = cfg.grid.store_every;
    g.n_steps = 1;
    double cap = rl::pdesolver::max_stable_dt(model, g);
    double dt = cfg.grid.dt > 0.0 ? std::min(cfg.grid.dt, cap) : cap;
    g.n_steps = auto_steps(t0, t1, dt, breakpoints);
    return g;
}

rl::pdesolver::Grid2 build_grid2(const rl::config::RunConfig& cfg, double t0,
                                 double t1,
                                 const rl::shortrate::DiffusionModel& model,
                                 const std::vector<double>& breakpoints) {
    if (cfg.grid.n_y < 3)
        throw rl::config::ConfigError(
            "this product needs a 2d grid: set y_min, y_max, n_y");
    rl::pdesolver::Grid2 g2;
    g2.base = build_grid(cfg, t0, t1, model, breakpoints);
    g2.y_min = cfg.grid.y_min;
    g2.y_max = cfg.grid.y_max;
    g2.n_y = cfg.grid.n_y;
    double cap = rl::pdesolver::max_stable_dt(model, g2);
    double dt = cfg.grid.dt > 0.0 ? std::min(cfg.grid.dt, cap) : cap;
    g2.base.n_steps = auto_steps(t0, t1, dt, breakpoints);
    return g2;
}

std::string state_path(const std::string& out, const std::string& tag) {
    auto dot = out.rfind('.');
    if (dot == std::string::npos) return out + "." + tag;
    return out.substr(0, dot) + "." + tag + out.substr(dot);
}

void write_surface_file(const std::string& path,
                        const rl::pdesolver::ReserveSurface& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    rl::csv::write_surface(f, s);
}

bool is_two_dim(rl::policy::ProductTemplate k) {
    return k == rl::policy::ProductTemplate::binary_average_endowment;
}

int cmd_premium(const rl::config::RunConfig& cfg) {
    auto params = cfg.product_params();
    auto model = cfg.vasicek();
    auto gm = cfg.gompertz_makeham();
    auto rule = cfg.quadrature_rule();
    using PT = rl::policy::ProductTemplate;
    if (params.kind != PT::endowment_reduction && params.kind != PT::pension_bonus &&
        params.kind != PT::binary_average_endowment)
        throw UnsupportedError("product has no premium leg");
    auto basis = params.kind == PT::pension_bonus
                     ? rl::closedform::PremiumBasis::retirement
                     : rl::closedform::PremiumBasis::inception;
    auto rep = rl::closedform::solve_premium_report(params, gm, model, model.r0(),
                                                    rule, basis);
    std::cout << "premium = " << fmt(rep.premium) << "\n";
    std::cout << "benefit_value = " << fmt(rep.benefit_value) << "\n";
    std::cout << "annuity_factor = " << fmt(rep.annuity_factor) << "\n";
    return kExitPass;
}

int cmd_surface(const rl::config::RunConfig& cfg, const std::string& method,
                const std::string& out) {
    auto params = cfg.product_params();
    auto model = cfg.vasicek();
    auto diffusion = model.as_diffusion();
    auto gm = cfg.gompertz_makeham();
    auto life = rl::lifestate::TransitionModel::two_state(gm);
    using PT = rl::policy::ProductTemplate;

    if (method == "pde") {
        if (params.kind == PT::reinsurance_treaty) {
            auto inner_grid = build_grid(cfg, params.retirement, params.maturity,
                                         diffusion, {});
            auto outer_grid =
                build_grid2(cfg, 0.0, params.retirement, diffusion, {});
            auto sol = rl::pdesolver::solve_reinsurance(diffusion, life, params,
                                                        inner_grid, outer_grid);
            write_surface_file(state_path(out, "inner"), sol.inner);
            write_surface_file(state_path(out, "outer"), sol.outer);
            return kExitPass;
        }
        auto spec = rl::policy::make_product(params);
        if (spec.uses_average) {
            auto g2 = build_grid2(cfg, 0.0, spec.horizon, diffusion,
                                  spec.breakpoints);
            auto surfaces = rl::pdesolver::solve_thiele_2d(diffusion, life, spec, g2);
            for (const auto& s : surfaces)
                write_surface_file(
                    state_path(out, "state" + std::to_string(s.state)), s);
        } else {
            auto g = build_grid(cfg, 0.0, spec.horizon, diffusion, spec.breakpoints);
            auto surfaces = rl::pdesolver::solve_thiele_1d(diffusion, life, spec, g);
            for (const auto& s : surfaces)
                write_surface_file(
                    state_path(out, "state" + std::to_string(s.state)), s);
        }
        return kExitPass;
    }

    if (method != "closedform") throw UnsupportedError("unknown method " + method);
    auto rule = cfg.quadrature_rule();
    if (!cfg.has_grid || cfg.grid.n_x < 2)
        throw rl::config::ConfigError("surface requires a [grid] section");
    const double T = params.maturity;
    double dt = cfg.grid.dt > 0.0 ? cfg.grid.dt : T / 20.0;
    auto nt = static_cast<std::size_t>(std::lround(T / dt));
    nt = std::max<std::size_t>(nt, 1);

    rl::pdesolver::ReserveSurface s;
    s.state = 0;
    for (std::size_t k = 0; k <= nt; ++k)
        s.times.push_back(T * static_cast<double>(k) / static_cast<double>(nt));
    for (std::size_t m = 0; m < cfg.grid.n_x; ++m)
        s.xs.push_back(cfg.grid.x_min +
                       (cfg.grid.x_max - cfg.grid.x_min) *
                           static_cast<double>(m) /
                           static_cast<double>(cfg.grid.n_x - 1));
    auto reserve_at = [&](double t, double x, double y) -> double {
        switch (params.kind) {
            case PT::endowment_reduction:
                return rl::closedform::endowment_reduction_reserve(params, gm, model,
                                                                   t, x, rule);
            case PT::pension_bonus:
                return rl::closedform::pension_bonus_reserve(params, gm, model, t, x,
                                                             rule);
            case PT::binary_average_endowment:
                return rl::closedform::binary_endowment_reserve(params, gm, model, t,
                                                                x, y, rule);
            case PT::rate_cap:
            case PT::rate_floor: {
                double digital = rl::shortrate::digital_rate_price(
                    model, T - t, x, params.threshold);
                double zcb = rl::shortrate::zcb_price(model, T - t, x);
                double leg = params.kind == PT::rate_cap ? digital : zcb - digital;
                return params.amount *
                       rl::lifestate::survival_probability(gm, t, T) * leg;
            }
            default:
                throw UnsupportedError("closedform surface not available for this product");
        }
    };
    if (is_two_dim(params.kind)) {
        if (cfg.grid.n_y < 2)
            throw rl::config::ConfigError("binary surface needs y_min, y_max, n_y");
        for (std::size_t n = 0; n < cfg.grid.n_y; ++n)
            s.ys.push_back(cfg.grid.y_min +
                           (cfg.grid.y_max - cfg.grid.y_min) *
                               static_cast<double>(n) /
                               static_cast<double>(cfg.grid.n_y - 1));
        for (double t : s.times)
            for (double x : s.xs)
                for (double y : s.ys) s.values.push_back(reserve_at(t, x, y));
    } else {
        for (double t : s.times)
            for (double x : s.xs) s.values.push_back(reserve_at(t, x, 0.0));
    }
    write_surface_file(state_path(out, "state0"), s);
    return kExitPass;
}

int cmd_mc_check(const rl::config::RunConfig& cfg, std::uint64_t seed) {
    auto params = cfg.product_params();
    auto model = cfg.vasicek();
    auto diffusion = model.as_diffusion();
    auto gm = cfg.gompertz_makeham();
    auto life = rl::lifestate::TransitionModel::two_state(gm);
    if (params.kind == rl::policy::ProductTemplate::reinsurance_treaty)
        throw UnsupportedError("mc-check does not support the two-stage product");
    auto spec = rl::policy::make_product(params);

    rl::pdesolver::ReserveSurface surface;
    std::vector<rl::montecarlo::SpotNode> nodes;
    const double T = spec.horizon;
    if (spec.uses_average) {
        auto g2 = build_grid2(cfg, 0.0, T, diffusion, spec.breakpoints);
        surface = rl::pdesolver::solve_thiele_2d(diffusion, life, spec, g2)[0];
        std::size_t m = g2.base.nearest_x(model.r0());
        std::size_t n = g2.nearest_y(0.5 * (g2.y_min + g2.y_max));
        for (double frac : {0.0, 0.25, 0.5, 0.75})
            nodes.push_back({surface.times[static_cast<std::size_t>(
                                 std::lround(frac * static_cast<double>(
                                                        surface.times.size() - 1)))],
                             g2.base.x(m), g2.y(n)});
    } else {
        auto g = build_grid(cfg, 0.0, T, diffusion, spec.breakpoints);
        surface = rl::pdesolver::solve_thiele_1d(diffusion, life, spec, g)[0];
        std::size_t m = g.nearest_x(model.r0());
        for (double frac : {0.0, 0.25, 0.5, 0.75})
            nodes.push_back({surface.times[static_cast<std::size_t>(
                                 std::lround(frac * static_cast<double>(
                                                        surface.times.size() - 1)))],
                             g.x(m), 0.0});
    }
    auto rep = rl::montecarlo::surface_spotcheck(model, life, spec, surface, nodes,
                                                 cfg.mc.dt, cfg.mc.paths, seed);
    for (const auto& c : rep.checks)
        std::cout << "t=" << fmt(c.node.t) << " x=" << fmt(c.node.x)
                  << " surface=" << fmt(c.surface_value)
                  << " mc=" << fmt(c.mc.mean) << " stderr=" << fmt(c.mc.stderr_)
                  << " z=" << fmt(c.z) << "\n";
    bool pass = rep.pass(3.0);
    std::cout << (pass ? "PASS" : "FAIL") << " max|z|=" << fmt(rep.max_abs_z)
              << "\n";
    return pass ? kExitPass : kExitFail;
}

int cmd_mean_diff(const rl::config::RunConfig& cfg, std::uint64_t seed,
                  const std::string& out) {
    auto params = cfg.product_params();
    if (params.kind != rl::policy::ProductTemplate::endowment_reduction)
        throw UnsupportedError("mean-diff supports the endowment_reduction template");
    auto model = cfg.vasicek();
    auto gm = cfg.gompertz_makeham();
    auto rule = cfg.quadrature_rule();
    // Fair premiums for the product and its rho = 0 twin.
    auto solved = rl::closedform::solve_premium_report(
        params, gm, model, model.r0(), rule,
        rl::closedform::PremiumBasis::inception);
    params.premium = solved.premium;

    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    f << "t,mean_diff,stderr\n";
    const std::size_t n_points = 21;
    for (std::size_t k = 0; k < n_points; ++k) {
        double t = params.maturity * static_cast<double>(k) /
                   static_cast<double>(n_points - 1);
        auto est = rl::closedform::mean_reserve_difference(params, gm, model, t,
                                                           cfg.mc.paths, seed, rule);
        f << fmt(t) << ',' << fmt(est.mean) << ',' << fmt(est.stderr_) << '\n';
    }
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pricing and reserving engine for rate-linked life insurance"};
    app.require_subcommand(1);

    std::string config_path, method = "pde", out = "out.csv";
    std::optional<std::uint64_t> seed_override;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file path")->required();
        sub->add_option("--seed", seed_override, "override the config seed");
    };
    auto* premium = app.add_subcommand("premium", "solve the fair premium");
    add_common(premium);
    auto* surface = app.add_subcommand("surface", "write reserve surface CSV");
    add_common(surface);
    surface->add_option("--method", method, "pde or closedform");
    surface->add_option("--out", out, "output CSV path");
    auto* mc_check = app.add_subcommand("mc-check", "validate PDE surface vs MC");
    add_common(mc_check);
    auto* mean_diff = app.add_subcommand("mean-diff", "mean reserve difference CSV");
    add_common(mean_diff);
    mean_diff->add_option("--out", out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = rl::config::parse_file(config_path);
        std::uint64_t seed = seed_override.value_or(cfg.mc.seed);
        if (premium->parsed()) return cmd_premium(cfg);
        if (surface->parsed()) return cmd_surface(cfg, method, out);
        if (mc_check->parsed()) return cmd_mc_check(cfg, seed);
        if (mean_diff->parsed()) return cmd_mean_diff(cfg, seed, out);
        return kExitConfig;
    } catch (const UnsupportedError& e) {
        std::cerr << "unsupported: " << e.what() << "\n";
        return kExitUnsupported;
    } catch (const rl::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const rl::DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
