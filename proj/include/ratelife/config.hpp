#pragma once

// Strict run configuration: INI-style sections, `key = value` lines, `#`
// comments. Unknown sections or keys are errors with line information, so a
// misspelled parameter can never be silently ignored.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ratelife/closedform.hpp"
#include "ratelife/common.hpp"
#include "ratelife/csv.hpp"
#include "ratelife/lifestate.hpp"
#include "ratelife/policy.hpp"
#include "ratelife/shortrate.hpp"

namespace ratelife::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double to_double(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("invalid number '" + v + "' for " + where);
    }
}

inline std::uint64_t to_u64(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer '" + v + "' for " + where);
    }
}

inline bool to_bool(const std::string& v, const std::string& where) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("invalid boolean '" + v + "' for " + where);
}

}  // namespace detail

struct ModelSection {
    double a = 0.0, b = 0.0, sigma = 0.0, gamma = 0.0, r0 = 0.0;
};

struct MortalitySection {
    double alpha0 = 0.0, alpha1 = 0.0, alpha2 = 0.0;
    double entry_age = 0.0;
};

struct ProductSection {
    std::string template_name;
    double E = 0.0, E1 = 0.0, E2 = 0.0, P = 0.0;
    std::string K = "-inf";  // number, "inf", or "-inf"
    double rho = 0.0;
    double premium = 0.0;
    double T = 0.0, That = 0.0;
    bool gated_premium = false;
};

struct GridSection {
    double x_min = 0.0, x_max = 0.0;
    std::uint64_t n_x = 0;
    double dt = 0.0;  // 0 = choose the largest stable step automatically
    std::uint64_t store_every = 1;
    double y_min = 0.0, y_max = 0.0;
    std::uint64_t n_y = 0;  // 0 = 1d grid
};

struct McSection {
    std::uint64_t paths = 10000;
    std::uint64_t seed = 1;
    double dt = 0.05;
};

struct QuadratureSection {
    std::string scheme = "simpson";
    std::uint64_t panels_per_year = 32;
};

struct RunConfig {
    ModelSection model;
    MortalitySection mortality;
    ProductSection product;
    GridSection grid;
    McSection mc;
    QuadratureSection quadrature;
    bool has_grid = false;

    shortrate::VasicekModel vasicek() const {
        return shortrate::VasicekModel(model.a, model.b, model.sigma, model.gamma,
                                       model.r0);
    }

    lifestate::GompertzMakeham gompertz_makeham() const {
        return lifestate::GompertzMakeham(mortality.alpha0, mortality.alpha1,
                                          mortality.alpha2)
            .with_entry_age(mortality.entry_age);
    }

    policy::ProductParams product_params() const {
        policy::ProductParams p;
        const std::string& n = product.template_name;
        if (n == "endowment_reduction")
            p.kind = policy::ProductTemplate::endowment_reduction;
        else if (n == "pension_bonus")
            p.kind = policy::ProductTemplate::pension_bonus;
        else if (n == "rate_cap")
            p.kind = policy::ProductTemplate::rate_cap;
        else if (n == "rate_floor")
            p.kind = policy::ProductTemplate::rate_floor;
        else if (n == "caplet")
            p.kind = policy::ProductTemplate::caplet;
        else if (n == "floorlet")
            p.kind = policy::ProductTemplate::floorlet;
        else if (n == "binary_average_endowment")
            p.kind = policy::ProductTemplate::binary_average_endowment;
        else if (n == "reinsurance_treaty")
            p.kind = policy::ProductTemplate::reinsurance_treaty;
        else
            throw ConfigError("unknown product template '" + n + "'");
        p.amount = product.E;
        p.amount_high = product.E1;
        p.amount_low = product.E2;
        p.pension = product.P;
        p.threshold = strike();
        p.factor = product.rho;
        p.premium = product.premium;
        p.maturity = product.T;
        p.retirement = product.That;
        p.gated_premium = product.gated_premium;
        return p;
    }

    Strike strike() const {
        if (product.K == "inf") return Strike::plus_infinity();
        if (product.K == "-inf") return Strike::minus_infinity();
        return Strike(detail::to_double(product.K, "product.K"));
    }

    closedform::QuadratureRule quadrature_rule() const {
        closedform::QuadratureRule r;
        if (quadrature.scheme == "trapezoid")
            r.scheme = closedform::QuadratureRule::Scheme::trapezoid;
        else if (quadrature.scheme == "simpson")
            r.scheme = closedform::QuadratureRule::Scheme::simpson;
        else
            throw ConfigError("unknown quadrature scheme '" + quadrature.scheme +
                              "'");
        r.panels_per_year = static_cast<int>(quadrature.panels_per_year);
        return r;
    }
};

inline RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, bool> seen_sections;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;

    auto fail = [&](const std::string& msg) {
        throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "mortality" &&
                section != "product" && section != "grid" && section != "mc" &&
                section != "quadrature")
                fail("unknown section [" + section + "]");
            seen_sections[section] = true;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        if (section.empty()) fail("key outside any section");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) fail("empty key or value");
        const std::string where = section + "." + key;

        if (section == "model") {
            if (key == "a") cfg.model.a = detail::to_double(val, where);
            else if (key == "b") cfg.model.b = detail::to_double(val, where);
            else if (key == "sigma") cfg.model.sigma = detail::to_double(val, where);
            else if (key == "gamma") cfg.model.gamma = detail::to_double(val, where);
            else if (key == "r0") cfg.model.r0 = detail::to_double(val, where);
            else fail("unknown key '" + where + "'");
        } else if (section == "mortality") {
            if (key == "alpha0") cfg.mortality.alpha0 = detail::to_double(val, where);
            else if (key == "alpha1") cfg.mortality.alpha1 = detail::to_double(val, where);
            else if (key == "alpha2") cfg.mortality.alpha2 = detail::to_double(val, where);
            else if (key == "entry_age") cfg.mortality.entry_age = detail::to_double(val, where);
            else fail("unknown key '" + where + "'");
        } else if (section == "product") {
            if (key == "template") cfg.product.template_name = val;
            else if (key == "E") cfg.product.E = detail::to_double(val, where);
            else if (key == "E1") cfg.product.E1 = detail::to_double(val, where);
            else if (key == "E2") cfg.product.E2 = detail::to_double(val, where);
            else if (key == "P") cfg.product.P = detail::to_double(val, where);
            else if (key == "K") {
                if (val != "inf" && val != "-inf") detail::to_double(val, where);
                cfg.product.K = val;
            }
            else if (key == "rho") cfg.product.rho = detail::to_double(val, where);
            else if (key == "premium") cfg.product.premium = detail::to_double(val, where);
            else if (key == "T") cfg.product.T = detail::to_double(val, where);
            else if (key == "That") cfg.product.That = detail::to_double(val, where);
            else if (key == "gated_premium") cfg.product.gated_premium = detail::to_bool(val, where);
            else fail("unknown key '" + where + "'");
        } else if (section == "grid") {
            cfg.has_grid = true;
            if (key == "x_min") cfg.grid.x_min = detail::to_double(val, where);
            else if (key == "x_max") cfg.grid.x_max = detail::to_double(val, where);
            else if (key == "n_x") cfg.grid.n_x = detail::to_u64(val, where);
            else if (key == "dt") cfg.grid.dt = detail::to_double(val, where);
            else if (key == "store_every") cfg.grid.store_every = detail::to_u64(val, where);
            else if (key == "y_min") cfg.grid.y_min = detail::to_double(val, where);
            else if (key == "y_max") cfg.grid.y_max = detail::to_double(val, where);
            else if (key == "n_y") cfg.grid.n_y = detail::to_u64(val, where);
            else fail("unknown key '" + where + "'");
        } else if (section == "mc") {
            if (key == "paths") cfg.mc.paths = detail::to_u64(val, where);
            else if (key == "seed") cfg.mc.seed = detail::to_u64(val, where);
            else if (key == "dt") cfg.mc.dt = detail::to_double(val, where);
            else fail("unknown key '" + where + "'");
        } else {  // quadrature
            if (key == "scheme") cfg.quadrature.scheme = val;
            else if (key == "panels_per_year") cfg.quadrature.panels_per_year = detail::to_u64(val, where);
            else fail("unknown key '" + where + "'");
        }
    }

    for (const char* required : {"model", "mortality", "product"})
        if (!seen_sections.count(required))
            throw ConfigError(std::string("missing required section [") + required +
                              "]");
    if (cfg.product.template_name.empty())
        throw ConfigError("missing product.template");
    return cfg;
}

inline RunConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

/// Canonical re-serialization: parse(serialize(cfg)) reproduces cfg and
/// serialize is a fixed point of parse-then-serialize.
inline std::string serialize(const RunConfig& cfg) {
    std::ostringstream os;
    auto num = [](double v) { return csv::format_double(v); };
    os << "[model]\n";
    os << "a = " << num(cfg.model.a) << "\n";
    os << "b = " << num(cfg.model.b) << "\n";
    os << "sigma = " << num(cfg.model.sigma) << "\n";
    os << "gamma = " << num(cfg.model.gamma) << "\n";
    os << "r0 = " << num(cfg.model.r0) << "\n";
    os << "[mortality]\n";
    os << "alpha0 = " << num(cfg.mortality.alpha0) << "\n";
    os << "alpha1 = " << num(cfg.mortality.alpha1) << "\n";
    os << "alpha2 = " << num(cfg.mortality.alpha2) << "\n";
    os << "entry_age = " << num(cfg.mortality.entry_age) << "\n";
    os << "[product]\n";
    os << "template = " << cfg.product.template_name << "\n";
    os << "E = " << num(cfg.product.E) << "\n";
    os << "E1 = " << num(cfg.product.E1) << "\n";
    os << "E2 = " << num(cfg.product.E2) << "\n";
    os << "P = " << num(cfg.product.P) << "\n";
    os << "K = " << cfg.product.K << "\n";
    os << "rho = " << num(cfg.product.rho) << "\n";
    os << "premium = " << num(cfg.product.premium) << "\n";
    os << "T = " << num(cfg.product.T) << "\n";
    os << "That = " << num(cfg.product.That) << "\n";
    os << "gated_premium = " << (cfg.product.gated_premium ? "true" : "false")
       << "\n";
    if (cfg.has_grid) {
        os << "[grid]\n";
        os << "x_min = " << num(cfg.grid.x_min) << "\n";
        os << "x_max = " << num(cfg.grid.x_max) << "\n";
        os << "n_x = " << cfg.grid.n_x << "\n";
        os << "dt = " << num(cfg.grid.dt) << "\n";
        os << "store_every = " << cfg.grid.store_every << "\n";
        if (cfg.grid.n_y > 0) {
            os << "y_min = " << num(cfg.grid.y_min) << "\n";
            os << "y_max = " << num(cfg.grid.y_max) << "\n";
            os << "n_y = " << cfg.grid.n_y << "\n";
        }
    }
    os << "[mc]\n";
    os << "paths = " << cfg.mc.paths << "\n";
    os << "seed = " << cfg.mc.seed << "\n";
    os << "dt = " << num(cfg.mc.dt) << "\n";
    os << "[quadrature]\n";
    os << "scheme = " << cfg.quadrature.scheme << "\n";
    os << "panels_per_year = " << cfg.quadrature.panels_per_year << "\n";
    return os.str();
}

}  // namespace ratelife::config
