#pragma once

// CSV emission. Numbers use the shortest decimal representation that
// round-trips to the same double, so output files are byte-stable.

#include <charconv>
#include <cstdio>
#include <ostream>
#include <string>

#include "ratelife/common.hpp"
#include "ratelife/pdesolver.hpp"

namespace ratelife::csv {

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Header `t,x[,y],state,value`, rows row-major over (time, x[, y]).
inline void write_surface(std::ostream& os, const pdesolver::ReserveSurface& s) {
    const bool two = s.two_dim();
    os << (two ? "t,x,y,state,value\n" : "t,x,state,value\n");
    for (std::size_t k = 0; k < s.times.size(); ++k)
        for (std::size_t m = 0; m < s.xs.size(); ++m) {
            if (two) {
                for (std::size_t n = 0; n < s.ys.size(); ++n)
                    os << format_double(s.times[k]) << ','
                       << format_double(s.xs[m]) << ',' << format_double(s.ys[n])
                       << ',' << s.state << ',' << format_double(s.value(k, m, n))
                       << '\n';
            } else {
                os << format_double(s.times[k]) << ',' << format_double(s.xs[m])
                   << ',' << s.state << ',' << format_double(s.value(k, m))
                   << '\n';
            }
        }
}

}  // namespace ratelife::csv
