#pragma once
// Central finite differences and a relative error that tolerates tiny magnitudes.

#include <algorithm>
#include <cmath>
#include <functional>

namespace oracle
{
    inline double central(const std::function<double()> & f, double & x, double h)
    {
        const double x0 = x;
        x = x0 + h;
        const double fp = f();
        x = x0 - h;
        const double fm = f();
        x = x0;
        return (fp - fm) / (2.0 * h);
    }

    // |a - b| / max(|a|, |b|, floor)
    inline double rel_err(double a, double b, double floor = 1e-8)
    {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
    }
}  // namespace oracle
