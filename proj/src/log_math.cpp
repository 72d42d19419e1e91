#include "lhm/log_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lhm {

double log_sum_exp(std::span<const double> x)
{
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    if (x.empty()) {
        return neg_inf;
    }
    const double max_x = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(max_x)) {
        return max_x;
    }
    double sum = 0.0;
    for (double v : x) {
        sum += std::exp(v - max_x);
    }
    return max_x + std::log(sum);
}

double log_add_exp(double a, double b)
{
    if (a < b) {
        std::swap(a, b);
    }
    if (!std::isfinite(a)) {
        return a;
    }
    return a + std::log1p(std::exp(b - a));
}

double softplus(double x)
{
    if (x > 0.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

double sigmoid(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace lhm
