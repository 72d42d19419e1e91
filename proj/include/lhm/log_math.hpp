#pragma once

#include <span>

namespace lhm {

// log(sum(exp(x))). Returns -inf for an empty range or when every term is -inf.
double log_sum_exp(std::span<const double> x);

// log(exp(a) + exp(b))
double log_add_exp(double a, double b);

// log(1 + exp(x)) without overflow.
double softplus(double x);

double sigmoid(double x);

} // namespace lhm
