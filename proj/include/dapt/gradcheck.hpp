#pragma once

#include <functional>
#include <vector>

namespace dapt {

// Central-difference check of an analytic gradient.
// Returns max over coordinates of |analytic - central| / max(1, |central|).
// `f` must be a pure function of its argument (it is re-evaluated 2 times per
// coordinate and, when threads > 1, from several threads at once).
double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& theta,
                         const std::vector<double>& analytic_grad, double eps,
                         int threads = 1);

}  // namespace dapt
