#pragma once

#include <functional>

#include "paewc/model.hpp"
#include "paewc/tensor.hpp"

namespace paewc {

// Central-difference gradient oracle. `f` must rebuild the scalar loss from
// the current parameter values (deterministically) on every call. Returns
//   max_k |analytic_k - (f(p + h e_k) - f(p - h e_k)) / (2h)| / (|analytic_k| + 1e-12)
// over every coordinate of every block. Parameters are restored afterwards.
// Throws NumericError if any evaluation of f is non-finite.
double finite_diff_check(const std::function<Tensor(ParamStore&)>& f, ParamStore& params,
                         double h);

struct GradCheckReport {
    // Worst ratio over all coordinates, exactly as finite_diff_check returns.
    double max_rel = 0.0;
    // Worst ratio over coordinates whose |analytic - numeric| exceeds
    // noise_floor. A central difference of a double-precision f cannot
    // resolve derivatives below roughly ulp(f)/(2h); coordinates whose
    // disagreement sits under that bound are measurement-indistinguishable
    // from exact agreement.
    double guarded_rel = 0.0;
    double noise_floor = 0.0;  // 32 * eps * (1 + |f|) / (2h)
    double max_abs_err = 0.0;
    std::size_t coords = 0;
};

GradCheckReport finite_diff_report(const std::function<Tensor(ParamStore&)>& f, ParamStore& params,
                                   double h);

}  // namespace paewc
