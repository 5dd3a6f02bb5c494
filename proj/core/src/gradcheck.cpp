#include "paewc/gradcheck.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace paewc {

GradCheckReport finite_diff_report(const std::function<Tensor(ParamStore&)>& f, ParamStore& params,
                                   double h) {
    if (!(h > 0.0)) throw ValueError("finite_diff_check: h must be > 0");

    params.zero_grad();
    Tensor loss = f(params);
    const double f0 = loss.item();
    if (!std::isfinite(f0)) throw NumericError("finite_diff_check: non-finite loss");
    backward(loss);
    const std::map<std::string, std::vector<double>> analytic = params.gradients();

    const auto eval = [&]() {
        NoGradGuard ng;
        const double v = f(params).item();
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite evaluation");
        return v;
    };

    GradCheckReport rep;
    rep.noise_floor =
        32.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0)) / (2.0 * h);
    for (auto& block : params.blocks()) {
        const auto& a = analytic.at(block.name);
        double* vals = block.tensor.mutable_values();
        for (std::size_t k = 0; k < block.tensor.numel(); ++k) {
            const double keep = vals[k];
            vals[k] = keep + h;
            const double fp = eval();
            vals[k] = keep - h;
            const double fm = eval();
            vals[k] = keep;
            const double numeric = (fp - fm) / (2.0 * h);
            const double abs_err = std::abs(a[k] - numeric);
            const double rel = abs_err / (std::abs(a[k]) + 1e-12);
            rep.max_rel = std::max(rep.max_rel, rel);
            rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
            if (abs_err > rep.noise_floor) rep.guarded_rel = std::max(rep.guarded_rel, rel);
            ++rep.coords;
        }
    }
    return rep;
}

double finite_diff_check(const std::function<Tensor(ParamStore&)>& f, ParamStore& params,
                         double h) {
    return finite_diff_report(f, params, h).max_rel;
}

}  // namespace paewc
