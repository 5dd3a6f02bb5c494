#include "paewc/optimizer.hpp"

#include <cmath>

namespace paewc {

AdamW::AdamW(ParamStore& params, AdamWConfig cfg) : params_(&params), cfg_(cfg) {
    cfg_.validate();
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& b : params.blocks()) {
        m_.emplace_back(b.tensor.numel(), 0.0);
        v_.emplace_back(b.tensor.numel(), 0.0);
    }
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t bi = 0; bi < params_->size(); ++bi) {
        auto& block = params_->blocks()[bi];
        double* p = block.tensor.mutable_values();
        const std::size_t n = block.tensor.numel();
        auto& m = m_[bi];
        auto& v = v_[bi];
        const bool has_grad = block.tensor.has_grad();
        const double* g = has_grad ? block.tensor.grad().data() : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = has_grad ? g[i] : 0.0;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= cfg_.learning_rate *
                    (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) + cfg_.weight_decay * p[i]);
        }
    }
}

}  // namespace paewc
