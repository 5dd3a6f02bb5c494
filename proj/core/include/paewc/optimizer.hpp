#pragma once

#include <vector>

#include "paewc/model.hpp"

namespace paewc {

// Adaptive-moment optimizer with decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
struct AdamWConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-2;

    void validate() const {
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw ConfigError("betas must lie in [0, 1)");
        if (!(epsilon > 0)) throw ConfigError("optimizer epsilon must be > 0");
        if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    }
};

class AdamW {
public:
    AdamW(ParamStore& params, AdamWConfig cfg);

    // Applies one update from the currently accumulated gradients. Blocks
    // without a gradient are only decayed.
    void step();

    int steps_taken() const { return t_; }

private:
    ParamStore* params_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    int t_ = 0;
};

}  // namespace paewc
