#pragma once

#include <span>

#include "paewc/fisher.hpp"
#include "paewc/model.hpp"
#include "paewc/tensor.hpp"

namespace paewc {

struct LossWeights {
    double w_seg = 1.0;
    double w_dice = 0.3;
    double w_ewc = 10.0;
    double epsilon = 1e-6;  // Dice smoothing

    void validate() const {
        if (w_seg < 0 || w_dice < 0 || w_ewc < 0) throw ConfigError("loss weights must be >= 0");
        if (!(epsilon > 0)) throw ConfigError("loss epsilon must be > 0");
    }
};

struct LossBreakdown {
    double seg = 0.0;
    double dice = 0.0;
    double ewc = 0.0;
    double total = 0.0;
};

// Mean 2-class pixel cross-entropy with softmax over the channel axis.
// mask is [batch, H, W] with entries in {0, 1}.
Tensor seg_ce(const SegLogits& logits, const Tensor& mask);

// Soft Dice loss on the foreground probability:
//   1 - (1/B) sum_b 2 sum(p_fg y) / (sum(p_fg) + sum(y) + eps)
Tensor dice_loss(const SegLogits& logits, const Tensor& mask, double epsilon = 1e-6);

// Accumulated quadratic penalty over all stored snapshots:
//   sum_j sum_m w_m^(j) sum_{theta in m} F^(j)(theta) (theta - theta*^(j))^2
// using each snapshot's own frozen group assignment. Differentiable w.r.t.
// the current parameters; exactly zero when params equal every anchor.
Tensor ewc_penalty(const ParamStore& params, std::span<const FisherSnapshot> snapshots);

struct TotalLoss {
    Tensor value;
    LossBreakdown parts;
};

// Weighted combination. `ewc` may be undefined (or w_ewc zero), in which
// case the penalty term is omitted from the graph entirely and the
// breakdown records 0 for it.
TotalLoss total_loss(const Tensor& seg, const Tensor& dice, const Tensor& ewc,
                     const LossWeights& weights);

// Stacks per-item masks into the [batch, H, W] constant the losses expect.
Tensor stack_masks(ItemView items);

}  // namespace paewc
