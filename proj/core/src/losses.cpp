#include "paewc/losses.hpp"

#include <cmath>

namespace paewc {

namespace {

void check_mask(const SegLogits& logits, const Tensor& mask) {
    if (mask.shape().size() != 3 || mask.dim(0) != logits.batch || mask.dim(1) != logits.height ||
        mask.dim(2) != logits.width)
        throw ShapeError("mask shape " + shape_str(mask.shape()) + " does not match logits [" +
                         std::to_string(logits.batch) + "," + std::to_string(logits.height) + "," +
                         std::to_string(logits.width) + "]");
    for (double v : mask.values())
        if (v != 0.0 && v != 1.0)
            throw ValueError("mask values must be exactly 0 or 1");
}

}  // namespace

Tensor stack_masks(ItemView items) {
    if (items.empty()) throw ValueError("stack_masks: empty batch");
    const Shape& s = items.front().mask.shape();
    std::vector<double> out;
    out.reserve(items.size() * items.front().mask.numel());
    for (const auto& it : items) {
        if (it.mask.shape() != s) throw ShapeError("stack_masks: inconsistent mask shapes");
        const auto& v = it.mask.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    return Tensor({static_cast<int>(items.size()), s[0], s[1]}, std::move(out), false);
}

Tensor seg_ce(const SegLogits& logits, const Tensor& mask) {
    check_mask(logits, mask);
    // Two-class CE reduces to softplus of the wrong-way margin:
    //   y=1: -log sigmoid(z_fg - z_bg),  y=0: -log sigmoid(z_bg - z_fg)
    const auto& mv = mask.values();
    std::vector<double> sign(mv.size());
    for (std::size_t i = 0; i < mv.size(); ++i) sign[i] = 1.0 - 2.0 * mv[i];
    const int hw = logits.height * logits.width;
    Tensor sgn({logits.batch, hw}, std::move(sign), false);
    Tensor margin = mul(sub(logits.foreground(), logits.background()), sgn);
    return mean(softplus(margin));
}

Tensor dice_loss(const SegLogits& logits, const Tensor& mask, double epsilon) {
    check_mask(logits, mask);
    if (!(epsilon > 0)) throw ConfigError("dice_loss: epsilon must be > 0");
    const int hw = logits.height * logits.width;
    Tensor y = reshape(mask, {logits.batch, hw});
    Tensor p = sigmoid(sub(logits.foreground(), logits.background()));  // softmax fg channel

    Tensor ones({hw, 1}, std::vector<double>(static_cast<std::size_t>(hw), 1.0), false);
    Tensor tp = matmul(mul(p, y), ones);  // [B,1]
    Tensor pf = matmul(p, ones);          // [B,1]

    // sum(y) + eps is a constant per sample.
    std::vector<double> gt(static_cast<std::size_t>(logits.batch), epsilon);
    const auto& yv = y.values();
    for (int b = 0; b < logits.batch; ++b)
        for (int i = 0; i < hw; ++i) gt[static_cast<std::size_t>(b)] += yv[static_cast<std::size_t>(b) * hw + i];
    Tensor denom_const({logits.batch, 1}, std::move(gt), false);

    Tensor ratio = div(scale(tp, 2.0), add(pf, denom_const));
    return add_scalar(scale(mean(ratio), -1.0), 1.0);
}

Tensor ewc_penalty(const ParamStore& params, std::span<const FisherSnapshot> snapshots) {
    Tensor total = Tensor::scalar(0.0);
    for (const auto& snap : snapshots) {
        for (const auto& block : params.blocks()) {
            const auto fit = snap.fisher.find(block.name);
            const auto ait = snap.anchor.find(block.name);
            if (fit == snap.fisher.end() || ait == snap.anchor.end())
                throw StateError("snapshot for task " + std::to_string(snap.task_id) +
                                 " is missing block " + block.name);
            if (fit->second.size() != block.tensor.numel() ||
                ait->second.size() != block.tensor.numel())
                throw StateError("snapshot anchor/fisher size mismatch for block " + block.name);
            const auto git = snap.groups.find(block.name);
            if (git == snap.groups.end())
                throw StateError("snapshot has no group for block " + block.name);
            const auto wit = snap.group_weight.find(git->second);
            if (wit == snap.group_weight.end())
                throw StateError("snapshot has no weight for group " +
                                 std::string(group_name(git->second)));

            Tensor anchor(block.tensor.shape(), ait->second, false);
            Tensor fisher(block.tensor.shape(), fit->second, false);
            Tensor diff = sub(block.tensor, anchor);
            Tensor term = sum(mul(fisher, mul(diff, diff)));
            total = add(total, scale(term, wit->second));
        }
    }
    return total;
}

TotalLoss total_loss(const Tensor& seg, const Tensor& dice, const Tensor& ewc,
                     const LossWeights& weights) {
    weights.validate();
    TotalLoss out;
    out.parts.seg = seg.item();
    out.parts.dice = dice.item();
    out.parts.ewc = ewc.defined() ? ewc.item() : 0.0;
    if (!std::isfinite(out.parts.seg) || !std::isfinite(out.parts.dice) ||
        !std::isfinite(out.parts.ewc))
        throw NumericError("total_loss: non-finite component");

    Tensor total = add(scale(seg, weights.w_seg), scale(dice, weights.w_dice));
    if (ewc.defined() && weights.w_ewc > 0.0) total = add(total, scale(ewc, weights.w_ewc));
    out.value = total;
    out.parts.total = total.item();
    return out;
}

}  // namespace paewc
