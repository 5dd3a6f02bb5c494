#include "paewc/metrics.hpp"

#include <algorithm>

namespace paewc {

void RunRecord::validate() const {
    const std::size_t t = task_names.size();
    if (t == 0) throw StateError("run record has no tasks");
    if (dice.size() != t)
        throw StateError("run record incomplete: " + std::to_string(dice.size()) +
                         " checkpoints for " + std::to_string(t) + " tasks");
    for (const auto& row : dice) {
        if (row.size() != t) throw StateError("run record has a short checkpoint row");
        for (double v : row)
            if (!(v >= 0.0 && v <= 1.0)) throw StateError("dice entry outside [0,1]");
    }
}

std::vector<double> RunRecord::peak() const {
    validate();
    const std::size_t t = task_names.size();
    std::vector<double> out(t, 0.0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t r = i; r < t; ++r) out[i] = std::max(out[i], dice[r][i]);
    return out;
}

std::vector<double> RunRecord::final_row() const {
    validate();
    return dice.back();
}

double dice_coeff(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt) {
    if (pred.size() != gt.size())
        throw ShapeError("dice_coeff: mask sizes differ, " + std::to_string(pred.size()) + " vs " +
                         std::to_string(gt.size()));
    std::size_t p = 0, g = 0, both = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] > 1 || gt[i] > 1) throw ValueError("dice_coeff: masks must be binary");
        p += pred[i];
        g += gt[i];
        both += static_cast<std::size_t>(pred[i] & gt[i]);
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<std::vector<std::uint8_t>> binarize(const SegLogits& logits) {
    // p_fg > 0.5  <=>  z_fg - z_bg > 0, exactly.
    const int hw = logits.height * logits.width;
    const auto& v = logits.values.values();
    std::vector<std::vector<std::uint8_t>> out(static_cast<std::size_t>(logits.batch));
    for (int b = 0; b < logits.batch; ++b) {
        auto& m = out[static_cast<std::size_t>(b)];
        m.resize(static_cast<std::size_t>(hw));
        const std::size_t bg_off = static_cast<std::size_t>(b) * 2 * hw;
        const std::size_t fg_off = bg_off + static_cast<std::size_t>(hw);
        for (int i = 0; i < hw; ++i)
            m[static_cast<std::size_t>(i)] =
                v[fg_off + static_cast<std::size_t>(i)] > v[bg_off + static_cast<std::size_t>(i)]
                    ? 1
                    : 0;
    }
    return out;
}

std::vector<std::uint8_t> mask_bits(const Tensor& mask) {
    std::vector<std::uint8_t> out(mask.numel());
    const auto& v = mask.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0 && v[i] != 1.0) throw ValueError("mask_bits: non-binary mask value");
        out[i] = v[i] == 1.0 ? 1 : 0;
    }
    return out;
}

EvalResult forgetting_rate(const RunRecord& record) {
    record.validate();
    const std::size_t t = record.task_count();
    EvalResult res;
    res.per_task_dice = record.final_row();
    for (double v : res.per_task_dice) res.average_dice += v;
    res.average_dice /= static_cast<double>(t);

    const std::vector<double> peaks = record.peak();
    for (std::size_t i = 0; i + 1 < t; ++i) {
        res.per_task_forgetting.push_back(peaks[i] - res.per_task_dice[i]);
        res.forgetting_total += res.per_task_forgetting.back();
    }
    res.forgetting_mean =
        t > 1 ? res.forgetting_total / static_cast<double>(t - 1) : 0.0;
    return res;
}

}  // namespace paewc
