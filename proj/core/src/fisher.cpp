#include "paewc/fisher.hpp"

#include <algorithm>
#include <cmath>

#include "paewc/losses.hpp"

namespace paewc {

namespace {

// One-sample forward + segmentation CE + backward; returns the gradient map.
BlockArrays sample_grads(ParamStore& params, const Item& item) {
    params.zero_grad();
    Tensor images = stack_images({item.image});
    SegLogits logits =
        forward(params, images, {encode_tokens(item.prompt.text, params.config.vocab_size)});
    Tensor loss = seg_ce(logits, stack_masks(ItemView(&item, 1)));
    backward(loss);
    return params.gradients();
}

}  // namespace

BlockArrays mean_squared_grads(const std::vector<BlockArrays>& per_sample_grads) {
    if (per_sample_grads.empty()) throw ValueError("mean_squared_grads: no samples");
    BlockArrays out;
    for (const auto& [name, g] : per_sample_grads.front()) out[name].assign(g.size(), 0.0);
    for (const auto& grads : per_sample_grads) {
        for (const auto& [name, g] : grads) {
            auto& acc = out.at(name);
            if (acc.size() != g.size()) throw ShapeError("mean_squared_grads: block size mismatch");
            for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * g[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(per_sample_grads.size());
    for (auto& [name, acc] : out)
        for (double& v : acc) v *= inv;
    return out;
}

void rescale_max_to(BlockArrays& arrays, double target) {
    double mx = 0.0;
    for (const auto& [name, a] : arrays)
        for (double v : a) mx = std::max(mx, v);
    if (mx == 0.0) return;  // all-zero Fisher stays zero
    const double s = target / mx;
    for (auto& [name, a] : arrays)
        for (double& v : a) v *= s;
}

BlockArrays base_fisher(ParamStore& params, ItemView data, int n_samples, bool rescale) {
    if (data.empty()) throw ValueError("base_fisher: empty data");
    if (n_samples < 1) throw ValueError("base_fisher: n_samples must be >= 1");
    const int n = std::min<int>(n_samples, static_cast<int>(data.size()));
    std::vector<BlockArrays> grads;
    grads.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grads.push_back(sample_grads(params, data[static_cast<std::size_t>(i)]));
    BlockArrays fisher = mean_squared_grads(grads);
    if (rescale) rescale_max_to(fisher, kFisherScale);
    return fisher;
}

GroupScalars stability_factor(const std::vector<GroupScalars>& grad_norm_batches) {
    if (grad_norm_batches.size() < 2)
        throw ValueError("stability_factor: needs at least 2 gradient batches");
    GroupScalars out;
    for (const auto& [group, unused] : grad_norm_batches.front()) {
        double mean = 0.0;
        for (const auto& batch : grad_norm_batches) mean += batch.at(group);
        mean /= static_cast<double>(grad_norm_batches.size());
        double var = 0.0;
        for (const auto& batch : grad_norm_batches) {
            const double d = batch.at(group) - mean;
            var += d * d;
        }
        var /= static_cast<double>(grad_norm_batches.size());
        out[group] = 1.0 / (1.0 + std::exp(var));  // sigma(-Var)
    }
    return out;
}

std::vector<GroupScalars> collect_group_grad_norms(ParamStore& params, ItemView data,
                                                   int k_batches, int batch_size) {
    if (k_batches < 2) throw ValueError("collect_group_grad_norms: k_batches must be >= 2");
    if (batch_size < 1) throw ValueError("collect_group_grad_norms: batch_size must be >= 1");
    if (data.empty()) throw ValueError("collect_group_grad_norms: empty data");

    std::vector<GroupScalars> out;
    out.reserve(static_cast<std::size_t>(k_batches));
    std::size_t cursor = 0;
    for (int k = 0; k < k_batches; ++k) {
        params.zero_grad();
        std::vector<Tensor> images;
        std::vector<std::vector<int>> prompts;
        std::vector<Item> batch_items;
        for (int b = 0; b < batch_size; ++b) {
            const Item& it = data[cursor % data.size()];
            ++cursor;
            images.push_back(it.image);
            prompts.push_back(encode_tokens(it.prompt.text, params.config.vocab_size));
            batch_items.push_back(it);
        }
        SegLogits logits = forward(params, stack_images(images), prompts);
        backward(seg_ce(logits, stack_masks(batch_items)));

        GroupScalars norms = {{Group::unassigned, 0.0},
                              {Group::visual, 0.0},
                              {Group::spatial, 0.0},
                              {Group::medical, 0.0}};
        for (const auto& block : params.blocks()) {
            if (!block.tensor.has_grad()) continue;
            double s = 0.0;
            for (double g : block.tensor.grad()) s += g * g;
            norms[block.group] += s;
        }
        for (auto& [g, v] : norms) v = std::sqrt(v);
        out.push_back(std::move(norms));
    }
    params.zero_grad();
    return out;
}

ActivationStats activation_stats(ParamStore& params, ItemView probe) {
    if (probe.empty()) throw ValueError("activation_stats: empty probe");
    std::vector<double> sum(ForwardTrace::kLayers, 0.0);
    std::vector<double> sumsq(ForwardTrace::kLayers, 0.0);
    std::vector<std::size_t> count(ForwardTrace::kLayers, 0);

    NoGradGuard ng;
    for (const auto& item : probe) {
        std::vector<ForwardTrace> traces;
        forward(params, stack_images({item.image}),
                {encode_tokens(item.prompt.text, params.config.vocab_size)}, &traces);
        for (int l = 0; l < ForwardTrace::kLayers; ++l) {
            for (double v : traces[0].taps[static_cast<std::size_t>(l)].values()) {
                sum[static_cast<std::size_t>(l)] += v;
                sumsq[static_cast<std::size_t>(l)] += v * v;
                ++count[static_cast<std::size_t>(l)];
            }
        }
    }

    ActivationStats stats;
    stats.per_layer.resize(ForwardTrace::kLayers);
    for (int l = 0; l < ForwardTrace::kLayers; ++l) {
        const double n = static_cast<double>(count[static_cast<std::size_t>(l)]);
        const double mu = sum[static_cast<std::size_t>(l)] / n;
        const double var = std::max(0.0, sumsq[static_cast<std::size_t>(l)] / n - mu * mu);
        stats.per_layer[static_cast<std::size_t>(l)] = {mu, std::sqrt(var)};
    }
    return stats;
}

double task_similarity(const ActivationStats& prev, const ActivationStats& cur) {
    if (prev.per_layer.size() != cur.per_layer.size() || prev.per_layer.empty())
        throw ValueError("task_similarity: mismatched layer counts");
    double acc = 0.0;
    for (std::size_t l = 0; l < prev.per_layer.size(); ++l) {
        const double dmu = std::abs(prev.per_layer[l][0] - cur.per_layer[l][0]);
        const double dsg = std::abs(prev.per_layer[l][1] - cur.per_layer[l][1]);
        acc += 1.0 / (1.0 + dmu + dsg);
    }
    return acc / static_cast<double>(prev.per_layer.size());
}

BlockArrays adaptive_fisher(const BlockArrays& base, const GroupScalars& stability,
                            double similarity, const std::map<std::string, Group>& groups) {
    if (!(similarity > 0.0) || similarity > 1.0)
        throw ValueError("adaptive_fisher: similarity must lie in (0, 1]");
    BlockArrays out;
    for (const auto& [name, arr] : base) {
        const auto git = groups.find(name);
        if (git == groups.end()) throw StateError("adaptive_fisher: no group for block " + name);
        const auto sit = stability.find(git->second);
        if (sit == stability.end())
            throw StateError("adaptive_fisher: no stability for group " +
                             std::string(group_name(git->second)));
        const double f = sit->second * similarity;
        auto& dst = out[name];
        dst.resize(arr.size());
        for (std::size_t i = 0; i < arr.size(); ++i) dst[i] = arr[i] * f;
    }
    return out;
}

double adaptive_weight(double fisher_group_scalar, double c_i, double c_max) {
    if (!(c_max > 0.0)) throw ValueError("adaptive_weight: C_max must be > 0");
    if (c_i < 0.0) throw ValueError("adaptive_weight: C_i must be >= 0");
    return fisher_group_scalar * (1.0 + c_i / c_max);
}

double group_fisher_mean(const BlockArrays& fisher, const std::map<std::string, Group>& groups,
                         Group g) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [name, arr] : fisher) {
        const auto it = groups.find(name);
        if (it == groups.end() || it->second != g) continue;
        for (double v : arr) sum += v;
        count += arr.size();
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace paewc
