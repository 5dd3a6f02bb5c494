#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "paewc/model.hpp"
#include "paewc/tasks.hpp"

namespace paewc {

using BlockArrays = std::map<std::string, std::vector<double>>;
using GroupScalars = std::map<Group, double>;

// Mean and population standard deviation of the activations of the four
// designated probe layers (vision embed, text pool, cross-attention output,
// decoder hidden), over all entries and probe samples.
struct ActivationStats {
    std::vector<std::array<double, 2>> per_layer;  // (mu, sigma)
};

// Everything the quadratic penalty needs about one finished task: the
// per-entry importance arrays, the anchor parameters, and the group
// assignment and weights that were active when the task converged. Later
// re-classification never rewrites a stored snapshot.
struct FisherSnapshot {
    int task_id = 0;
    BlockArrays fisher;
    BlockArrays anchor;
    std::map<std::string, Group> groups;
    GroupScalars group_weight;
    GroupScalars stability;
    double similarity = 1.0;
    double complexity = 0.0;
};

// Importance scale target: the largest base-Fisher entry is normalized to
// this value (skipped when the maximum is zero).
inline constexpr double kFisherScale = 1000.0;

// Empirical diagonal Fisher: the mean over samples of the elementwise squared
// gradient of the per-pixel mean log-likelihood of the ground-truth mask.
// With rescale enabled the result is globally max-normalized to kFisherScale.
BlockArrays base_fisher(ParamStore& params, ItemView data, int n_samples, bool rescale = true);

// Pure pieces of base_fisher, kept separate so they can be checked against
// counting oracles.
BlockArrays mean_squared_grads(const std::vector<BlockArrays>& per_sample_grads);
void rescale_max_to(BlockArrays& arrays, double target);

// sigma(-Var) per group, where Var is the population variance of the K
// per-minibatch gradient L2 norms of that group. Throws ValueError for K < 2.
GroupScalars stability_factor(const std::vector<GroupScalars>& grad_norm_batches);

// K per-minibatch group gradient norms for stability_factor, measured on
// consecutive slices of `data` without updating parameters.
std::vector<GroupScalars> collect_group_grad_norms(ParamStore& params, ItemView data,
                                                   int k_batches, int batch_size);

ActivationStats activation_stats(ParamStore& params, ItemView probe);

// Mean reciprocal activation-shift between two tasks' statistics:
//   A = (1/L) sum_l 1 / (1 + |mu_l - mu_l'| + |sigma_l - sigma_l'|),
// in (0, 1]. Throws ValueError when layer counts differ.
double task_similarity(const ActivationStats& prev, const ActivationStats& cur);

// Entrywise F_base * S_group * A.
BlockArrays adaptive_fisher(const BlockArrays& base, const GroupScalars& stability,
                            double similarity, const std::map<std::string, Group>& groups);

// w = fisher_group_scalar * (1 + C_i / C_max). Throws ValueError for
// C_max <= 0.
double adaptive_weight(double fisher_group_scalar, double c_i, double c_max);

// Mean adaptive-Fisher entry over all blocks of a group; the per-group
// scalar that adaptive_weight scales.
double group_fisher_mean(const BlockArrays& fisher, const std::map<std::string, Group>& groups,
                         Group g);

}  // namespace paewc
