#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "paewc/model.hpp"
#include "paewc/prompts.hpp"
#include "paewc/tasks.hpp"

namespace paewc {

// Per-block mean gradient-response magnitude under the three core prompt
// categories. One row per parameter block, columns ordered
// (visual, spatial, medical).
struct ResponseMatrix {
    std::vector<std::string> blocks;
    std::vector<std::array<double, 3>> rows;

    static constexpr std::array<Group, 3> categories = {Group::visual, Group::spatial,
                                                        Group::medical};
};

// For each category, rebuilds the probe prompts at that tier, runs forward +
// segmentation CE + backward per sample, and records the per-block mean L2
// gradient norm. Parameters are never updated. Throws ValueError on an empty
// probe or n_samples < 1.
ResponseMatrix probe_responses(ParamStore& params, ItemView probe, const Lexicon& lexicon,
                               int n_samples);

// Argmax over the three categories per block; ties break in the fixed order
// visual < spatial < medical. Throws StateError naming the block if a row is
// all zero (a dead block).
std::map<std::string, Group> classify(const ResponseMatrix& matrix);

// Writes an assignment into the store's group tags. Every block must be
// covered; afterwards the three groups partition the blocks.
void apply_classification(ParamStore& params, const std::map<std::string, Group>& assignment);

}  // namespace paewc
