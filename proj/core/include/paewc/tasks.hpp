#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "paewc/prompts.hpp"
#include "paewc/tensor.hpp"

namespace paewc {

// The five synthetic segmentation families. Each stands in for a distinct
// imaging distribution: object shape, palette, background and placement
// statistics all differ per family.
enum class Family { blob, ring, box, stripe, crescent };

const char* family_name(Family f);

struct TaskSpec {
    int task_id = 0;
    Family family = Family::blob;
    int image_size = 32;
    int channels = 3;
    // Object colour per channel, [lo, hi].
    std::array<std::array<double, 2>, 3> color_range{};
    std::array<double, 3> background{};
    // Object area as a fraction of the image, [lo, hi].
    std::array<double, 2> size_range{0.05, 0.14};
    // Allowed 3x3 placement cells as (row, col).
    std::vector<std::array<int, 2>> position_cells;
    double noise_sigma = 0.05;
    // Each image also carries one same-palette decoy of another family's
    // shape in a different cell; only the prompt distinguishes the target
    // from the decoy, so the text path stays load-bearing.
    bool with_decoy = true;
    Family decoy_family = Family::ring;
    // Tier the task-adaptive prompt strategy picks for this family.
    PromptTier adaptive_tier = PromptTier::spatial;
    int n_train = 256;
    int n_val = 64;
    int n_test = 64;
    // Default generation seed, set by default_suite.
    std::uint64_t data_seed = 0;

    std::string name() const { return family_name(family); }
    void validate() const;
};

// One realized sample: image [C,H,W] in [0,1], binary mask [H,W], the
// rendered prompt, and the context that can re-render it at any tier.
struct Item {
    Tensor image;
    Tensor mask;
    PromptSpec prompt;
    PromptContext ctx;
};

using ItemView = std::span<const Item>;

// A fully realized task: disjoint train/val/test splits drawn from
// independent derived streams, plus a fixed probe subset of train used for
// classification and activation statistics (never for updates).
struct TaskDataset {
    TaskSpec spec;
    PromptTier tier = PromptTier::comprehensive;
    std::vector<Item> train, val, test;
    int probe_size = 16;

    ItemView probe() const {
        return ItemView(train.data(), std::min<std::size_t>(train.size(),
                                                            static_cast<std::size_t>(probe_size)));
    }
};

// Renders the whole task at the given tier. Deterministic: the same
// (spec, tier, seed) triple generates bitwise-identical datasets.
TaskDataset make_task(const TaskSpec& spec, PromptTier tier, std::uint64_t seed);

// The five built-in specs in canonical order (task ids 0..4); per-task
// data_seed fields are derived from the given seed.
std::vector<TaskSpec> default_suite(std::uint64_t seed);

// Named task orderings over the canonical suite.
const std::vector<std::string>& order_names();                // order_A..order_E
const std::vector<int>& task_order(const std::string& name);  // permutation of 0..4

}  // namespace paewc
