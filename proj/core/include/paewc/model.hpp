#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "paewc/tensor.hpp"

namespace paewc {

// Functional parameter groups. Blocks start unassigned; the gradient-response
// classifier assigns one of the three named groups to every block.
enum class Group { unassigned, visual, spatial, medical };

const char* group_name(Group g);
Group group_from_name(const std::string& name);

struct ModelConfig {
    int image_size = 32;
    int channels = 3;
    int patch_size = 4;
    int embed_dim = 32;
    int vocab_size = 128;
    int n_heads = 2;

    void validate() const;
    int patches_per_side() const { return image_size / patch_size; }
    int patch_count() const { return patches_per_side() * patches_per_side(); }
    int patch_dim() const { return channels * patch_size * patch_size; }
    int head_dim() const { return embed_dim / n_heads; }
};

// Named parameter blocks with per-block group tags. Block order is the
// creation order and is the canonical order for serialization and for the
// optimizer state.
class ParamStore {
public:
    struct Block {
        std::string name;
        Tensor tensor;
        Group group = Group::unassigned;
    };

    ModelConfig config;

    void add(const std::string& name, Tensor t);
    bool contains(const std::string& name) const;
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    Group group_of(const std::string& name) const;
    void set_group(const std::string& name, Group g);

    std::vector<Block>& blocks() { return blocks_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    std::size_t size() const { return blocks_.size(); }
    std::size_t param_count() const;

    void zero_grad();
    // Deep copy: fresh leaf tensors with the same values and group tags.
    ParamStore clone() const;
    // Copies values (not tags) from another store with identical block layout.
    void load_values(const ParamStore& other);

    // Gradient map {block name -> flat array}; blocks without gradients map
    // to zero arrays.
    std::map<std::string, std::vector<double>> gradients() const;

private:
    std::vector<Block> blocks_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Per-pixel 2-class logits, shape [batch, 2, H, W]; channel 1 is foreground.
struct SegLogits {
    Tensor values;
    int batch = 0;
    int height = 0;
    int width = 0;

    // Channel planes as [batch, H*W] for loss composition.
    Tensor foreground() const;
    Tensor background() const;
};

// Activation taps used for task-similarity statistics: the outputs of the
// vision patch embedding, the pooled text projection, the cross-attention
// block, and the decoder hidden layer, per sample.
struct ForwardTrace {
    static constexpr int kLayers = 4;
    static const char* layer_name(int l);
    std::vector<Tensor> taps;  // kLayers entries
};

// Builds the toy prompt-conditioned segmentation net.
//
// Architecture (19 blocks):
//   text.embed        [vocab, embed]    token embedding table
//   text.proj.w/.b    [embed, embed]    projection of the mean-pooled prompt
//   vision.embed.w/.b [patch_dim,embed] linear patch embedding
//   vision.pos        [patches, embed]  learned positional table
//   vision.mlp.w1/.b1 [embed, 2*embed]  patch MLP, residual
//   vision.mlp.w2/.b2 [2*embed, embed]
//   xattn.wq/.wk/.wv/.wo [embed, embed] multi-head cross-attention
//   xattn.bo          [embed]           output projection bias
//   decoder.w1/.b1    [embed, embed]    per-patch decoder MLP
//   decoder.w2/.b2    [embed, 2]        per-patch class logits
//
// Weights are uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) with fan_in = rows;
// biases are zero. Deterministic in (cfg, seed).
ParamStore build_model(const ModelConfig& cfg, std::uint64_t seed);

// Number of blocks build_model creates for any valid config.
constexpr int kModelBlockCount = 19;

// Forward pass. images is [batch, C, H, W] (ungraded constants are fine);
// prompt_tokens holds one non-empty token-id list per sample. Pure: never
// mutates params. When traces is non-null it receives one ForwardTrace per
// sample.
SegLogits forward(const ParamStore& params, const Tensor& images,
                  const std::vector<std::vector<int>>& prompt_tokens,
                  std::vector<ForwardTrace>* traces = nullptr);

// Stacks per-sample [C,H,W] constants into one [B,C,H,W] constant.
Tensor stack_images(const std::vector<Tensor>& images);

}  // namespace paewc
