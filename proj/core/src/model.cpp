#include "paewc/model.hpp"

#include <cmath>

#include "paewc/rng.hpp"

namespace paewc {

const char* group_name(Group g) {
    switch (g) {
        case Group::unassigned: return "unassigned";
        case Group::visual: return "visual";
        case Group::spatial: return "spatial";
        case Group::medical: return "medical";
    }
    return "unassigned";
}

Group group_from_name(const std::string& name) {
    if (name == "visual") return Group::visual;
    if (name == "spatial") return Group::spatial;
    if (name == "medical") return Group::medical;
    if (name == "unassigned") return Group::unassigned;
    throw ValueError("unknown group name: " + name);
}

void ModelConfig::validate() const {
    if (image_size <= 0 || channels <= 0 || patch_size <= 0 || embed_dim <= 0 || vocab_size <= 0 ||
        n_heads <= 0)
        throw ConfigError("model config fields must be positive");
    if (image_size % patch_size != 0)
        throw ConfigError("image_size " + std::to_string(image_size) +
                          " not divisible by patch_size " + std::to_string(patch_size));
    if (embed_dim % n_heads != 0)
        throw ConfigError("embed_dim " + std::to_string(embed_dim) + " not divisible by n_heads " +
                          std::to_string(n_heads));
}

void ParamStore::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw ValueError("duplicate parameter block: " + name);
    index_[name] = blocks_.size();
    blocks_.push_back({name, std::move(t), Group::unassigned});
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

Tensor& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter block: " + name);
    return blocks_[it->second].tensor;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter block: " + name);
    return blocks_[it->second].tensor;
}

Group ParamStore::group_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter block: " + name);
    return blocks_[it->second].group;
}

void ParamStore::set_group(const std::string& name, Group g) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter block: " + name);
    blocks_[it->second].group = g;
}

std::size_t ParamStore::param_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.tensor.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& b : blocks_) b.tensor.zero_grad();
}

ParamStore ParamStore::clone() const {
    ParamStore out;
    out.config = config;
    for (const auto& b : blocks_) {
        out.add(b.name, Tensor(b.tensor.shape(), b.tensor.values(), b.tensor.requires_grad()));
        out.set_group(b.name, b.group);
    }
    return out;
}

void ParamStore::load_values(const ParamStore& other) {
    if (other.size() != size()) throw StateError("load_values: block count mismatch");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        if (blocks_[i].name != other.blocks_[i].name ||
            blocks_[i].tensor.shape() != other.blocks_[i].tensor.shape())
            throw StateError("load_values: block layout mismatch at " + blocks_[i].name);
        blocks_[i].tensor.set_values(other.blocks_[i].tensor.values());
    }
}

std::map<std::string, std::vector<double>> ParamStore::gradients() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& b : blocks_) {
        if (b.tensor.has_grad())
            out[b.name] = b.tensor.grad();
        else
            out[b.name] = std::vector<double>(b.tensor.numel(), 0.0);
    }
    return out;
}

const char* ForwardTrace::layer_name(int l) {
    switch (l) {
        case 0: return "vision_embed";
        case 1: return "text_pool";
        case 2: return "xattn_out";
        case 3: return "decoder_hidden";
    }
    return "?";
}

namespace {

Tensor init_weight(Rng& rng, int rows, int cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor({rows, cols}, std::move(v), true);
}

Tensor init_bias(int n) { return Tensor::zeros({1, n}, true); }

}  // namespace

ParamStore build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, "model-init"));
    ParamStore p;
    p.config = cfg;

    const int emb = cfg.embed_dim;
    p.add("text.embed", init_weight(rng, cfg.vocab_size, emb));
    p.add("text.proj.w", init_weight(rng, emb, emb));
    p.add("text.proj.b", init_bias(emb));

    p.add("vision.embed.w", init_weight(rng, cfg.patch_dim(), emb));
    p.add("vision.embed.b", init_bias(emb));
    p.add("vision.pos", init_weight(rng, cfg.patch_count(), emb));
    p.add("vision.mlp.w1", init_weight(rng, emb, 2 * emb));
    p.add("vision.mlp.b1", init_bias(2 * emb));
    p.add("vision.mlp.w2", init_weight(rng, 2 * emb, emb));
    p.add("vision.mlp.b2", init_bias(emb));

    p.add("xattn.wq", init_weight(rng, emb, emb));
    p.add("xattn.wk", init_weight(rng, emb, emb));
    p.add("xattn.wv", init_weight(rng, emb, emb));
    p.add("xattn.wo", init_weight(rng, emb, emb));
    p.add("xattn.bo", init_bias(emb));

    p.add("decoder.w1", init_weight(rng, emb, emb));
    p.add("decoder.b1", init_bias(emb));
    p.add("decoder.w2", init_weight(rng, emb, 2));
    p.add("decoder.b2", init_bias(2));
    return p;
}

namespace {

// Row-major patch extraction for the whole batch: row (b * P + p) holds
// sample b's p-th patch, ordered (patch_row, patch_col) and flattened
// (channel, dy, dx). Images carry no gradient, so this is a plain constant.
Tensor patchify_batch(const Tensor& images, const ModelConfig& cfg) {
    const int B = images.dim(0);
    const int C = cfg.channels, H = cfg.image_size, W = cfg.image_size;
    const int ps = cfg.patch_size, gs = cfg.patches_per_side();
    const auto& v = images.values();
    std::vector<double> out(static_cast<std::size_t>(B) * cfg.patch_count() * cfg.patch_dim());
    std::size_t o = 0;
    for (int b = 0; b < B; ++b) {
        const std::size_t img_off = static_cast<std::size_t>(b) * C * H * W;
        for (int pr = 0; pr < gs; ++pr)
            for (int pc = 0; pc < gs; ++pc)
                for (int c = 0; c < C; ++c)
                    for (int dy = 0; dy < ps; ++dy)
                        for (int dx = 0; dx < ps; ++dx)
                            out[o++] = v[img_off +
                                         (static_cast<std::size_t>(c) * H + pr * ps + dy) * W +
                                         pc * ps + dx];
    }
    return Tensor({B * cfg.patch_count(), cfg.patch_dim()}, std::move(out), false);
}

}  // namespace

Tensor stack_images(const std::vector<Tensor>& images) {
    if (images.empty()) throw ValueError("stack_images: empty batch");
    const Shape& s = images.front().shape();
    if (s.size() != 3) throw ShapeError("stack_images: per-sample images must be [C,H,W]");
    std::vector<double> out;
    out.reserve(images.size() * images.front().numel());
    for (const auto& img : images) {
        if (img.shape() != s) throw ShapeError("stack_images: inconsistent sample shapes");
        const auto& v = img.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    return Tensor({static_cast<int>(images.size()), s[0], s[1], s[2]}, std::move(out), false);
}

SegLogits forward(const ParamStore& params, const Tensor& images,
                  const std::vector<std::vector<int>>& prompt_tokens,
                  std::vector<ForwardTrace>* traces) {
    const ModelConfig& cfg = params.config;
    cfg.validate();
    if (images.shape().size() != 4)
        throw ShapeError("forward: images must be [batch,C,H,W], got " + shape_str(images.shape()));
    const int batch = images.dim(0);
    if (images.dim(1) != cfg.channels || images.dim(2) != cfg.image_size ||
        images.dim(3) != cfg.image_size)
        throw ShapeError("forward: image shape " + shape_str(images.shape()) +
                         " does not match model config");
    if (static_cast<int>(prompt_tokens.size()) != batch)
        throw ValueError("forward: got " + std::to_string(prompt_tokens.size()) +
                         " prompts for batch of " + std::to_string(batch));
    for (const auto& toks : prompt_tokens) {
        if (toks.empty()) throw ValueError("forward: empty prompt");
        for (int t : toks)
            if (t < 0 || t >= cfg.vocab_size)
                throw ValueError("forward: token id " + std::to_string(t) + " outside vocab of " +
                                 std::to_string(cfg.vocab_size));
    }

    const int heads = cfg.n_heads;
    const int hd = cfg.head_dim();
    const int gs = cfg.patches_per_side();
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

    const Tensor& t_embed = params.at("text.embed");
    const Tensor& t_pw = params.at("text.proj.w");
    const Tensor& t_pb = params.at("text.proj.b");
    const Tensor& v_ew = params.at("vision.embed.w");
    const Tensor& v_eb = params.at("vision.embed.b");
    const Tensor& v_pos = params.at("vision.pos");
    const Tensor& v_w1 = params.at("vision.mlp.w1");
    const Tensor& v_b1 = params.at("vision.mlp.b1");
    const Tensor& v_w2 = params.at("vision.mlp.w2");
    const Tensor& v_b2 = params.at("vision.mlp.b2");
    const Tensor& a_wq = params.at("xattn.wq");
    const Tensor& a_wk = params.at("xattn.wk");
    const Tensor& a_wv = params.at("xattn.wv");
    const Tensor& a_wo = params.at("xattn.wo");
    const Tensor& a_bo = params.at("xattn.bo");
    const Tensor& d_w1 = params.at("decoder.w1");
    const Tensor& d_b1 = params.at("decoder.b1");
    const Tensor& d_w2 = params.at("decoder.w2");
    const Tensor& d_b2 = params.at("decoder.b2");

    if (traces) traces->assign(static_cast<std::size_t>(batch), ForwardTrace{});

    const int P = cfg.patch_count();

    // Vision trunk over the whole batch in single gemms: patch embedding +
    // tiled positional table, then a residual MLP.
    Tensor patches = patchify_batch(images, cfg);  // [B*P, pdim]
    Tensor pos_tiled = v_pos;
    if (batch > 1) pos_tiled = concat(std::vector<Tensor>(static_cast<std::size_t>(batch), v_pos), 0);
    Tensor v1 = add(add(matmul(patches, v_ew), v_eb), pos_tiled);  // [B*P, emb]
    Tensor h1 = silu(add(matmul(v1, v_w1), v_b1));
    Tensor feat = add(v1, add(matmul(h1, v_w2), v_b2));

    // Cross-attention per sample (prompt lengths vary).
    std::vector<Tensor> fused_parts;
    std::vector<Tensor> ctx_taps;
    fused_parts.reserve(static_cast<std::size_t>(batch));
    std::vector<int> sample_rows(static_cast<std::size_t>(P));
    for (int b = 0; b < batch; ++b) {
        // Text path: token embeddings, mean pool, projected context vector.
        Tensor tok = embedding_lookup(t_embed, prompt_tokens[static_cast<std::size_t>(b)]);
        Tensor pooled = mean_axis0(tok);               // [1, emb]
        Tensor ctx = add(matmul(pooled, t_pw), t_pb);  // [1, emb]
        // Key/value states: projected context first, then raw token rows, so
        // attention always sees at least two positions.
        Tensor text_states = concat({ctx, tok}, 0);    // [T+1, emb]

        for (int p = 0; p < P; ++p) sample_rows[static_cast<std::size_t>(p)] = b * P + p;
        Tensor feat_b = take_rows(feat, sample_rows);  // [P, emb]

        Tensor q = matmul(feat_b, a_wq);
        Tensor k = matmul(text_states, a_wk);
        Tensor v = matmul(text_states, a_wv);
        std::vector<Tensor> head_out;
        head_out.reserve(static_cast<std::size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            Tensor qh = slice_cols(q, h * hd, (h + 1) * hd);
            Tensor kh = slice_cols(k, h * hd, (h + 1) * hd);
            Tensor vh = slice_cols(v, h * hd, (h + 1) * hd);
            Tensor scores = scale(matmul(qh, kh, false, true), att_scale);  // [P, T+1]
            Tensor att = softmax(scores, 1);
            head_out.push_back(matmul(att, vh));  // [P, hd]
        }
        Tensor attn = add(matmul(concat(head_out, 1), a_wo), a_bo);  // [P, emb]
        fused_parts.push_back(add(feat_b, attn));

        if (traces) {
            auto& tr = (*traces)[static_cast<std::size_t>(b)];
            tr.taps = {take_rows(v1, sample_rows), ctx, attn, Tensor()};  // decoder tap below
        }
    }

    // Decoder over the whole batch, then per-sample upsampling.
    Tensor fused = fused_parts.size() == 1 ? fused_parts[0] : concat(fused_parts, 0);
    Tensor dh = silu(add(matmul(fused, d_w1), d_b1));  // [B*P, emb]
    Tensor plog = add(matmul(dh, d_w2), d_b2);         // [B*P, 2]
    Tensor bg_all = slice_cols(plog, 0, 1);
    Tensor fg_all = slice_cols(plog, 1, 2);

    const int hw = cfg.image_size * cfg.image_size;
    std::vector<Tensor> sample_logits;
    sample_logits.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        for (int p = 0; p < P; ++p) sample_rows[static_cast<std::size_t>(p)] = b * P + p;
        Tensor bg = upsample_nearest(reshape(take_rows(bg_all, sample_rows), {gs, gs}),
                                     cfg.patch_size);
        Tensor fg = upsample_nearest(reshape(take_rows(fg_all, sample_rows), {gs, gs}),
                                     cfg.patch_size);
        sample_logits.push_back(concat({reshape(bg, {1, hw}), reshape(fg, {1, hw})}, 0));
        if (traces) (*traces)[static_cast<std::size_t>(b)].taps[3] = take_rows(dh, sample_rows);
    }

    SegLogits out;
    out.batch = batch;
    out.height = cfg.image_size;
    out.width = cfg.image_size;
    Tensor packed = sample_logits.size() == 1 ? sample_logits[0] : concat(sample_logits, 0);
    out.values = reshape(packed, {batch, 2, cfg.image_size, cfg.image_size});
    return out;
}

Tensor SegLogits::foreground() const {
    const int hw = height * width;
    Tensor flat = reshape(values, {batch * 2, hw});
    std::vector<int> rows(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) rows[static_cast<std::size_t>(b)] = 2 * b + 1;
    return take_rows(flat, rows);
}

Tensor SegLogits::background() const {
    const int hw = height * width;
    Tensor flat = reshape(values, {batch * 2, hw});
    std::vector<int> rows(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) rows[static_cast<std::size_t>(b)] = 2 * b;
    return take_rows(flat, rows);
}

}  // namespace paewc
