#include "paewc/classifier.hpp"

#include <cmath>

#include "paewc/losses.hpp"

namespace paewc {

ResponseMatrix probe_responses(ParamStore& params, ItemView probe, const Lexicon& lexicon,
                               int n_samples) {
    if (probe.empty()) throw ValueError("probe_responses: empty probe");
    if (n_samples < 1) throw ValueError("probe_responses: n_samples must be >= 1");
    lexicon.validate();
    const int n = std::min<int>(n_samples, static_cast<int>(probe.size()));

    ResponseMatrix m;
    m.blocks.reserve(params.size());
    for (const auto& b : params.blocks()) m.blocks.push_back(b.name);
    m.rows.assign(params.size(), {0.0, 0.0, 0.0});

    static constexpr PromptTier kCategoryTier[3] = {PromptTier::visual, PromptTier::spatial,
                                                    PromptTier::medical};
    for (int cat = 0; cat < 3; ++cat) {
        for (int s = 0; s < n; ++s) {
            const Item& item = probe[static_cast<std::size_t>(s)];
            const PromptSpec prompt = render_prompt(kCategoryTier[cat], item.ctx);
            params.zero_grad();
            SegLogits logits =
                forward(params, stack_images({item.image}),
                        {encode_tokens(prompt.text, params.config.vocab_size)});
            backward(seg_ce(logits, stack_masks(ItemView(&item, 1))));
            for (std::size_t bi = 0; bi < params.size(); ++bi) {
                const Tensor& t = params.blocks()[bi].tensor;
                if (!t.has_grad()) continue;
                double acc = 0.0;
                for (double g : t.grad()) acc += g * g;
                m.rows[bi][static_cast<std::size_t>(cat)] += std::sqrt(acc);
            }
        }
        for (auto& row : m.rows) row[static_cast<std::size_t>(cat)] /= n;
    }
    params.zero_grad();

    for (const auto& row : m.rows)
        for (double v : row)
            if (!std::isfinite(v) || v < 0.0)
                throw NumericError("probe_responses: non-finite response entry");
    return m;
}

std::map<std::string, Group> classify(const ResponseMatrix& matrix) {
    if (matrix.blocks.size() != matrix.rows.size())
        throw StateError("classify: malformed response matrix");
    std::map<std::string, Group> out;
    for (std::size_t i = 0; i < matrix.blocks.size(); ++i) {
        const auto& row = matrix.rows[i];
        if (row[0] == 0.0 && row[1] == 0.0 && row[2] == 0.0)
            throw StateError("classify: dead block (all-zero response): " + matrix.blocks[i]);
        // Strict argmax; earlier category wins ties (visual < spatial < medical).
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c)
            if (row[c] > row[best]) best = c;
        out[matrix.blocks[i]] = ResponseMatrix::categories[best];
    }
    return out;
}

void apply_classification(ParamStore& params, const std::map<std::string, Group>& assignment) {
    for (const auto& block : params.blocks()) {
        const auto it = assignment.find(block.name);
        if (it == assignment.end())
            throw StateError("apply_classification: no assignment for block " + block.name);
        if (it->second == Group::unassigned)
            throw StateError("apply_classification: block left unassigned: " + block.name);
    }
    for (const auto& [name, group] : assignment) params.set_group(name, group);
}

}  // namespace paewc
