#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "paewc/errors.hpp"
#include "paewc/rng.hpp"

namespace paewc {

// The five prompt tiers, ordered by intended information content.
enum class PromptTier { basic, visual, spatial, medical, comprehensive };

const char* tier_name(PromptTier t);
PromptTier tier_from_name(const std::string& name);

// Three disjoint term sets driving the weighted complexity metric and the
// category prompts used for parameter classification.
struct Lexicon {
    std::set<std::string> visual_terms;
    std::set<std::string> spatial_terms;
    std::set<std::string> medical_terms;

    // Built-in vocabulary.
    static Lexicon defaults();
    // Plain-text format: [visual] / [spatial] / [medical] section headers,
    // one lowercase token per line, '#' comments allowed.
    static Lexicon load(const std::string& path);

    void validate() const;  // nonempty, pairwise disjoint
};

struct PromptSpec {
    PromptTier tier = PromptTier::basic;
    std::vector<std::string> text;  // tokens
    int task_id = 0;

    std::string joined() const;
};

// Everything needed to rebuild a sample's prompt at any tier. Populated by
// the task generator so the rendered prompt always matches the rendered
// object (position, size bucket, colour).
struct PromptContext {
    int task_id = 0;
    std::string noun;                     // e.g. "polyp"
    std::vector<std::string> definition;  // e.g. {"a","small","lump","in","colon"}
    std::string size_word;                // small | medium | large
    std::string color_word;               // e.g. "pink"
    std::string shape_word;               // e.g. "round"
    std::vector<std::string> position;    // e.g. {"top","left"} or {"center"}
};

struct ComplexityScore {
    double value = 0.0;
    // Mean per-prompt counts (|W|, |V|, |S|, |M|).
    double base_words = 0.0;
    double visual_hits = 0.0;
    double spatial_hits = 0.0;
    double medical_hits = 0.0;
};

// Term weights for the complexity metric.
inline constexpr double kAlphaVisual = 2.0;
inline constexpr double kAlphaSpatial = 2.5;
inline constexpr double kAlphaMedical = 3.0;

// Lowercases, splits on whitespace, strips punctuation except internal
// hyphens ("four-chamber" stays one token). Empty input gives an empty list.
std::vector<std::string> tokenize(const std::string& text);

// Weighted prompt-set complexity: mean over prompts of
//   |W_p| + 2.0|V_p| + 2.5|S_p| + 3.0|M_p|
// where |W_p| counts every token and the hit counts are lexicon memberships
// with multiplicity. Throws ValueError on an empty set or an empty prompt.
ComplexityScore complexity(const std::vector<PromptSpec>& prompts, const Lexicon& lexicon);

// Renders the tier pattern from a fixed context; deterministic.
//   basic:         <noun>
//   visual:        <size> <color> <shape> <noun>
//   spatial:       <noun> located in <position>
//   medical:       <noun> which is <definition>
//   comprehensive: <size> <color> <shape> <noun> which is <definition>
//                  located in <position>
PromptSpec render_prompt(PromptTier tier, const PromptContext& ctx);

// Prompt vocabulary of one of the five built-in task families.
struct FamilyPromptWords {
    std::string noun;
    std::vector<std::string> definition;
    std::string shape_word;
    std::string color_lo;  // dim half of the family's intensity range
    std::string color_hi;
};
const FamilyPromptWords& family_prompt_words(int task_id);  // 0..4

// Names for a 3x3 placement grid cell, e.g. (0,0) -> {top,left},
// (1,1) -> {center}.
std::vector<std::string> position_words(int row, int col);

// Samples a context for the task family and renders it; deterministic under
// the rng state. Task ids map to the five built-in families (see tasks.hpp);
// unknown ids throw ValueError.
PromptSpec generate_prompt(PromptTier tier, int task_id, Rng& rng);

// Every word the built-in taxonomy can emit, in a fixed order; their indices
// are the stable token ids fed to the embedding table.
const std::vector<std::string>& builtin_vocabulary();

// Token strings to ids. Known words keep their stable vocabulary slot; words
// outside the built-in list hash into the remaining id range. Throws
// ConfigError when vocab_size cannot hold the built-in vocabulary.
std::vector<int> encode_tokens(const std::vector<std::string>& tokens, int vocab_size);

}  // namespace paewc
