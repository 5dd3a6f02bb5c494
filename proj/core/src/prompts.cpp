#include "paewc/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace paewc {

const char* tier_name(PromptTier t) {
    switch (t) {
        case PromptTier::basic: return "basic";
        case PromptTier::visual: return "visual";
        case PromptTier::spatial: return "spatial";
        case PromptTier::medical: return "medical";
        case PromptTier::comprehensive: return "comprehensive";
    }
    return "basic";
}

PromptTier tier_from_name(const std::string& name) {
    if (name == "basic") return PromptTier::basic;
    if (name == "visual") return PromptTier::visual;
    if (name == "spatial") return PromptTier::spatial;
    if (name == "medical") return PromptTier::medical;
    if (name == "comprehensive") return PromptTier::comprehensive;
    throw ValueError("unknown prompt tier: " + name);
}

Lexicon Lexicon::defaults() {
    Lexicon lex;
    lex.visual_terms = {"round", "irregular", "pink",  "medium", "small",
                        "large", "shape",     "color", "texture"};
    lex.spatial_terms = {"located", "center", "left",         "right",
                         "top",     "bottom", "four-chamber", "two-chamber"};
    lex.medical_terms = {"polyp", "lesion",    "tumor",     "lump",
                         "pathology", "malignant", "benign", "tissue"};
    lex.validate();
    return lex;
}

void Lexicon::validate() const {
    if (visual_terms.empty() || spatial_terms.empty() || medical_terms.empty())
        throw ValueError("lexicon: all three term sets must be nonempty");
    auto overlaps = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        for (const auto& t : a)
            if (b.count(t)) return true;
        return false;
    };
    if (overlaps(visual_terms, spatial_terms) || overlaps(visual_terms, medical_terms) ||
        overlaps(spatial_terms, medical_terms))
        throw ValueError("lexicon: term sets must be pairwise disjoint");
}

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file: " + path);
    Lexicon lex;
    std::set<std::string>* section = nullptr;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto toks = tokenize(line);
        if (line.find('[') != std::string::npos) {
            if (line.find("[visual]") != std::string::npos)
                section = &lex.visual_terms;
            else if (line.find("[spatial]") != std::string::npos)
                section = &lex.spatial_terms;
            else if (line.find("[medical]") != std::string::npos)
                section = &lex.medical_terms;
            else
                throw FormatError("lexicon " + path + ":" + std::to_string(lineno) +
                                  ": unknown section header");
            continue;
        }
        if (toks.empty()) continue;
        if (!section)
            throw FormatError("lexicon " + path + ":" + std::to_string(lineno) +
                              ": token before any section header");
        for (auto& t : toks) section->insert(t);
    }
    lex.validate();
    return lex;
}

std::string PromptSpec::joined() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < text.size(); ++i) os << (i ? " " : "") << text[i];
    return os.str();
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        // Internal hyphens survive; leading/trailing ones do not.
        while (!cur.empty() && cur.front() == '-') cur.erase(cur.begin());
        while (!cur.empty() && cur.back() == '-') cur.pop_back();
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '-') {
            cur.push_back('-');
        }
        // other punctuation is dropped
    }
    flush();
    return out;
}

ComplexityScore complexity(const std::vector<PromptSpec>& prompts, const Lexicon& lexicon) {
    if (prompts.empty()) throw ValueError("complexity: empty prompt set");
    lexicon.validate();
    ComplexityScore score;
    for (const auto& p : prompts) {
        if (p.text.empty()) throw ValueError("complexity: prompt with zero tokens");
        double v = 0, s = 0, m = 0;
        for (const auto& tok : p.text) {
            if (lexicon.visual_terms.count(tok)) ++v;
            if (lexicon.spatial_terms.count(tok)) ++s;
            if (lexicon.medical_terms.count(tok)) ++m;
        }
        const double w = static_cast<double>(p.text.size());
        score.base_words += w;
        score.visual_hits += v;
        score.spatial_hits += s;
        score.medical_hits += m;
        score.value += w + kAlphaVisual * v + kAlphaSpatial * s + kAlphaMedical * m;
    }
    const double inv = 1.0 / static_cast<double>(prompts.size());
    score.value *= inv;
    score.base_words *= inv;
    score.visual_hits *= inv;
    score.spatial_hits *= inv;
    score.medical_hits *= inv;
    return score;
}

PromptSpec render_prompt(PromptTier tier, const PromptContext& ctx) {
    if (ctx.noun.empty()) throw ValueError("render_prompt: context has no noun");
    PromptSpec spec;
    spec.tier = tier;
    spec.task_id = ctx.task_id;
    auto& t = spec.text;
    auto add_visual = [&] {
        if (!ctx.size_word.empty()) t.push_back(ctx.size_word);
        if (!ctx.color_word.empty()) t.push_back(ctx.color_word);
        if (!ctx.shape_word.empty()) t.push_back(ctx.shape_word);
    };
    auto add_medical = [&] {
        t.push_back("which");
        t.push_back("is");
        t.insert(t.end(), ctx.definition.begin(), ctx.definition.end());
    };
    auto add_spatial = [&] {
        t.push_back("located");
        t.push_back("in");
        t.insert(t.end(), ctx.position.begin(), ctx.position.end());
    };
    switch (tier) {
        case PromptTier::basic:
            t.push_back(ctx.noun);
            break;
        case PromptTier::visual:
            add_visual();
            t.push_back(ctx.noun);
            break;
        case PromptTier::spatial:
            t.push_back(ctx.noun);
            add_spatial();
            break;
        case PromptTier::medical:
            t.push_back(ctx.noun);
            add_medical();
            break;
        case PromptTier::comprehensive:
            add_visual();
            t.push_back(ctx.noun);
            add_medical();
            add_spatial();
            break;
    }
    return spec;
}

const FamilyPromptWords& family_prompt_words(int task_id) {
    // Prompt vocabulary of the five built-in task families (see tasks.hpp).
    static const std::array<FamilyPromptWords, 5> kWords = {{
        {"polyp", tokenize("a small lump in colon"), "round", "pale", "pink"},
        {"lesion", tokenize("an abnormal tissue growth"), "round", "dark", "brown"},
        {"tumor", tokenize("a malignant mass of tissue"), "square", "gray", "bright"},
        {"pathology", tokenize("an irregular benign streak"), "narrow", "dull", "amber"},
        {"lump", tokenize("a benign bump under tissue"), "irregular", "dim", "silver"},
    }};
    if (task_id < 0 || task_id >= static_cast<int>(kWords.size()))
        throw ValueError("unknown task id " + std::to_string(task_id));
    return kWords[static_cast<std::size_t>(task_id)];
}

std::vector<std::string> position_words(int row, int col) {
    if (row < 0 || row > 2 || col < 0 || col > 2)
        throw ValueError("position_words: cell out of the 3x3 grid");
    static const char* kRows[3] = {"top", "center", "bottom"};
    static const char* kCols[3] = {"left", "center", "right"};
    if (row == 1 && col == 1) return {"center"};
    if (row == 1) return {"center", kCols[col]};
    if (col == 1) return {kRows[row], "center"};
    return {kRows[row], kCols[col]};
}

const std::vector<std::string>& builtin_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        std::set<std::string> seen;
        auto put = [&](const std::string& w) {
            if (seen.insert(w).second) v.push_back(w);
        };
        const Lexicon lex = Lexicon::defaults();
        for (const auto& w : lex.visual_terms) put(w);
        for (const auto& w : lex.spatial_terms) put(w);
        for (const auto& w : lex.medical_terms) put(w);
        for (const char* w : {"which", "is", "in", "a", "an", "of"}) put(w);
        for (int f = 0; f < 5; ++f) {
            const auto& fw = family_prompt_words(f);
            put(fw.noun);
            for (const auto& w : fw.definition) put(w);
            put(fw.shape_word);
            put(fw.color_lo);
            put(fw.color_hi);
        }
        return v;
    }();
    return vocab;
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens, int vocab_size) {
    const auto& vocab = builtin_vocabulary();
    if (vocab_size < static_cast<int>(vocab.size()))
        throw ConfigError("vocab_size " + std::to_string(vocab_size) +
                          " is smaller than the built-in vocabulary (" +
                          std::to_string(vocab.size()) + " words)");
    static const std::map<std::string, int> index = [] {
        std::map<std::string, int> m;
        const auto& v = builtin_vocabulary();
        for (std::size_t i = 0; i < v.size(); ++i) m[v[i]] = static_cast<int>(i);
        return m;
    }();
    std::vector<int> out;
    out.reserve(tokens.size());
    const int spill = vocab_size - static_cast<int>(vocab.size());
    for (const auto& t : tokens) {
        const auto it = index.find(t);
        if (it != index.end()) {
            out.push_back(it->second);
        } else if (spill > 0) {
            out.push_back(static_cast<int>(vocab.size()) +
                          static_cast<int>(fnv1a(t) % static_cast<std::uint64_t>(spill)));
        } else {
            out.push_back(static_cast<int>(fnv1a(t) % static_cast<std::uint64_t>(vocab_size)));
        }
    }
    return out;
}

PromptSpec generate_prompt(PromptTier tier, int task_id, Rng& rng) {
    const FamilyPromptWords& fw = family_prompt_words(task_id);
    PromptContext ctx;
    ctx.task_id = task_id;
    ctx.noun = fw.noun;
    ctx.definition = fw.definition;
    ctx.shape_word = fw.shape_word;
    static const char* kSizes[3] = {"small", "medium", "large"};
    ctx.size_word = kSizes[rng.uniform_int(3)];
    ctx.color_word = rng.uniform_int(2) == 0 ? fw.color_lo : fw.color_hi;
    const int row = rng.uniform_int(3), col = rng.uniform_int(3);
    ctx.position = position_words(row, col);
    return render_prompt(tier, ctx);
}

}  // namespace paewc
