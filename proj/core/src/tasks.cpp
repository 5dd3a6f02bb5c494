#include "paewc/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace paewc {

const char* family_name(Family f) {
    switch (f) {
        case Family::blob: return "blob";
        case Family::ring: return "ring";
        case Family::box: return "box";
        case Family::stripe: return "stripe";
        case Family::crescent: return "crescent";
    }
    return "?";
}

void TaskSpec::validate() const {
    if (image_size < 8) throw ConfigError("task image_size must be >= 8");
    if (channels < 1) throw ConfigError("task channels must be >= 1");
    if (!(size_range[0] > 0.0) || !(size_range[1] >= size_range[0]) || size_range[1] > 0.25)
        throw ConfigError("task size_range must satisfy 0 < lo <= hi <= 0.25");
    if (position_cells.empty()) throw ConfigError("task has no allowed position cells");
    for (const auto& c : position_cells)
        if (c[0] < 0 || c[0] > 2 || c[1] < 0 || c[1] > 2)
            throw ConfigError("position cell outside the 3x3 grid");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    if (n_train < 1 || n_val < 1 || n_test < 1) throw ConfigError("split sizes must be >= 1");
}

namespace {

struct Placement {
    int row = 0, col = 0;
    double cx = 0, cy = 0;
    double area_frac = 0;
    double orient = 0;      // stripe angle
    double ecc = 0;         // blob eccentricity / box aspect / crescent cut angle
};

// Pixel-center membership test per family. The area_frac is calibrated per
// shape so the rasterized mask lands near area_frac * H * W pixels.
bool inside_shape(Family fam, const Placement& pl, double px, double py, int image_size) {
    const double hw = static_cast<double>(image_size) * image_size;
    const double area = pl.area_frac * hw;
    const double dx = px - pl.cx, dy = py - pl.cy;
    switch (fam) {
        case Family::blob: {
            const double r = std::sqrt(area / 3.14159265358979323846);
            const double rx = r * (1.0 + pl.ecc), ry = r / (1.0 + pl.ecc);
            return (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0;
        }
        case Family::ring: {
            // annulus with inner radius 0.55 r: area = pi r^2 (1 - 0.55^2)
            const double r = std::sqrt(area / (3.14159265358979323846 * (1.0 - 0.55 * 0.55)));
            const double d2 = dx * dx + dy * dy;
            return d2 <= r * r && d2 >= (0.55 * r) * (0.55 * r);
        }
        case Family::box: {
            const double aspect = 0.7 + pl.ecc;  // in [0.7, 1.4]
            const double b = std::sqrt(area / (4.0 * aspect));
            const double a = b * aspect;
            return std::abs(dx) <= a && std::abs(dy) <= b;
        }
        case Family::stripe: {
            const double len = std::sqrt(area * 3.0);
            const double half_t = area / (2.0 * len);
            const double c = std::cos(pl.orient), s = std::sin(pl.orient);
            const double along = dx * c + dy * s;
            const double across = -dx * s + dy * c;
            return std::abs(along) <= len / 2.0 && std::abs(across) <= half_t;
        }
        case Family::crescent: {
            // disc minus an offset cut disc; ~0.45 of the disc remains
            const double r = std::sqrt(area / (3.14159265358979323846 * 0.45));
            const double d2 = dx * dx + dy * dy;
            if (d2 > r * r) return false;
            const double cutx = pl.cx + 0.55 * r * std::cos(pl.ecc);
            const double cuty = pl.cy + 0.55 * r * std::sin(pl.ecc);
            const double ex = px - cutx, ey = py - cuty;
            return ex * ex + ey * ey > (0.75 * r) * (0.75 * r);
        }
    }
    return false;
}

Item render_item(const TaskSpec& spec, PromptTier tier, std::uint64_t item_seed) {
    Rng rng(item_seed);
    const int H = spec.image_size, W = spec.image_size, C = spec.channels;

    Placement pl;
    const auto cell = spec.position_cells[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(spec.position_cells.size())))];
    pl.row = cell[0];
    pl.col = cell[1];
    pl.cx = (pl.col + 0.5) * W / 3.0 + rng.uniform(-1.5, 1.5);
    pl.cy = (pl.row + 0.5) * H / 3.0 + rng.uniform(-1.5, 1.5);
    pl.area_frac = rng.uniform(spec.size_range[0], spec.size_range[1]);
    pl.orient = rng.uniform(0.0, 3.14159265358979323846);
    pl.ecc = spec.family == Family::box ? rng.uniform(0.0, 0.7)
             : spec.family == Family::crescent
                 ? rng.uniform(0.0, 2.0 * 3.14159265358979323846)
                 : rng.uniform(0.0, 0.3);

    std::array<double, 3> obj_color{};
    for (int c = 0; c < C && c < 3; ++c)
        obj_color[static_cast<std::size_t>(c)] =
            rng.uniform(spec.color_range[static_cast<std::size_t>(c)][0],
                        spec.color_range[static_cast<std::size_t>(c)][1]);

    // Decoy placement: another family's shape, same palette, different cell.
    Placement decoy;
    std::array<double, 3> decoy_color{};
    if (spec.with_decoy) {
        std::vector<std::array<int, 2>> other_cells;
        for (const auto& c : spec.position_cells)
            if (c[0] != pl.row || c[1] != pl.col) other_cells.push_back(c);
        const auto dcell = other_cells.empty()
                               ? std::array<int, 2>{2 - pl.row, 2 - pl.col}
                               : other_cells[static_cast<std::size_t>(
                                     rng.uniform_int(static_cast<int>(other_cells.size())))];
        decoy.row = dcell[0];
        decoy.col = dcell[1];
        decoy.cx = (decoy.col + 0.5) * W / 3.0 + rng.uniform(-1.5, 1.5);
        decoy.cy = (decoy.row + 0.5) * H / 3.0 + rng.uniform(-1.5, 1.5);
        decoy.area_frac = rng.uniform(spec.size_range[0], spec.size_range[1]);
        decoy.orient = rng.uniform(0.0, 3.14159265358979323846);
        decoy.ecc = spec.decoy_family == Family::box ? rng.uniform(0.0, 0.7)
                    : spec.decoy_family == Family::crescent
                        ? rng.uniform(0.0, 2.0 * 3.14159265358979323846)
                        : rng.uniform(0.0, 0.3);
        for (int c = 0; c < C && c < 3; ++c)
            decoy_color[static_cast<std::size_t>(c)] =
                rng.uniform(spec.color_range[static_cast<std::size_t>(c)][0],
                            spec.color_range[static_cast<std::size_t>(c)][1]);
    }

    std::vector<double> mask(static_cast<std::size_t>(H) * W, 0.0);
    std::vector<std::uint8_t> decoy_mask(static_cast<std::size_t>(H) * W, 0);
    int on = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (spec.with_decoy &&
                inside_shape(spec.decoy_family, decoy, x + 0.5, y + 0.5, spec.image_size))
                decoy_mask[static_cast<std::size_t>(y) * W + x] = 1;
            if (inside_shape(spec.family, pl, x + 0.5, y + 0.5, spec.image_size)) {
                mask[static_cast<std::size_t>(y) * W + x] = 1.0;
                ++on;
            }
        }
    if (on == 0) {
        // Degenerate rasterization; force the center pixel so every item has
        // a nonempty mask.
        const int x = std::clamp(static_cast<int>(pl.cx), 0, W - 1);
        const int y = std::clamp(static_cast<int>(pl.cy), 0, H - 1);
        mask[static_cast<std::size_t>(y) * W + x] = 1.0;
    }

    std::vector<double> img(static_cast<std::size_t>(C) * H * W);
    for (int c = 0; c < C; ++c) {
        const double base = spec.background[static_cast<std::size_t>(std::min(c, 2))];
        const double obj = obj_color[static_cast<std::size_t>(std::min(c, 2))];
        const double dec = decoy_color[static_cast<std::size_t>(std::min(c, 2))];
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const std::size_t px = static_cast<std::size_t>(y) * W + x;
                // Target pixels win where target and decoy overlap.
                double v = mask[px] > 0.5 ? obj : decoy_mask[px] ? dec : base;
                v += rng.gaussian(0.0, spec.noise_sigma);
                img[(static_cast<std::size_t>(c) * H + y) * W + x] = std::clamp(v, 0.0, 1.0);
            }
    }

    const FamilyPromptWords& fw = family_prompt_words(spec.task_id);
    Item item;
    item.ctx.task_id = spec.task_id;
    item.ctx.noun = fw.noun;
    item.ctx.definition = fw.definition;
    item.ctx.shape_word = fw.shape_word;
    const double third = (spec.size_range[1] - spec.size_range[0]) / 3.0;
    item.ctx.size_word = pl.area_frac < spec.size_range[0] + third            ? "small"
                         : pl.area_frac < spec.size_range[0] + 2.0 * third    ? "medium"
                                                                              : "large";
    double tint = 0.0;
    int nch = 0;
    for (int c = 0; c < C && c < 3; ++c, ++nch) {
        const auto& cr = spec.color_range[static_cast<std::size_t>(c)];
        tint += cr[1] > cr[0] ? (obj_color[static_cast<std::size_t>(c)] - cr[0]) / (cr[1] - cr[0])
                              : 0.5;
    }
    item.ctx.color_word = (nch > 0 && tint / nch >= 0.5) ? fw.color_hi : fw.color_lo;
    item.ctx.position = position_words(pl.row, pl.col);

    item.image = Tensor({C, H, W}, std::move(img), false);
    item.mask = Tensor({H, W}, std::move(mask), false);
    item.prompt = render_prompt(tier, item.ctx);
    return item;
}

std::vector<Item> render_split(const TaskSpec& spec, PromptTier tier, std::uint64_t split_seed,
                               int count) {
    std::vector<Item> items;
    items.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        items.push_back(render_item(spec, tier, derive_seed(split_seed, "item", static_cast<std::uint64_t>(k))));
    return items;
}

}  // namespace

TaskDataset make_task(const TaskSpec& spec, PromptTier tier, std::uint64_t seed) {
    spec.validate();
    TaskDataset ds;
    ds.spec = spec;
    ds.tier = tier;
    const std::uint64_t task_tag = static_cast<std::uint64_t>(spec.task_id);
    ds.train = render_split(spec, tier, derive_seed(seed, "split-train", task_tag), spec.n_train);
    ds.val = render_split(spec, tier, derive_seed(seed, "split-val", task_tag), spec.n_val);
    ds.test = render_split(spec, tier, derive_seed(seed, "split-test", task_tag), spec.n_test);
    return ds;
}

std::vector<TaskSpec> default_suite(std::uint64_t seed) {
    std::vector<TaskSpec> specs(5);
    const std::vector<std::array<int, 2>> all_cells = {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1},
                                                       {1, 2}, {2, 0}, {2, 1}, {2, 2}};
    for (int i = 0; i < 5; ++i) {
        specs[static_cast<std::size_t>(i)].task_id = i;
        specs[static_cast<std::size_t>(i)].position_cells = all_cells;
        specs[static_cast<std::size_t>(i)].data_seed =
            derive_seed(seed, "task-data", static_cast<std::uint64_t>(i));
    }

    auto& blob = specs[0];
    blob.family = Family::blob;
    blob.decoy_family = Family::box;
    blob.color_range = {{{0.75, 0.95}, {0.45, 0.65}, {0.50, 0.70}}};
    blob.background = {0.45, 0.15, 0.18};
    blob.size_range = {0.06, 0.15};
    blob.adaptive_tier = PromptTier::spatial;

    auto& ring = specs[1];
    ring.family = Family::ring;
    ring.decoy_family = Family::blob;
    ring.color_range = {{{0.25, 0.45}, {0.15, 0.30}, {0.10, 0.25}}};
    ring.background = {0.80, 0.65, 0.55};
    ring.size_range = {0.07, 0.15};
    ring.adaptive_tier = PromptTier::visual;

    auto& box = specs[2];
    box.family = Family::box;
    box.decoy_family = Family::crescent;
    box.color_range = {{{0.62, 0.80}, {0.62, 0.80}, {0.64, 0.82}}};
    box.background = {0.20, 0.20, 0.22};
    box.size_range = {0.06, 0.15};
    box.adaptive_tier = PromptTier::spatial;

    auto& stripe = specs[3];
    stripe.family = Family::stripe;
    stripe.decoy_family = Family::box;
    stripe.color_range = {{{0.75, 0.95}, {0.60, 0.80}, {0.25, 0.45}}};
    stripe.background = {0.50, 0.42, 0.30};
    stripe.size_range = {0.07, 0.13};
    stripe.adaptive_tier = PromptTier::spatial;

    auto& crescent = specs[4];
    crescent.family = Family::crescent;
    crescent.decoy_family = Family::stripe;
    crescent.color_range = {{{0.55, 0.80}, {0.55, 0.80}, {0.55, 0.80}}};
    crescent.background = {0.05, 0.06, 0.08};
    crescent.size_range = {0.06, 0.14};
    crescent.adaptive_tier = PromptTier::medical;

    return specs;
}

const std::vector<std::string>& order_names() {
    static const std::vector<std::string> names = {"order_A", "order_B", "order_C", "order_D",
                                                   "order_E"};
    return names;
}

const std::vector<int>& task_order(const std::string& name) {
    static const std::map<std::string, std::vector<int>> orders = {
        {"order_A", {0, 1, 2, 3, 4}}, {"order_B", {2, 4, 3, 1, 0}}, {"order_C", {4, 0, 2, 3, 1}},
        {"order_D", {1, 4, 0, 2, 3}}, {"order_E", {2, 0, 4, 1, 3}},
    };
    auto it = orders.find(name);
    if (it == orders.end()) throw ValueError("unknown task order: " + name);
    return it->second;
}

}  // namespace paewc
