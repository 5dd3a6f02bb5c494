#include "paewc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "paewc/classifier.hpp"
#include "paewc/prompts.hpp"

namespace paewc {

const char* method_name(Method m) {
    switch (m) {
        case Method::sequential: return "sequential";
        case Method::general_ewc: return "general_ewc";
        case Method::pa_ewc: return "pa_ewc";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "sequential") return Method::sequential;
    if (name == "general_ewc") return Method::general_ewc;
    if (name == "pa_ewc") return Method::pa_ewc;
    throw ValueError("unknown method: " + name);
}

void TrainerConfig::validate() const {
    model.validate();
    if (epochs_per_task < 1) throw ConfigError("epochs_per_task must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (probe_samples < 1 || fisher_samples < 1) throw ConfigError("sample counts must be >= 1");
    if (stability_batches < 2) throw ConfigError("stability_batches must be >= 2");
    if (stability_batch_size < 1) throw ConfigError("stability_batch_size must be >= 1");
    optimizer.validate();
    loss.validate();
}

namespace {

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
}

}  // namespace

double evaluate_dice(ParamStore& params, ItemView items, int batch_size) {
    if (items.empty()) throw ValueError("evaluate_dice: empty item set");
    NoGradGuard ng;
    double acc = 0.0;
    for (std::size_t start = 0; start < items.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(items.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<Tensor> images;
        std::vector<std::vector<int>> prompts;
        for (std::size_t i = start; i < end; ++i) {
            images.push_back(items[i].image);
            prompts.push_back(encode_tokens(items[i].prompt.text, params.config.vocab_size));
        }
        SegLogits logits = forward(params, stack_images(images), prompts);
        const auto pred = binarize(logits);
        for (std::size_t i = start; i < end; ++i)
            acc += dice_coeff(pred[i - start], mask_bits(items[i].mask));
    }
    return acc / static_cast<double>(items.size());
}

double task_complexity(const TaskDataset& task) {
    std::vector<PromptSpec> prompts;
    prompts.reserve(task.train.size());
    for (const auto& item : task.train) prompts.push_back(item.prompt);
    return complexity(prompts, Lexicon::defaults()).value;
}

TaskTrainLog train_task(ParamStore& params, const TaskDataset& task,
                        std::span<const FisherSnapshot> snapshots, const TrainerConfig& cfg) {
    cfg.validate();
    if (task.train.empty() || task.val.empty())
        throw ValueError("train_task: task needs train and val splits");

    AdamW opt(params, cfg.optimizer);
    TaskTrainLog log;
    ParamStore best = params.clone();
    int stale_epochs = 0;

    std::vector<std::size_t> idx(task.train.size());
    std::iota(idx.begin(), idx.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle",
                                    (static_cast<std::uint64_t>(task.spec.task_id) << 32) |
                                        static_cast<std::uint64_t>(epoch)));
        shuffle_indices(idx, shuffle_rng);

        LossBreakdown epoch_sum;
        int batches = 0;
        for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<Tensor> images;
            std::vector<std::vector<int>> prompts;
            std::vector<Item> batch_items;
            for (std::size_t i = start; i < end; ++i) {
                const Item& it = task.train[idx[i]];
                images.push_back(it.image);
                prompts.push_back(encode_tokens(it.prompt.text, params.config.vocab_size));
                batch_items.push_back(it);
            }

            params.zero_grad();
            SegLogits logits = forward(params, stack_images(images), prompts);
            Tensor mask = stack_masks(batch_items);
            Tensor seg = seg_ce(logits, mask);
            Tensor dice = dice_loss(logits, mask, cfg.loss.epsilon);
            Tensor ewc;
            if (!snapshots.empty() && cfg.loss.w_ewc > 0.0) ewc = ewc_penalty(params, snapshots);
            TotalLoss total = total_loss(seg, dice, ewc, cfg.loss);
            if (!std::isfinite(total.parts.total))
                throw NumericError("train_task: non-finite loss at epoch " + std::to_string(epoch));

            backward(total.value);
            opt.step();

            epoch_sum.seg += total.parts.seg;
            epoch_sum.dice += total.parts.dice;
            epoch_sum.ewc += total.parts.ewc;
            epoch_sum.total += total.parts.total;
            ++batches;
        }

        EpochLog el;
        el.mean_loss = {epoch_sum.seg / batches, epoch_sum.dice / batches, epoch_sum.ewc / batches,
                        epoch_sum.total / batches};
        el.val_dice = evaluate_dice(params, task.val, cfg.batch_size);
        log.epochs.push_back(el);

        if (el.val_dice > log.best_val_dice || log.best_epoch < 0) {
            log.best_val_dice = el.val_dice;
            log.best_epoch = epoch;
            best.load_values(params);
            stale_epochs = 0;
        } else if (++stale_epochs >= cfg.early_stop_patience) {
            break;
        }
    }

    params.load_values(best);
    return log;
}

SnapshotResult snapshot_task(ParamStore& params, const TaskDataset& task, Method method,
                             const std::optional<ActivationStats>& prev_stats, double c_max,
                             const TrainerConfig& cfg) {
    if (method == Method::sequential)
        throw ValueError("snapshot_task: the sequential baseline stores no snapshots");

    SnapshotResult res;
    FisherSnapshot& snap = res.snapshot;
    snap.task_id = task.spec.task_id;
    snap.complexity = task_complexity(task);
    res.stats = activation_stats(params, task.probe());
    snap.similarity = prev_stats ? task_similarity(*prev_stats, res.stats) : 1.0;

    for (const auto& block : params.blocks()) {
        snap.anchor[block.name] = block.tensor.values();
        snap.groups[block.name] = block.group;
    }

    if (method == Method::general_ewc) {
        // Uniform protection: raw empirical Fisher, one shared unit weight.
        snap.fisher = base_fisher(params, ItemView(task.train), cfg.fisher_samples,
                                  /*rescale=*/false);
        for (Group g : {Group::unassigned, Group::visual, Group::spatial, Group::medical})
            snap.group_weight[g] = 1.0;
        for (Group g : {Group::unassigned, Group::visual, Group::spatial, Group::medical})
            snap.stability[g] = 0.5;
        return res;
    }

    // pa_ewc: adaptive Fisher scaled by stability and similarity, with
    // complexity-scaled per-group weights.
    BlockArrays base =
        base_fisher(params, ItemView(task.train), cfg.fisher_samples, /*rescale=*/true);
    const auto norm_batches = collect_group_grad_norms(params, ItemView(task.train),
                                                       cfg.stability_batches,
                                                       cfg.stability_batch_size);
    snap.stability = stability_factor(norm_batches);
    snap.fisher = adaptive_fisher(base, snap.stability, snap.similarity, snap.groups);
    for (Group g : {Group::unassigned, Group::visual, Group::spatial, Group::medical}) {
        const double scalar = group_fisher_mean(snap.fisher, snap.groups, g);
        snap.group_weight[g] = adaptive_weight(scalar, snap.complexity, c_max);
    }
    return res;
}

RunRecord run_sequence(std::vector<TaskDataset>& tasks, const TrainerConfig& cfg) {
    cfg.validate();
    if (tasks.size() < 2) throw ValueError("run_sequence: needs at least 2 tasks");

    const auto t0 = std::chrono::steady_clock::now();
    RunRecord record;
    record.method = method_name(cfg.method);
    record.seed = cfg.seed;
    for (const auto& t : tasks) record.task_names.push_back(t.spec.name());

    for (const auto& t : tasks)
        if (t.spec.image_size != cfg.model.image_size || t.spec.channels != cfg.model.channels)
            throw ConfigError("task " + t.spec.name() + " geometry does not match the model");

    ParamStore params = build_model(cfg.model, cfg.seed);
    std::vector<FisherSnapshot> snapshots;
    std::optional<ActivationStats> prev_stats;
    double c_max = 0.0;
    const Lexicon lexicon = Lexicon::defaults();

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        TaskDataset& task = tasks[i];
        if (cfg.method == Method::pa_ewc && (i == 0 || cfg.refresh_classification)) {
            ResponseMatrix m = probe_responses(params, task.probe(), lexicon, cfg.probe_samples);
            apply_classification(params, classify(m));
        }

        train_task(params, task, snapshots, cfg);

        std::vector<double> row;
        row.reserve(tasks.size());
        for (auto& t : tasks) row.push_back(evaluate_dice(params, t.test, cfg.batch_size));
        record.dice.push_back(std::move(row));

        if (cfg.method != Method::sequential) {
            c_max = std::max(c_max, task_complexity(task));
            SnapshotResult sr = snapshot_task(params, task, cfg.method, prev_stats, c_max, cfg);
            prev_stats = sr.stats;
            snapshots.push_back(std::move(sr.snapshot));
        }
    }

    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record.validate();
    return record;
}

}  // namespace paewc
