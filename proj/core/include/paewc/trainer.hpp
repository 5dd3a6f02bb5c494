#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paewc/fisher.hpp"
#include "paewc/losses.hpp"
#include "paewc/metrics.hpp"
#include "paewc/model.hpp"
#include "paewc/optimizer.hpp"
#include "paewc/tasks.hpp"

namespace paewc {

enum class Method { sequential, general_ewc, pa_ewc };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct TrainerConfig {
    Method method = Method::pa_ewc;
    ModelConfig model;
    int epochs_per_task = 20;
    int batch_size = 16;
    AdamWConfig optimizer;
    std::uint64_t seed = 43;
    int early_stop_patience = 5;  // epochs without a validation-Dice improvement
    LossWeights loss;

    int probe_samples = 16;       // classifier probe size
    int fisher_samples = 32;      // samples for the empirical Fisher
    int stability_batches = 8;    // K gradient-norm measurements
    int stability_batch_size = 8;
    bool refresh_classification = true;  // reclassify at the start of every task

    void validate() const;
};

struct EpochLog {
    LossBreakdown mean_loss;
    double val_dice = 0.0;
};

struct TaskTrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;
    double best_val_dice = 0.0;
};

// Minibatch training on the composite loss for one task; returns with the
// parameters that achieved the best validation Dice. The snapshots span
// supplies the penalty terms (pass empty for plain supervised training).
// Throws NumericError naming the epoch if the loss goes non-finite.
TaskTrainLog train_task(ParamStore& params, const TaskDataset& task,
                        std::span<const FisherSnapshot> snapshots, const TrainerConfig& cfg);

// Captures the post-convergence state of a task: Fisher importance, gradient
// stability, activation statistics and similarity to the previous task,
// prompt complexity, per-group weights, and the anchor parameters.
// c_max is the running complexity maximum including this task.
struct SnapshotResult {
    FisherSnapshot snapshot;
    ActivationStats stats;
};
SnapshotResult snapshot_task(ParamStore& params, const TaskDataset& task, Method method,
                             const std::optional<ActivationStats>& prev_stats, double c_max,
                             const TrainerConfig& cfg);

// Mean test Dice of a task under the current parameters.
double evaluate_dice(ParamStore& params, ItemView items, int batch_size);

// Full sequential protocol: per-task classification refresh (pa_ewc),
// training, evaluation of every task's test set, and snapshot capture.
// Requires at least two tasks.
RunRecord run_sequence(std::vector<TaskDataset>& tasks, const TrainerConfig& cfg);

// Prompt-set complexity of a task's training prompts.
double task_complexity(const TaskDataset& task);

}  // namespace paewc
