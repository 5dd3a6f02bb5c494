#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paewc/model.hpp"

namespace paewc {

// Dice trajectory of one sequential run. Row r holds the test Dice of every
// task measured after finishing training on the r-th task in the sequence;
// columns follow the training order.
struct RunRecord {
    std::string method;
    std::string order;
    std::string tier;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::string> task_names;
    std::vector<std::vector<double>> dice;  // [checkpoint][task]
    double wall_seconds = 0.0;

    std::size_t task_count() const { return task_names.size(); }
    void validate() const;  // throws StateError if the matrix is incomplete

    // Per-task max over checkpoints at/after the task's own training.
    std::vector<double> peak() const;
    std::vector<double> final_row() const;
};

struct EvalResult {
    std::vector<double> per_task_dice;  // final row
    double average_dice = 0.0;
    std::vector<double> per_task_forgetting;  // tasks 1..T-1
    double forgetting_total = 0.0;
    double forgetting_mean = 0.0;
};

// 2|P & G| / (|P| + |G|); both masks empty gives 1.0 (perfect agreement).
// Throws ShapeError when lengths differ, ValueError on non-binary values.
double dice_coeff(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt);

// Hard masks from logits: foreground where the softmax foreground
// probability exceeds 0.5; exact ties go to background.
std::vector<std::vector<std::uint8_t>> binarize(const SegLogits& logits);

// 0/1 doubles -> bits.
std::vector<std::uint8_t> mask_bits(const Tensor& mask);

// Per-task peak-minus-final drops and their sum/mean over tasks 1..T-1.
EvalResult forgetting_rate(const RunRecord& record);

}  // namespace paewc
