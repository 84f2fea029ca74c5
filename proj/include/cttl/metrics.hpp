// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cttl::metrics {

enum class Checkpoint { post_supervised, post_ttl };

std::string checkpoint_name(Checkpoint c);

// Lower-triangular accuracy matrix: row i holds accuracies on tasks 0..i
// recorded after session i.
class ResultMatrix {
public:
    explicit ResultMatrix(std::size_t tasks = 0, Checkpoint tag = Checkpoint::post_ttl) : tasks_(tasks), tag_(tag) {}

    std::size_t tasks() const { return tasks_; }
    std::size_t completed() const { return rows_.size(); }
    Checkpoint tag() const { return tag_; }

    // Appends row i = completed(); it must hold exactly i + 1 values in [0,1].
    void push_row(std::vector<double> row);
    double at(std::size_t i, std::size_t j) const;
    const std::vector<double>& row(std::size_t i) const { return rows_.at(i); }
    const std::vector<std::vector<double>>& rows() const { return rows_; }

private:
    std::size_t tasks_;
    Checkpoint tag_;
    std::vector<std::vector<double>> rows_;
};

struct Metrics {
    double average_accuracy = 0.0;
    // undefined for a single task
    std::optional<double> forgetting;
    double first_task_accuracy = 0.0;
    // mean of the diagonal
    double current_task_accuracy = 0.0;
    double last_task_accuracy = 0.0;
};

// Average accuracy over the final row, forgetting
// -(1/(T-1)) sum_{i<T} (R[T,i] - R[i,i]), FTA = R[T,1], CTA = mean R[i,i].
Metrics compute_metrics(const ResultMatrix& r);

}  // namespace cttl::metrics
