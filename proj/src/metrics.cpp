// Copyright (c) 2026, The cttl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cttl/metrics.hpp"

#include <stdexcept>

namespace cttl::metrics {

std::string checkpoint_name(Checkpoint c) { return c == Checkpoint::post_supervised ? "post_supervised" : "post_ttl"; }

void ResultMatrix::push_row(std::vector<double> row) {
    if (rows_.size() >= tasks_) throw std::logic_error("result matrix: all rows already recorded");
    if (row.size() != rows_.size() + 1) {
        throw std::invalid_argument("result matrix: row " + std::to_string(rows_.size()) + " needs " +
                                    std::to_string(rows_.size() + 1) + " entries, got " + std::to_string(row.size()));
    }
    for (double v : row) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("result matrix: accuracy outside [0,1]");
    }
    rows_.push_back(std::move(row));
}

double ResultMatrix::at(std::size_t i, std::size_t j) const {
    if (i >= rows_.size() || j > i) throw std::out_of_range("result matrix: entry not recorded");
    return rows_[i][j];
}

Metrics compute_metrics(const ResultMatrix& r) {
    const std::size_t t = r.tasks();
    if (t == 0 || r.completed() != t) throw std::invalid_argument("compute_metrics: result matrix incomplete");
    const auto& last = r.row(t - 1);
    Metrics m;
    double sum = 0.0;
    for (double v : last) sum += v;
    m.average_accuracy = sum / static_cast<double>(t);
    if (t >= 2) {
        double drop = 0.0;
        for (std::size_t i = 0; i + 1 < t; ++i) drop += last[i] - r.at(i, i);
        m.forgetting = -drop / static_cast<double>(t - 1);
    }
    m.first_task_accuracy = last[0];
    double diag = 0.0;
    for (std::size_t i = 0; i < t; ++i) diag += r.at(i, i);
    m.current_task_accuracy = diag / static_cast<double>(t);
    m.last_task_accuracy = r.at(t - 1, t - 1);
    return m;
}

}  // namespace cttl::metrics
