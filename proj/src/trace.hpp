#pragma once

#include <optional>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace idp {

struct TraceRow {
  long iter = 0;
  std::string optimizer;
  double overall_loss = 0.0;
  double overall_acc = 0.0;
  std::vector<double> group_loss;    // aligned with TrainingTrace::group_ids
  std::vector<double> group_recall;
  double mid_lhs = 0.0;              // NaN when undefined
  std::vector<double> eps_bar_spent;  // aligned with TrainingTrace::owner_ids
};

struct TrainingTrace {
  std::string config_hash;
  std::vector<int> group_ids;
  std::vector<int> owner_ids;
  std::vector<TraceRow> rows;
};

// Whole-file atomic write: temp file in the same directory, then rename.
void atomic_write_file(const std::string& path, const std::string& content);

std::string trace_to_csv(const TrainingTrace& trace);
void write_trace_csv(const TrainingTrace& trace, const std::string& path);
TrainingTrace read_trace_csv(const std::string& path);

struct EvalMetrics {
  double overall_loss = 0.0;
  double overall_acc = 0.0;
  std::vector<double> group_loss;    // mean loss per group
  std::vector<double> group_recall;  // correct within group / group size
};

EvalMetrics evaluate_model(const Model& model, const LabeledDataset& data,
                           const OwnerPartition& partition, const std::vector<int>& group_ids);

// Pearson correlation; nullopt when either side has zero variance or fewer
// than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace idp
