#pragma once

#include <string>

#include <json.hpp>

#include "config.hpp"
#include "data.hpp"
#include "trace.hpp"

namespace idp {

struct TrainData {
  LabeledDataset train;
  OwnerPartition train_partition;
  LabeledDataset eval;
  OwnerPartition eval_partition;
};

TrainData materialize_dataset(const ExperimentConfig& cfg);

// Per-owner privacy ledger after mechanism resolution: the calibrated (q, C)
// pair and the Renyi budget the T-step run will spend at the owner's best
// conversion order.
struct OwnerLedger {
  int owner_id = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double q = 0.0;
  double C = 0.0;
  double alpha_star = 0.0;
  double eps_bar_step = 0.0;
  double eps_bar_total = 0.0;
  double achieved_epsilon = 0.0;
};

std::vector<OwnerLedger> resolve_mechanism(const ExperimentConfig& cfg);

// Full training run: T optimizer steps, trace rows at iteration 0 and every
// eval interval.
TrainingTrace run_training(const ExperimentConfig& cfg);

nlohmann::json run_calibrate(const ExperimentConfig& cfg);
std::string run_train_to_file(const ExperimentConfig& cfg, const std::string& out_path);
nlohmann::json run_audit(const std::string& kind, const nlohmann::json& options,
                         bool* violation_found);
nlohmann::json run_compare(const ExperimentConfig& a, const ExperimentConfig& b,
                           const std::string& metric, int seeds);

}  // namespace idp
