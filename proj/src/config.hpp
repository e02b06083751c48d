#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "accounting.hpp"
#include "importance.hpp"
#include "model.hpp"

namespace idp {

enum class DatasetKind { two_group_synthetic, idx };
enum class MechanismVariant { dpsgd, sample, scale, joint };
enum class OptimizerKind { idp, ino };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::two_group_synthetic;
  // two_group_synthetic
  int n_per_group = 1000;
  int dimension = 2;
  double separation = 3.0;
  int n_eval_per_group = 500;
  // idx
  std::string images, labels;
  std::string test_images, test_labels;  // optional; train set reused when absent
  std::string manifest_path;             // {owner_id: [class labels]}
  std::map<int, std::vector<int>> manifest;
  int limit = -1;
};

struct TifSpec {
  std::string kind;  // beta | step | tabulated
  double a = 1.0, b = 1.0, gamma = 1.0;
  std::vector<double> levels;
  double step_length = 1.0;
  std::vector<double> samples;

  Tif build() const;
};

struct ModelChoice {
  std::string arch = "logistic";  // logistic | softmax_linear | mlp1
  int num_classes = 2;
  int hidden = 16;

  ModelSpec build(int dim) const;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DatasetSpec dataset;
  std::vector<PrivacyProfile> profiles;
  MechanismVariant variant = MechanismVariant::sample;
  OptimizerKind optimizer = OptimizerKind::idp;
  ModelChoice model;
  std::optional<TifSpec> tif;
  double sigma = 4.0;
  int T = 1000;
  double eta = 0.5;
  double q_uniform = 0.05;  // scale / dpsgd
  double C_uniform = 1.0;   // sample / dpsgd
  std::vector<OwnerMechanism> explicit_mechanism;  // joint
  int eval_interval = 0;    // 0 -> max(1, T / 100)
  std::string order = "loss";  // loss | owner_then_loss

  int effective_eval_interval() const;
  void validate() const;
  nlohmann::json to_canonical_json() const;
  std::string config_hash() const;  // 16 hex digits over the canonical form
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

std::string variant_name(MechanismVariant v);
std::string optimizer_name(OptimizerKind o);

}  // namespace idp
