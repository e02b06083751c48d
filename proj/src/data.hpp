#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "accounting.hpp"
#include "rng.hpp"

namespace idp {

struct LabeledDataset {
  int dim = 0;
  std::vector<double> features;  // row-major, size() == dim * labels.size()
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  std::span<const double> row(int i) const {
    return {features.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  void validate() const;
};

struct OwnerPartition {
  std::vector<int> owner_of;  // datum index -> owner id
  std::vector<int> group_of;  // datum index -> group label (metrics)

  std::vector<int> owner_ids() const;          // sorted, distinct
  std::map<int, int> owner_counts() const;     // owner id -> |D_n|
  void validate(int dataset_size) const;
};

struct SampledBatch {
  std::vector<int> indices;  // dataset order, each index at most once
};

// Owner-aware mechanism parameters resolved against a concrete partition.
struct BoundMechanism {
  std::map<int, OwnerMechanism> by_owner;
  double sigma = 0.0;
  int T = 0;
  double eta = 0.0;
  double b = 0.0;  // expected batch size sum_n q_n |D_n|

  const OwnerMechanism& of(int owner_id) const;
};

BoundMechanism bind_mechanism(const MechanismParams& params, const OwnerPartition& partition);

// Each datum enters independently with its owner's rate; indices keep
// dataset order (the downstream tie-break order).
SampledBatch poisson_sample(const OwnerPartition& partition, const BoundMechanism& bound,
                            Rng& rng);

// Union of script_T Poisson batches; multiplicity is represented by index
// repetition. The uniform rate on the extension is 1/script_T.
struct UpeDataset {
  std::vector<int> indices;
  double q_hat = 0.0;
};

UpeDataset build_upe_dataset(const OwnerPartition& partition, const BoundMechanism& bound,
                             int script_T, Rng& rng);

// Two Gaussian blobs at +-separation/2 along the first axis, unit isotropic
// covariance, balanced classes, group = class = owner. Samples interleave the
// two classes so dataset order carries no block structure.
struct SyntheticData {
  LabeledDataset data;
  OwnerPartition partition;
};

SyntheticData gen_two_group_synthetic(int n_per_group, int dimension, double separation,
                                      Rng& rng);

// IDX binary format (big-endian magic 0x00000803 images / 0x00000801 labels).
// Pixels map to [0, 1]; at most `limit` records (limit < 0 means all).
LabeledDataset load_idx_images(const std::string& images_path, const std::string& labels_path,
                               int limit);

void write_idx_images(const std::string& path, std::span<const std::uint8_t> pixels, int count,
                      int rows, int cols);
void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels);

// Owner assignment manifest {owner_id: [class labels]}; every label present
// in the dataset must be claimed by exactly one owner. Group = owner.
OwnerPartition partition_by_class(const LabeledDataset& data,
                                  const std::map<int, std::vector<int>>& manifest);

}  // namespace idp
