#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "errors.hpp"

namespace idp {

void LabeledDataset::validate() const {
  if (dim <= 0) throw DomainError("LabeledDataset: dim must be > 0");
  if (features.size() != static_cast<std::size_t>(dim) * labels.size())
    throw DomainError("LabeledDataset: features/labels size mismatch");
}

std::vector<int> OwnerPartition::owner_ids() const {
  std::set<int> ids(owner_of.begin(), owner_of.end());
  return {ids.begin(), ids.end()};
}

std::map<int, int> OwnerPartition::owner_counts() const {
  std::map<int, int> counts;
  for (int o : owner_of) counts[o]++;
  return counts;
}

void OwnerPartition::validate(int dataset_size) const {
  if (owner_of.size() != static_cast<std::size_t>(dataset_size))
    throw ConfigError("OwnerPartition: owner_of size does not match dataset");
  if (group_of.size() != static_cast<std::size_t>(dataset_size))
    throw ConfigError("OwnerPartition: group_of size does not match dataset");
}

const OwnerMechanism& BoundMechanism::of(int owner_id) const {
  auto it = by_owner.find(owner_id);
  if (it == by_owner.end())
    throw ConfigError("BoundMechanism: unknown owner " + std::to_string(owner_id));
  return it->second;
}

BoundMechanism bind_mechanism(const MechanismParams& params, const OwnerPartition& partition) {
  params.validate();
  BoundMechanism bound;
  bound.sigma = params.sigma;
  bound.T = params.T;
  bound.eta = params.eta;
  for (const auto& m : params.per_owner) {
    if (!bound.by_owner.emplace(m.owner_id, m).second)
      throw ConfigError("bind_mechanism: duplicate owner " + std::to_string(m.owner_id));
  }
  double b = 0.0;
  for (const auto& [owner, count] : partition.owner_counts()) {
    auto it = bound.by_owner.find(owner);
    if (it == bound.by_owner.end())
      throw ConfigError("bind_mechanism: partition owner " + std::to_string(owner) +
                        " has no mechanism entry");
    b += it->second.q * count;
  }
  if (params.expected_batch_size > 0.0 &&
      std::fabs(params.expected_batch_size - b) > 1e-6 * std::max(1.0, b)) {
    throw ConfigError("bind_mechanism: expected_batch_size inconsistent with partition");
  }
  bound.b = b;
  return bound;
}

SampledBatch poisson_sample(const OwnerPartition& partition, const BoundMechanism& bound,
                            Rng& rng) {
  SampledBatch batch;
  for (std::size_t i = 0; i < partition.owner_of.size(); ++i) {
    const double q = bound.of(partition.owner_of[i]).q;
    if (rng.uniform() < q) batch.indices.push_back(static_cast<int>(i));
  }
  return batch;
}

UpeDataset build_upe_dataset(const OwnerPartition& partition, const BoundMechanism& bound,
                             int script_T, Rng& rng) {
  if (script_T < 1) throw DomainError("build_upe_dataset: script_T must be >= 1");
  UpeDataset upe;
  upe.q_hat = 1.0 / static_cast<double>(script_T);
  for (int tau = 0; tau < script_T; ++tau) {
    const SampledBatch batch = poisson_sample(partition, bound, rng);
    upe.indices.insert(upe.indices.end(), batch.indices.begin(), batch.indices.end());
  }
  return upe;
}

SyntheticData gen_two_group_synthetic(int n_per_group, int dimension, double separation,
                                      Rng& rng) {
  if (n_per_group < 1) throw DomainError("gen_two_group_synthetic: n_per_group must be >= 1");
  if (dimension < 1) throw DomainError("gen_two_group_synthetic: dimension must be >= 1");
  SyntheticData out;
  out.data.dim = dimension;
  const int total = 2 * n_per_group;
  out.data.features.reserve(static_cast<std::size_t>(total) * dimension);
  out.data.labels.reserve(total);
  out.partition.owner_of.reserve(total);
  out.partition.group_of.reserve(total);
  for (int i = 0; i < total; ++i) {
    const int label = i % 2;
    const double mean0 = (label == 0 ? -0.5 : 0.5) * separation;
    for (int d = 0; d < dimension; ++d) {
      out.data.features.push_back((d == 0 ? mean0 : 0.0) + rng.normal());
    }
    out.data.labels.push_back(label);
    out.partition.owner_of.push_back(label);
    out.partition.group_of.push_back(label);
  }
  return out;
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const char* path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in)
    throw IoError(std::string("idx: malformed header (truncated) in ") + path);
  return (static_cast<std::uint32_t>(buf[0]) << 24) | (static_cast<std::uint32_t>(buf[1]) << 16) |
         (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

LabeledDataset load_idx_images(const std::string& images_path, const std::string& labels_path,
                               int limit) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("idx: cannot open images file " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("idx: cannot open labels file " + labels_path);

  const std::uint32_t img_magic = read_be_u32(img, images_path.c_str());
  if (img_magic != 0x00000803u)
    throw IoError("idx: bad magic number in images file " + images_path);
  const std::uint32_t n_img = read_be_u32(img, images_path.c_str());
  const std::uint32_t rows = read_be_u32(img, images_path.c_str());
  const std::uint32_t cols = read_be_u32(img, images_path.c_str());

  const std::uint32_t lab_magic = read_be_u32(lab, labels_path.c_str());
  if (lab_magic != 0x00000801u)
    throw IoError("idx: bad magic number in labels file " + labels_path);
  const std::uint32_t n_lab = read_be_u32(lab, labels_path.c_str());

  if (n_img != n_lab)
    throw IoError("idx: image/label count mismatch (" + std::to_string(n_img) + " vs " +
                  std::to_string(n_lab) + ")");

  std::uint32_t n = n_img;
  if (limit >= 0) n = std::min<std::uint32_t>(n, static_cast<std::uint32_t>(limit));

  LabeledDataset data;
  data.dim = static_cast<int>(rows * cols);
  if (data.dim <= 0) throw IoError("idx: malformed header (zero image dimensions)");
  data.features.resize(static_cast<std::size_t>(n) * data.dim);
  data.labels.resize(n);

  std::vector<unsigned char> buf(static_cast<std::size_t>(data.dim));
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), data.dim);
    if (!img) throw IoError("idx: truncated image payload in " + images_path);
    for (int p = 0; p < data.dim; ++p)
      data.features[static_cast<std::size_t>(i) * data.dim + p] = buf[p] / 255.0;
    unsigned char y = 0;
    lab.read(reinterpret_cast<char*>(&y), 1);
    if (!lab) throw IoError("idx: truncated label payload in " + labels_path);
    if (y > 9) throw IoError("idx: label out of range 0-9 in " + labels_path);
    data.labels[i] = y;
  }
  return data;
}

void write_idx_images(const std::string& path, std::span<const std::uint8_t> pixels, int count,
                      int rows, int cols) {
  if (pixels.size() != static_cast<std::size_t>(count) * rows * cols)
    throw DomainError("write_idx_images: pixel buffer size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("idx: cannot open for write " + path);
  write_be_u32(out, 0x00000803u);
  write_be_u32(out, static_cast<std::uint32_t>(count));
  write_be_u32(out, static_cast<std::uint32_t>(rows));
  write_be_u32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("idx: write failed for " + path);
}

void write_idx_labels(const std::string& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("idx: cannot open for write " + path);
  write_be_u32(out, 0x00000801u);
  write_be_u32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw IoError("idx: write failed for " + path);
}

OwnerPartition partition_by_class(const LabeledDataset& data,
                                  const std::map<int, std::vector<int>>& manifest) {
  std::map<int, int> owner_of_class;
  for (const auto& [owner, classes] : manifest) {
    for (int c : classes) {
      if (!owner_of_class.emplace(c, owner).second)
        throw ConfigError("manifest: class " + std::to_string(c) + " claimed by two owners");
    }
  }
  OwnerPartition part;
  part.owner_of.reserve(data.labels.size());
  for (int y : data.labels) {
    auto it = owner_of_class.find(y);
    if (it == owner_of_class.end())
      throw ConfigError("manifest: class " + std::to_string(y) + " has no owner");
    part.owner_of.push_back(it->second);
  }
  part.group_of = part.owner_of;
  return part;
}

}  // namespace idp
