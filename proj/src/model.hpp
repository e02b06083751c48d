#pragma once

#include <span>
#include <string>
#include <vector>

#include "rng.hpp"

namespace idp {

enum class Arch { logistic, softmax_linear, mlp1 };

// Parameter layout is flat, row-major weights then biases, layer by layer:
//   logistic:        [w(dim), b]
//   softmax_linear:  [W(K x dim), b(K)]
//   mlp1 (tanh):     [W1(H x dim), b1(H), W2(K x H), b2(K)]
struct ModelSpec {
  Arch arch = Arch::logistic;
  int dim = 0;
  int num_classes = 2;   // softmax_linear / mlp1
  int hidden = 0;        // mlp1

  int param_count() const;
  void validate() const;
  std::string arch_name() const;
};

struct Model {
  ModelSpec spec;
  std::vector<double> flat;

  static Model zeros(const ModelSpec& spec);
  // Deterministic init from a substream: zeros for the linear models,
  // scaled uniform weights for the MLP (symmetry breaking).
  static Model init(const ModelSpec& spec, Rng& rng);
};

struct PerSampleGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Cross-entropy loss and its exact gradient in the flat layout; the loss is
// the same value the forward pass produces, bit for bit.
PerSampleGrad per_sample_loss_and_grad(const Model& model, std::span<const double> x, int label);

double forward_loss(const Model& model, std::span<const double> x, int label);

// predicted class (argmax of class scores; logistic thresholds at 0)
int predict(const Model& model, std::span<const double> x);

std::vector<double> batch_forward_losses(const Model& model, const std::vector<std::span<const double>>& rows,
                                         std::span<const int> labels);

// Checkpoints: raw little-endian f64 array plus a JSON sidecar at
// path + ".json" with {arch, dims}.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace idp
