#pragma once

// Synthetic MNIST-format data for the desk-scale harness: 28x28 grayscale
// images in IDX files, ten classes built from seeded sparse prototypes plus
// pixel noise. Learnable by a linear model but far from trivially, which is
// what the direction-check experiments need.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "rng.hpp"

namespace idp_test {

struct SynthMnistFiles {
  std::string train_images, train_labels, test_images, test_labels;
};

inline void write_synth_mnist(const SynthMnistFiles& paths, int n_train, int n_test,
                              std::uint64_t seed, double twin_divergence = 0.35) {
  constexpr int kSide = 28;
  constexpr int kPixels = kSide * kSide;
  constexpr int kClasses = 10;

  // Classes share a common stroke pattern, and class k+5 reuses most of
  // class k's distinguishing pixels: twin classes across the 0-4 / 5-9
  // owner split keep the cross-owner gradients in conflict for the whole
  // run instead of letting the majority owner converge and fall silent.
  idp::Rng proto_rng = idp::Rng::substream(seed, "mnist-protos");
  std::vector<double> base(kPixels, 0.0);
  for (double& v : base) {
    if (proto_rng.uniform() < 0.30) v = 0.5;
  }
  std::vector<double> protos(kClasses * kPixels);
  for (int k = 0; k < 5; ++k) {
    for (int p = 0; p < kPixels; ++p) {
      double delta = 0.0;
      if (proto_rng.uniform() < 0.14) delta = (proto_rng.uniform() < 0.5 ? 0.45 : -0.45);
      protos[k * kPixels + p] = base[p] + delta;
      // twin keeps the delta on most pixels, diverges on the rest
      double twin_delta = delta;
      if (proto_rng.uniform() < twin_divergence) {
        twin_delta = proto_rng.uniform() < 0.14 ? (proto_rng.uniform() < 0.5 ? 0.45 : -0.45) : 0.0;
      }
      protos[(k + 5) * kPixels + p] = base[p] + twin_delta;
    }
  }

  const auto emit = [&](const std::string& img_path, const std::string& lab_path, int n,
                        const char* tag) {
    idp::Rng rng = idp::Rng::substream(seed, tag);
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(n) * kPixels);
    std::vector<std::uint8_t> labels(n);
    for (int i = 0; i < n; ++i) {
      const int k = i % kClasses;  // balanced classes
      labels[i] = static_cast<std::uint8_t>(k);
      for (int p = 0; p < kPixels; ++p) {
        double v = protos[k * kPixels + p] + 0.42 * rng.normal();
        v = std::clamp(v, 0.0, 1.0);
        pixels[static_cast<std::size_t>(i) * kPixels + p] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
    idp::write_idx_images(img_path, pixels, n, kSide, kSide);
    idp::write_idx_labels(lab_path, labels);
  };
  emit(paths.train_images, paths.train_labels, n_train, "mnist-train");
  emit(paths.test_images, paths.test_labels, n_test, "mnist-test");
}

}  // namespace idp_test
