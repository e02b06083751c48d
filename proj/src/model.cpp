#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"

namespace idp {

namespace {

void check_dim(const Model& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.spec.dim)
    throw DomainError("model: feature dimension mismatch");
  if (model.flat.size() != static_cast<std::size_t>(model.spec.param_count()))
    throw DomainError("model: parameter vector size mismatch");
}

// loss = softplus(z) - y z, stable for large |z|
double logistic_loss(double z, int y) {
  const double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
  return sp - y * z;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// logits -> (loss, probs); probs may be null when only the loss is needed
double softmax_ce(std::span<const double> logits, int label, double* probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = m + std::log(sum);
  if (probs != nullptr) {
    for (std::size_t k = 0; k < logits.size(); ++k) probs[k] = std::exp(logits[k] - lse);
  }
  return lse - logits[label];
}

struct MlpOffsets {
  int w1, b1, w2, b2;
};

MlpOffsets mlp_offsets(const ModelSpec& s) {
  const int w1 = 0;
  const int b1 = s.hidden * s.dim;
  const int w2 = b1 + s.hidden;
  const int b2 = w2 + s.num_classes * s.hidden;
  return {w1, b1, w2, b2};
}

void mlp_forward(const Model& m, std::span<const double> x, std::vector<double>& h,
                 std::vector<double>& logits) {
  const auto& s = m.spec;
  const auto off = mlp_offsets(s);
  h.assign(s.hidden, 0.0);
  for (int j = 0; j < s.hidden; ++j) {
    double z = m.flat[off.b1 + j];
    const double* w = m.flat.data() + off.w1 + static_cast<std::size_t>(j) * s.dim;
    for (int d = 0; d < s.dim; ++d) z += w[d] * x[d];
    h[j] = std::tanh(z);
  }
  logits.assign(s.num_classes, 0.0);
  for (int k = 0; k < s.num_classes; ++k) {
    double z = m.flat[off.b2 + k];
    const double* w = m.flat.data() + off.w2 + static_cast<std::size_t>(k) * s.hidden;
    for (int j = 0; j < s.hidden; ++j) z += w[j] * h[j];
    logits[k] = z;
  }
}

void softmax_linear_logits(const Model& m, std::span<const double> x, std::vector<double>& logits) {
  const auto& s = m.spec;
  logits.assign(s.num_classes, 0.0);
  const int bias_off = s.num_classes * s.dim;
  for (int k = 0; k < s.num_classes; ++k) {
    double z = m.flat[bias_off + k];
    const double* w = m.flat.data() + static_cast<std::size_t>(k) * s.dim;
    for (int d = 0; d < s.dim; ++d) z += w[d] * x[d];
    logits[k] = z;
  }
}

}  // namespace

int ModelSpec::param_count() const {
  switch (arch) {
    case Arch::logistic:
      return dim + 1;
    case Arch::softmax_linear:
      return num_classes * dim + num_classes;
    case Arch::mlp1:
      return hidden * dim + hidden + num_classes * hidden + num_classes;
  }
  return 0;
}

void ModelSpec::validate() const {
  if (dim <= 0) throw DomainError("ModelSpec: dim must be > 0");
  if (arch != Arch::logistic && num_classes < 2)
    throw DomainError("ModelSpec: num_classes must be >= 2");
  if (arch == Arch::mlp1 && hidden <= 0) throw DomainError("ModelSpec: hidden must be > 0");
}

std::string ModelSpec::arch_name() const {
  switch (arch) {
    case Arch::logistic: return "logistic";
    case Arch::softmax_linear: return "softmax_linear";
    case Arch::mlp1: return "mlp1";
  }
  return "?";
}

Model Model::zeros(const ModelSpec& spec) {
  spec.validate();
  return {spec, std::vector<double>(spec.param_count(), 0.0)};
}

Model Model::init(const ModelSpec& spec, Rng& rng) {
  Model m = zeros(spec);
  if (spec.arch == Arch::mlp1) {
    const auto off = mlp_offsets(spec);
    const double s1 = 0.5 / std::sqrt(static_cast<double>(spec.dim));
    for (int i = off.w1; i < off.b1; ++i) m.flat[i] = rng.uniform_in(-s1, s1);
    const double s2 = 0.5 / std::sqrt(static_cast<double>(spec.hidden));
    for (int i = off.w2; i < off.b2; ++i) m.flat[i] = rng.uniform_in(-s2, s2);
  }
  return m;
}

double forward_loss(const Model& model, std::span<const double> x, int label) {
  check_dim(model, x);
  const auto& s = model.spec;
  switch (s.arch) {
    case Arch::logistic: {
      if (label != 0 && label != 1) throw DomainError("logistic: label must be 0 or 1");
      double z = model.flat[s.dim];
      for (int d = 0; d < s.dim; ++d) z += model.flat[d] * x[d];
      return logistic_loss(z, label);
    }
    case Arch::softmax_linear: {
      if (label < 0 || label >= s.num_classes) throw DomainError("softmax: label out of range");
      std::vector<double> logits;
      softmax_linear_logits(model, x, logits);
      return softmax_ce(logits, label, nullptr);
    }
    case Arch::mlp1: {
      if (label < 0 || label >= s.num_classes) throw DomainError("mlp1: label out of range");
      std::vector<double> h, logits;
      mlp_forward(model, x, h, logits);
      return softmax_ce(logits, label, nullptr);
    }
  }
  return 0.0;
}

PerSampleGrad per_sample_loss_and_grad(const Model& model, std::span<const double> x, int label) {
  check_dim(model, x);
  const auto& s = model.spec;
  PerSampleGrad out;
  out.grad.assign(s.param_count(), 0.0);
  switch (s.arch) {
    case Arch::logistic: {
      if (label != 0 && label != 1) throw DomainError("logistic: label must be 0 or 1");
      double z = model.flat[s.dim];
      for (int d = 0; d < s.dim; ++d) z += model.flat[d] * x[d];
      out.loss = logistic_loss(z, label);
      const double dz = sigmoid(z) - label;
      for (int d = 0; d < s.dim; ++d) out.grad[d] = dz * x[d];
      out.grad[s.dim] = dz;
      return out;
    }
    case Arch::softmax_linear: {
      if (label < 0 || label >= s.num_classes) throw DomainError("softmax: label out of range");
      std::vector<double> logits;
      softmax_linear_logits(model, x, logits);
      std::vector<double> p(s.num_classes);
      out.loss = softmax_ce(logits, label, p.data());
      const int bias_off = s.num_classes * s.dim;
      for (int k = 0; k < s.num_classes; ++k) {
        const double dz = p[k] - (k == label ? 1.0 : 0.0);
        double* gw = out.grad.data() + static_cast<std::size_t>(k) * s.dim;
        for (int d = 0; d < s.dim; ++d) gw[d] = dz * x[d];
        out.grad[bias_off + k] = dz;
      }
      return out;
    }
    case Arch::mlp1: {
      if (label < 0 || label >= s.num_classes) throw DomainError("mlp1: label out of range");
      std::vector<double> h, logits;
      mlp_forward(model, x, h, logits);
      std::vector<double> p(s.num_classes);
      out.loss = softmax_ce(logits, label, p.data());
      const auto off = mlp_offsets(s);
      std::vector<double> dh(s.hidden, 0.0);
      for (int k = 0; k < s.num_classes; ++k) {
        const double dz = p[k] - (k == label ? 1.0 : 0.0);
        const double* w2 = model.flat.data() + off.w2 + static_cast<std::size_t>(k) * s.hidden;
        double* gw2 = out.grad.data() + off.w2 + static_cast<std::size_t>(k) * s.hidden;
        for (int j = 0; j < s.hidden; ++j) {
          gw2[j] = dz * h[j];
          dh[j] += dz * w2[j];
        }
        out.grad[off.b2 + k] = dz;
      }
      for (int j = 0; j < s.hidden; ++j) {
        const double da = dh[j] * (1.0 - h[j] * h[j]);
        double* gw1 = out.grad.data() + off.w1 + static_cast<std::size_t>(j) * s.dim;
        for (int d = 0; d < s.dim; ++d) gw1[d] = da * x[d];
        out.grad[off.b1 + j] = da;
      }
      return out;
    }
  }
  return out;
}

int predict(const Model& model, std::span<const double> x) {
  check_dim(model, x);
  const auto& s = model.spec;
  switch (s.arch) {
    case Arch::logistic: {
      double z = model.flat[s.dim];
      for (int d = 0; d < s.dim; ++d) z += model.flat[d] * x[d];
      return z > 0.0 ? 1 : 0;
    }
    case Arch::softmax_linear: {
      std::vector<double> logits;
      softmax_linear_logits(model, x, logits);
      return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
    case Arch::mlp1: {
      std::vector<double> h, logits;
      mlp_forward(model, x, h, logits);
      return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
  }
  return 0;
}

std::vector<double> batch_forward_losses(const Model& model,
                                         const std::vector<std::span<const double>>& rows,
                                         std::span<const int> labels) {
  if (rows.size() != labels.size()) throw DomainError("batch_forward_losses: size mismatch");
  std::vector<double> losses(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) losses[i] = forward_loss(model, rows[i], labels[i]);
  return losses;
}

void save_model(const Model& model, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_model: cannot open " + path);
    out.write(reinterpret_cast<const char*>(model.flat.data()),
              static_cast<std::streamsize>(model.flat.size() * sizeof(double)));
    if (!out) throw IoError("save_model: write failed for " + path);
  }
  nlohmann::json side{{"arch", model.spec.arch_name()},
                      {"dim", model.spec.dim},
                      {"num_classes", model.spec.num_classes},
                      {"hidden", model.spec.hidden},
                      {"param_count", model.spec.param_count()}};
  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw IoError("save_model: cannot open " + path + ".json");
  js << side.dump(2) << "\n";
}

Model load_model(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw IoError("load_model: cannot open sidecar " + path + ".json");
  nlohmann::json side = nlohmann::json::parse(js);
  ModelSpec spec;
  const std::string arch = side.at("arch").get<std::string>();
  if (arch == "logistic") spec.arch = Arch::logistic;
  else if (arch == "softmax_linear") spec.arch = Arch::softmax_linear;
  else if (arch == "mlp1") spec.arch = Arch::mlp1;
  else throw IoError("load_model: unknown arch " + arch);
  spec.dim = side.at("dim").get<int>();
  spec.num_classes = side.at("num_classes").get<int>();
  spec.hidden = side.at("hidden").get<int>();
  spec.validate();
  Model m = Model::zeros(spec);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_model: cannot open " + path);
  in.read(reinterpret_cast<char*>(m.flat.data()),
          static_cast<std::streamsize>(m.flat.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(m.flat.size() * sizeof(double)))
    throw IoError("load_model: checkpoint shorter than declared layout");
  return m;
}

}  // namespace idp
