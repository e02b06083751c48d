#include "config.hpp"

#include <fstream>
#include <set>

#include "errors.hpp"

namespace idp {

namespace {

DatasetKind dataset_kind_of(const std::string& s) {
  if (s == "two_group_synthetic") return DatasetKind::two_group_synthetic;
  if (s == "idx") return DatasetKind::idx;
  throw ConfigError("config: unknown dataset kind '" + s + "'");
}

MechanismVariant variant_of(const std::string& s) {
  if (s == "dpsgd") return MechanismVariant::dpsgd;
  if (s == "sample") return MechanismVariant::sample;
  if (s == "scale") return MechanismVariant::scale;
  if (s == "joint") return MechanismVariant::joint;
  throw ConfigError("config: unknown mechanism variant '" + s + "'");
}

OptimizerKind optimizer_of(const std::string& s) {
  if (s == "idp") return OptimizerKind::idp;
  if (s == "ino") return OptimizerKind::ino;
  throw ConfigError("config: unknown optimizer '" + s + "'");
}

std::map<int, std::vector<int>> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open owner manifest " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: manifest parse error: ") + e.what());
  }
  std::map<int, std::vector<int>> manifest;
  for (const auto& [key, val] : j.items()) {
    manifest[std::stoi(key)] = val.get<std::vector<int>>();
  }
  return manifest;
}

}  // namespace

std::string variant_name(MechanismVariant v) {
  switch (v) {
    case MechanismVariant::dpsgd: return "dpsgd";
    case MechanismVariant::sample: return "sample";
    case MechanismVariant::scale: return "scale";
    case MechanismVariant::joint: return "joint";
  }
  return "?";
}

std::string optimizer_name(OptimizerKind o) {
  return o == OptimizerKind::idp ? "idp" : "ino";
}

Tif TifSpec::build() const {
  if (kind == "beta") return Tif::beta(a, b, gamma);
  if (kind == "step") return Tif::step(levels, step_length);
  if (kind == "tabulated") return Tif::tabulated(samples, gamma);
  throw ConfigError("config: unknown tif kind '" + kind + "'");
}

ModelSpec ModelChoice::build(int dim) const {
  ModelSpec spec;
  spec.dim = dim;
  spec.num_classes = num_classes;
  spec.hidden = hidden;
  if (arch == "logistic") spec.arch = Arch::logistic;
  else if (arch == "softmax_linear") spec.arch = Arch::softmax_linear;
  else if (arch == "mlp1") spec.arch = Arch::mlp1;
  else throw ConfigError("config: unknown model arch '" + arch + "'");
  spec.validate();
  return spec;
}

int ExperimentConfig::effective_eval_interval() const {
  if (eval_interval > 0) return eval_interval;
  return std::max(1, T / 100);
}

void ExperimentConfig::validate() const {
  if (profiles.empty()) throw ConfigError("config: at least one privacy profile required");
  std::set<int> owners;
  for (const auto& p : profiles) {
    p.validate();
    if (!owners.insert(p.owner_id).second)
      throw ConfigError("config: duplicate profile for owner " + std::to_string(p.owner_id));
  }
  if (optimizer == OptimizerKind::ino && !tif.has_value())
    throw ConfigError("config: optimizer 'ino' requires a tif");
  if (tif.has_value()) tif->build();  // surfaces bad tif parameters early
  if (model.arch != "logistic" && model.arch != "softmax_linear" && model.arch != "mlp1")
    throw ConfigError("config: unknown model arch '" + model.arch + "'");
  if (!(sigma > 0.0)) throw ConfigError("config: sigma must be > 0");
  if (T < 0) throw ConfigError("config: T must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("config: eta must be > 0");
  if (order != "loss" && order != "owner_then_loss")
    throw ConfigError("config: order must be 'loss' or 'owner_then_loss'");
  if (variant == MechanismVariant::joint) {
    if (explicit_mechanism.empty())
      throw ConfigError("config: joint variant requires mechanism.per_owner");
    std::set<int> mech_owners;
    for (const auto& m : explicit_mechanism) {
      if (!(m.q >= 0.0 && m.q <= 1.0) || !(m.C > 0.0))
        throw ConfigError("config: per_owner entries need q in [0,1] and C > 0");
      mech_owners.insert(m.owner_id);
    }
    if (mech_owners != owners)
      throw ConfigError("config: mechanism.per_owner owners must match profiles");
  } else {
    if (!(q_uniform >= 0.0 && q_uniform <= 1.0)) throw ConfigError("config: q must be in [0, 1]");
    if (!(C_uniform > 0.0)) throw ConfigError("config: C must be > 0");
  }
  if (dataset.kind == DatasetKind::two_group_synthetic) {
    if (dataset.n_per_group < 1) throw ConfigError("config: n_per_group must be >= 1");
    if (dataset.n_eval_per_group < 1) throw ConfigError("config: n_eval_per_group must be >= 1");
    if (owners != std::set<int>{0, 1})
      throw ConfigError("config: two_group_synthetic expects owners {0, 1}");
  } else {
    if (dataset.images.empty() || dataset.labels.empty())
      throw ConfigError("config: idx dataset needs images and labels paths");
    if (dataset.manifest.empty()) throw ConfigError("config: idx dataset needs an owner manifest");
    std::set<int> manifest_owners;
    for (const auto& [o, _] : dataset.manifest) manifest_owners.insert(o);
    if (manifest_owners != owners)
      throw ConfigError("config: manifest owners must match profiles");
  }
}

nlohmann::json ExperimentConfig::to_canonical_json() const {
  nlohmann::json d;
  d["kind"] = dataset.kind == DatasetKind::idx ? "idx" : "two_group_synthetic";
  if (dataset.kind == DatasetKind::two_group_synthetic) {
    d["n_per_group"] = dataset.n_per_group;
    d["dimension"] = dataset.dimension;
    d["separation"] = dataset.separation;
    d["n_eval_per_group"] = dataset.n_eval_per_group;
  } else {
    d["images"] = dataset.images;
    d["labels"] = dataset.labels;
    d["test_images"] = dataset.test_images;
    d["test_labels"] = dataset.test_labels;
    d["limit"] = dataset.limit;
    nlohmann::json man;
    for (const auto& [o, classes] : dataset.manifest) man[std::to_string(o)] = classes;
    d["manifest"] = man;
  }
  nlohmann::json profs = nlohmann::json::array();
  for (const auto& p : profiles) {
    profs.push_back({{"owner_id", p.owner_id}, {"epsilon", p.epsilon}, {"delta", p.delta}});
  }
  nlohmann::json mech{{"variant", variant_name(variant)}, {"sigma", sigma}, {"T", T},
                      {"eta", eta}};
  if (variant == MechanismVariant::joint) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : explicit_mechanism)
      per.push_back({{"owner_id", m.owner_id}, {"q", m.q}, {"C", m.C}});
    mech["per_owner"] = per;
  } else {
    mech["q"] = q_uniform;
    mech["C"] = C_uniform;
  }
  nlohmann::json mj{{"arch", model.arch}};
  if (model.arch != "logistic") mj["num_classes"] = model.num_classes;
  if (model.arch == "mlp1") mj["hidden"] = model.hidden;
  nlohmann::json j{{"seed", seed},
                   {"dataset", d},
                   {"profiles", profs},
                   {"mechanism", mech},
                   {"model", mj},
                   {"optimizer", optimizer_name(optimizer)},
                   {"order", order},
                   {"eval_interval", effective_eval_interval()}};
  if (tif.has_value()) {
    nlohmann::json tj{{"kind", tif->kind}};
    if (tif->kind == "beta") {
      tj["a"] = tif->a;
      tj["b"] = tif->b;
      tj["gamma"] = tif->gamma;
    } else if (tif->kind == "step") {
      tj["levels"] = tif->levels;
      tj["step_length"] = tif->step_length;
    } else {
      tj["samples"] = tif->samples;
      tj["gamma"] = tif->gamma;
    }
    j["tif"] = tj;
  }
  return j;
}

std::string ExperimentConfig::config_hash() const {
  const std::string canon = to_canonical_json().dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(1));
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      cfg.dataset.kind = dataset_kind_of(d.value("kind", std::string("two_group_synthetic")));
      if (cfg.dataset.kind == DatasetKind::two_group_synthetic) {
        cfg.dataset.n_per_group = d.value("n_per_group", 1000);
        cfg.dataset.dimension = d.value("dimension", 2);
        cfg.dataset.separation = d.value("separation", 3.0);
        cfg.dataset.n_eval_per_group = d.value("n_eval_per_group", 500);
      } else {
        cfg.dataset.images = d.at("images").get<std::string>();
        cfg.dataset.labels = d.at("labels").get<std::string>();
        cfg.dataset.test_images = d.value("test_images", std::string());
        cfg.dataset.test_labels = d.value("test_labels", std::string());
        cfg.dataset.limit = d.value("limit", -1);
        if (d.contains("manifest") && d.at("manifest").is_object()) {
          for (const auto& [key, val] : d.at("manifest").items())
            cfg.dataset.manifest[std::stoi(key)] = val.get<std::vector<int>>();
        } else if (d.contains("manifest")) {
          cfg.dataset.manifest_path = d.at("manifest").get<std::string>();
          cfg.dataset.manifest = load_manifest(cfg.dataset.manifest_path);
        }
      }
    }
    for (const auto& p : j.value("profiles", nlohmann::json::array())) {
      PrivacyProfile prof;
      prof.owner_id = p.at("owner_id").get<int>();
      prof.epsilon = p.at("epsilon").get<double>();
      prof.delta = p.at("delta").get<double>();
      cfg.profiles.push_back(prof);
    }
    if (j.contains("mechanism")) {
      const auto& m = j.at("mechanism");
      cfg.variant = variant_of(m.value("variant", std::string("sample")));
      cfg.sigma = m.value("sigma", 4.0);
      cfg.T = m.value("T", 1000);
      cfg.eta = m.value("eta", 0.5);
      cfg.q_uniform = m.value("q", 0.05);
      cfg.C_uniform = m.value("C", 1.0);
      for (const auto& pm : m.value("per_owner", nlohmann::json::array())) {
        OwnerMechanism om;
        om.owner_id = pm.at("owner_id").get<int>();
        om.q = pm.at("q").get<double>();
        om.C = pm.at("C").get<double>();
        cfg.explicit_mechanism.push_back(om);
      }
    }
    cfg.optimizer = optimizer_of(j.value("optimizer", std::string("idp")));
    cfg.order = j.value("order", std::string("loss"));
    cfg.eval_interval = j.value("eval_interval", 0);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      cfg.model.arch = m.value("arch", std::string("logistic"));
      cfg.model.num_classes = m.value("num_classes", 2);
      cfg.model.hidden = m.value("hidden", 16);
    } else if (cfg.dataset.kind == DatasetKind::idx) {
      cfg.model.arch = "softmax_linear";
      cfg.model.num_classes = 10;
    }
    if (j.contains("tif")) {
      const auto& t = j.at("tif");
      TifSpec spec;
      spec.kind = t.at("kind").get<std::string>();
      if (spec.kind == "beta") {
        spec.a = t.at("a").get<double>();
        spec.b = t.at("b").get<double>();
        spec.gamma = t.at("gamma").get<double>();
      } else if (spec.kind == "step") {
        spec.levels = t.at("levels").get<std::vector<double>>();
        spec.step_length = t.at("step_length").get<double>();
      } else if (spec.kind == "tabulated") {
        spec.samples = t.at("samples").get<std::vector<double>>();
        spec.gamma = t.at("gamma").get<double>();
      } else {
        throw ConfigError("config: unknown tif kind '" + spec.kind + "'");
      }
      cfg.tif = spec;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: parse error in ") + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace idp
