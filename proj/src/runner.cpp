#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "audit.hpp"
#include "errors.hpp"
#include "optimizer.hpp"
#include "special.hpp"

namespace idp {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::map<int, int> privacy_rank_of(const std::vector<PrivacyProfile>& profiles) {
  // rank 0 = most private (smallest epsilon); ties by owner id
  std::vector<const PrivacyProfile*> sorted;
  for (const auto& p : profiles) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const PrivacyProfile* a, const PrivacyProfile* b) {
    if (a->epsilon != b->epsilon) return a->epsilon < b->epsilon;
    return a->owner_id < b->owner_id;
  });
  std::map<int, int> rank;
  for (std::size_t i = 0; i < sorted.size(); ++i) rank[sorted[i]->owner_id] = static_cast<int>(i);
  return rank;
}

// raw (unclipped) gradient sums per owner over the full training set; feeds
// the MID-condition monitor
std::map<int, std::vector<double>> owner_gradient_sums(const Model& model,
                                                       const LabeledDataset& data,
                                                       const OwnerPartition& part) {
  std::map<int, std::vector<double>> sums;
  const int r = model.spec.param_count();
  for (int o : part.owner_ids()) sums[o] = std::vector<double>(r, 0.0);
  for (int i = 0; i < data.size(); ++i) {
    const PerSampleGrad g = per_sample_loss_and_grad(model, data.row(i), data.labels[i]);
    auto& acc = sums[part.owner_of[i]];
    for (int j = 0; j < r; ++j) acc[j] += g.grad[j];
  }
  return sums;
}

Tif tif_from_options(const nlohmann::json& options, const char* key = "tif") {
  const auto& t = options.at(key);
  TifSpec spec;
  spec.kind = t.at("kind").get<std::string>();
  if (spec.kind == "beta") {
    spec.a = t.at("a").get<double>();
    spec.b = t.at("b").get<double>();
    spec.gamma = t.at("gamma").get<double>();
  } else if (spec.kind == "step") {
    spec.levels = t.at("levels").get<std::vector<double>>();
    spec.step_length = t.at("step_length").get<double>();
  } else {
    spec.samples = t.at("samples").get<std::vector<double>>();
    spec.gamma = t.at("gamma").get<double>();
  }
  return spec.build();
}

}  // namespace

TrainData materialize_dataset(const ExperimentConfig& cfg) {
  TrainData td;
  if (cfg.dataset.kind == DatasetKind::two_group_synthetic) {
    Rng train_rng = Rng::substream(cfg.seed, "data-train");
    SyntheticData train = gen_two_group_synthetic(cfg.dataset.n_per_group, cfg.dataset.dimension,
                                                  cfg.dataset.separation, train_rng);
    Rng eval_rng = Rng::substream(cfg.seed, "data-eval");
    SyntheticData eval = gen_two_group_synthetic(cfg.dataset.n_eval_per_group,
                                                 cfg.dataset.dimension, cfg.dataset.separation,
                                                 eval_rng);
    td.train = std::move(train.data);
    td.train_partition = std::move(train.partition);
    td.eval = std::move(eval.data);
    td.eval_partition = std::move(eval.partition);
  } else {
    td.train = load_idx_images(cfg.dataset.images, cfg.dataset.labels, cfg.dataset.limit);
    td.train_partition = partition_by_class(td.train, cfg.dataset.manifest);
    if (!cfg.dataset.test_images.empty()) {
      td.eval = load_idx_images(cfg.dataset.test_images, cfg.dataset.test_labels, -1);
    } else {
      td.eval = td.train;
    }
    td.eval_partition = partition_by_class(td.eval, cfg.dataset.manifest);
  }
  td.train.validate();
  td.eval.validate();
  td.train_partition.validate(td.train.size());
  td.eval_partition.validate(td.eval.size());
  return td;
}

std::vector<OwnerLedger> resolve_mechanism(const ExperimentConfig& cfg) {
  std::vector<OwnerLedger> ledger;
  for (const auto& p : cfg.profiles) {
    OwnerLedger l;
    l.owner_id = p.owner_id;
    l.epsilon = p.epsilon;
    l.delta = p.delta;
    switch (cfg.variant) {
      case MechanismVariant::dpsgd:
        l.q = cfg.q_uniform;
        l.C = cfg.C_uniform;
        break;
      case MechanismVariant::sample:
        l.C = cfg.C_uniform;
        l.q = calibrate_sampling_rate(p.epsilon, p.delta, l.C, cfg.sigma, cfg.T);
        break;
      case MechanismVariant::scale:
        l.q = cfg.q_uniform;
        l.C = calibrate_clipping_threshold(p.epsilon, p.delta, l.q, cfg.sigma, cfg.T);
        break;
      case MechanismVariant::joint: {
        const auto it = std::find_if(cfg.explicit_mechanism.begin(), cfg.explicit_mechanism.end(),
                                     [&](const OwnerMechanism& m) { return m.owner_id == p.owner_id; });
        if (it == cfg.explicit_mechanism.end())
          throw ConfigError("runner: joint variant missing owner " + std::to_string(p.owner_id));
        l.q = it->q;
        l.C = it->C;
        break;
      }
    }
    const DpPoint pt = sgm_epsilon(l.q, l.C, cfg.sigma, cfg.T, p.delta);
    l.achieved_epsilon = pt.epsilon;
    l.alpha_star = pt.alpha;
    l.eps_bar_step = sgm_rdp_step_tight(l.q, l.C, cfg.sigma, pt.alpha);
    l.eps_bar_total = compose_rdp(l.eps_bar_step, cfg.T);
    ledger.push_back(l);
  }
  return ledger;
}

TrainingTrace run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  const TrainData td = materialize_dataset(cfg);
  const std::vector<OwnerLedger> ledger = resolve_mechanism(cfg);

  MechanismParams params;
  params.sigma = cfg.sigma;
  params.T = cfg.T;
  params.eta = cfg.eta;
  for (const auto& l : ledger) params.per_owner.push_back({l.owner_id, l.q, l.C});
  const BoundMechanism bound = bind_mechanism(params, td.train_partition);

  const ModelSpec model_spec = cfg.model.build(td.train.dim);
  Rng init_rng = Rng::substream(cfg.seed, "init");
  Model model = Model::init(model_spec, init_rng);

  const SortOrder order =
      cfg.order == "loss" ? SortOrder::loss : SortOrder::owner_then_loss;
  const std::map<int, int> privacy_rank = privacy_rank_of(cfg.profiles);

  std::optional<Tif> tif;
  std::optional<FastTable> table;
  if (cfg.optimizer == OptimizerKind::ino) {
    tif = cfg.tif->build();
    // cover the worst realizable batch (every datum sampled) so coverage can
    // never fail mid-run; only the tail is tabulated, so kappa is free
    double full_mass = 0.0;
    for (const auto& [owner, count] : td.train_partition.owner_counts())
      full_mass += bound.of(owner).C * count;
    const double kappa = std::max(full_mass, tif->gamma()) + 1.0;
    table.emplace(*tif, kappa, FastTable::default_resolution(*tif));
  }

  TrainingTrace trace;
  trace.config_hash = cfg.config_hash();
  trace.group_ids = td.train_partition.owner_ids();
  for (const auto& l : ledger) trace.owner_ids.push_back(l.owner_id);

  // MID monitor pair: most private as owner 1, least private as owner 2
  int mid_owner_1 = -1, mid_owner_2 = -1;
  if (ledger.size() >= 2) {
    const auto most = std::min_element(ledger.begin(), ledger.end(),
                                       [](const OwnerLedger& a, const OwnerLedger& b) {
                                         return a.epsilon < b.epsilon;
                                       });
    const auto least = std::max_element(ledger.begin(), ledger.end(),
                                        [](const OwnerLedger& a, const OwnerLedger& b) {
                                          return a.epsilon < b.epsilon;
                                        });
    mid_owner_1 = most->owner_id;
    mid_owner_2 = least->owner_id;
  }
  const auto owner_counts = td.train_partition.owner_counts();

  const auto emit_row = [&](long iter) {
    const EvalMetrics m = evaluate_model(model, td.eval, td.eval_partition, trace.group_ids);
    TraceRow row;
    row.iter = iter;
    row.optimizer = optimizer_name(cfg.optimizer);
    row.overall_loss = m.overall_loss;
    row.overall_acc = m.overall_acc;
    row.group_loss = m.group_loss;
    row.group_recall = m.group_recall;
    row.mid_lhs = kNan;
    if (mid_owner_1 >= 0 && mid_owner_1 != mid_owner_2) {
      const auto sums = owner_gradient_sums(model, td.train, td.train_partition);
      const auto& m1 = bound.of(mid_owner_1);
      const auto& m2 = bound.of(mid_owner_2);
      const MidMonitorSample s = mid_condition_lhs(
          sums.at(mid_owner_1), sums.at(mid_owner_2), m1.q, owner_counts.at(mid_owner_1), m1.C,
          m2.q, owner_counts.at(mid_owner_2), m2.C);
      if (s.defined) row.mid_lhs = s.lhs;
    }
    for (const auto& l : ledger) row.eps_bar_spent.push_back(l.eps_bar_step * iter);
    trace.rows.push_back(std::move(row));
  };

  const int interval = cfg.effective_eval_interval();
  emit_row(0);
  for (int t = 1; t <= cfg.T; ++t) {
    Rng sample_rng = Rng::substream(cfg.seed, "sample", static_cast<std::uint64_t>(t));
    const SampledBatch batch = poisson_sample(td.train_partition, bound, sample_rng);
    const GradientBatch grads = compute_gradient_batch(model, td.train, batch,
                                                       td.train_partition, bound, order,
                                                       privacy_rank);
    Rng noise_rng = Rng::substream(cfg.seed, "noise", static_cast<std::uint64_t>(t));
    NoisyUpdate update =
        cfg.optimizer == OptimizerKind::ino
            ? ino_sgd_step(model, grads, bound, *tif, *table, noise_rng)
            : idp_sgd_step(model, grads, bound, noise_rng);
    model.flat = std::move(update.new_theta);
    if (t % interval == 0) emit_row(t);
  }
  return trace;
}

nlohmann::json run_calibrate(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.variant != MechanismVariant::sample && cfg.variant != MechanismVariant::scale)
    throw ConfigError("calibrate: variant must be 'sample' or 'scale'");
  nlohmann::json owners = nlohmann::json::array();
  bool any_infeasible = false;
  for (const auto& p : cfg.profiles) {
    nlohmann::json rec{{"owner_id", p.owner_id}, {"epsilon", p.epsilon}, {"delta", p.delta}};
    try {
      double q, C;
      if (cfg.variant == MechanismVariant::sample) {
        C = cfg.C_uniform;
        q = calibrate_sampling_rate(p.epsilon, p.delta, C, cfg.sigma, cfg.T);
      } else {
        q = cfg.q_uniform;
        C = calibrate_clipping_threshold(p.epsilon, p.delta, q, cfg.sigma, cfg.T);
      }
      const DpPoint pt = sgm_epsilon(q, C, cfg.sigma, cfg.T, p.delta);
      rec["q"] = q;
      rec["C"] = C;
      rec["achieved_epsilon"] = pt.epsilon;
      rec["alpha_star"] = pt.alpha;
    } catch (const InfeasibleError& e) {
      rec["error"] = e.what();
      any_infeasible = true;
    }
    owners.push_back(rec);
  }
  return nlohmann::json{{"variant", variant_name(cfg.variant)},
                        {"sigma", cfg.sigma},
                        {"T", cfg.T},
                        {"owners", owners},
                        {"infeasible", any_infeasible}};
}

std::string run_train_to_file(const ExperimentConfig& cfg, const std::string& out_path) {
  const TrainingTrace trace = run_training(cfg);
  write_trace_csv(trace, out_path);
  return out_path;
}

nlohmann::json run_audit(const std::string& kind, const nlohmann::json& options,
                         bool* violation_found) {
  bool violated = false;
  nlohmann::json report{{"kind", kind}};
  const std::uint64_t seed = options.value("seed", static_cast<std::uint64_t>(1));

  if (kind == "sensitivity") {
    const long trials = options.value("trials", 10000L);
    const std::string scheme_name = options.value("scheme", std::string("ino"));
    const int mu = options.value("mu", 8);
    std::optional<Tif> tif;
    if (options.contains("tif")) tif = tif_from_options(options);
    const WeightingScheme scheme = WeightingScheme::parse(scheme_name, tif, mu);
    const bool randomize = scheme.kind == WeightingScheme::Kind::ino && !tif.has_value();
    Rng rng = Rng::substream(seed, "probe");
    const SensitivityProbeReport r = modular_sensitivity_probe(scheme, rng, trials, randomize);
    report["scheme"] = scheme_name;
    report["trials"] = r.trials;
    report["violations"] = r.violations;
    report["max_change_norm"] = r.max_change_norm;
    report["max_excess"] = r.max_excess;
    report["telescoping_failures"] = r.telescoping_failures;
    report["decomposition_failures"] = r.decomposition_failures;
    if (r.worst_violation.has_value()) {
      report["worst_violation"] = {{"C_of_datum", r.worst_violation->C_of_datum},
                                   {"observed_change", r.worst_violation->observed_change},
                                   {"removed", r.worst_violation->removed},
                                   {"batch_size", r.worst_violation->batch_size}};
    }
    violated = r.violations > 0 || r.telescoping_failures > 0 || r.decomposition_failures > 0;
  } else if (kind == "weights") {
    const int K = options.value("K", 30);
    const double q_hat = options.value("q_hat", 0.3);
    const long trials = options.value("trials", 50000L);
    Tif tif = options.contains("tif")
                  ? tif_from_options(options)
                  : Tif::beta(1.0, 1.0, options.value("gamma", 3.0));
    const std::vector<double> oracle = expected_weights_oracle(K, q_hat, tif);
    Rng rng = Rng::substream(seed, "weights-mc");
    const McWeights mc = simulate_effective_weights(K, q_hat, tif, trials, rng);
    nlohmann::json ranks = nlohmann::json::array();
    long outside = 0;
    bool non_increasing = true;
    for (int k = 0; k < K; ++k) {
      const double dev = std::fabs(mc.mean[k] - oracle[k]);
      const bool ok = dev <= 3.0 * std::max(mc.std_error[k], 1e-12);
      if (!ok) ++outside;
      if (k > 0 && oracle[k] > oracle[k - 1] + 1e-12) non_increasing = false;
      ranks.push_back({{"rank", k + 1},
                       {"oracle", oracle[k]},
                       {"mc_mean", mc.mean[k]},
                       {"mc_se", mc.std_error[k]},
                       {"within_3se", ok}});
    }
    report["K"] = K;
    report["q_hat"] = q_hat;
    report["trials"] = trials;
    report["ranks"] = ranks;
    report["ranks_outside_3se"] = outside;
    report["oracle_non_increasing"] = non_increasing;
    violated = outside > 0 || !non_increasing;
  } else if (kind == "gradcheck") {
    const int trials = options.value("trials", 100);
    Rng rng = Rng::substream(seed, "gradcheck");
    double global_max = 0.0;
    nlohmann::json per_arch = nlohmann::json::array();
    const std::vector<ModelSpec> specs = {
        {Arch::logistic, 5, 2, 0}, {Arch::softmax_linear, 5, 3, 0}, {Arch::mlp1, 5, 3, 4}};
    for (const ModelSpec& spec : specs) {
      double max_err = 0.0;
      for (int t = 0; t < trials; ++t) {
        Model m = Model::zeros(spec);
        for (double& v : m.flat) v = rng.uniform_in(-1.0, 1.0);
        std::vector<double> x(spec.dim);
        for (double& v : x) v = rng.uniform_in(-2.0, 2.0);
        const int label = rng.uniform_int(0, (spec.arch == Arch::logistic ? 1 : spec.num_classes - 1));
        const PerSampleGrad g = per_sample_loss_and_grad(m, x, label);
        constexpr double h = 1e-5;
        for (int i = 0; i < spec.param_count(); ++i) {
          Model mp = m;
          mp.flat[i] += h;
          Model mm = m;
          mm.flat[i] -= h;
          const double fd = (forward_loss(mp, x, label) - forward_loss(mm, x, label)) / (2.0 * h);
          max_err = std::max(max_err, std::fabs(fd - g.grad[i]));
        }
      }
      per_arch.push_back({{"arch", spec.arch_name()}, {"max_abs_error", max_err}});
      global_max = std::max(global_max, max_err);
    }
    report["trials_per_arch"] = trials;
    report["per_arch"] = per_arch;
    report["max_abs_error"] = global_max;
    violated = global_max >= 1e-6;
  } else {
    throw ConfigError("audit: unknown kind '" + kind + "'");
  }
  report["ok"] = !violated;
  if (violation_found != nullptr) *violation_found = violated;
  return report;
}

namespace {

double final_group_metric(const TrainingTrace& trace, std::size_t group_index,
                          const std::string& metric) {
  const TraceRow& last = trace.rows.back();
  if (metric == "recall") return last.group_recall[group_index];
  if (metric == "loss") return last.group_loss[group_index];
  if (metric == "acc") return last.overall_acc;
  throw ConfigError("compare: unknown metric '" + metric + "'");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double recall_std(const TraceRow& row) {
  const auto& r = row.group_recall;
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= static_cast<double>(r.size());
  double var = 0.0;
  for (double x : r) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(r.size()));
}

}  // namespace

nlohmann::json run_compare(const ExperimentConfig& a, const ExperimentConfig& b,
                           const std::string& metric, int seeds) {
  if (seeds < 1) throw ConfigError("compare: seeds must be >= 1");
  a.validate();
  b.validate();
  // configs may differ only in optimizer/tif (and seed, which compare owns)
  nlohmann::json ja = a.to_canonical_json();
  nlohmann::json jb = b.to_canonical_json();
  for (auto* j : {&ja, &jb}) {
    j->erase("optimizer");
    if (j->contains("tif")) j->erase("tif");
    j->erase("seed");
  }
  if (ja != jb)
    throw ConfigError("compare: configs must differ only in optimizer/tif (datasets mismatch)");

  std::vector<TrainingTrace> traces_a, traces_b;
  for (int s = 0; s < seeds; ++s) {
    ExperimentConfig ca = a;
    ExperimentConfig cb = b;
    ca.seed = a.seed + static_cast<std::uint64_t>(s);
    cb.seed = ca.seed;
    traces_a.push_back(run_training(ca));
    traces_b.push_back(run_training(cb));
  }

  const std::vector<int>& groups = traces_a.front().group_ids;
  const long T = a.T;
  nlohmann::json per_seed = nlohmann::json::array();
  std::map<int, std::vector<double>> deltas;
  std::map<int, std::vector<double>> mid_a, mid_b;
  for (int s = 0; s < seeds; ++s) {
    nlohmann::json row{{"seed", a.seed + static_cast<std::uint64_t>(s)}};
    nlohmann::json d, ma, mb;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double va = final_group_metric(traces_a[s], g, metric);
      const double vb = final_group_metric(traces_b[s], g, metric);
      d[std::to_string(groups[g])] = vb - va;
      deltas[groups[g]].push_back(vb - va);
      const long da = mid_duration(traces_a[s], groups[g], T);
      const long db = mid_duration(traces_b[s], groups[g], T);
      ma[std::to_string(groups[g])] = da;
      mb[std::to_string(groups[g])] = db;
      mid_a[groups[g]].push_back(static_cast<double>(da));
      mid_b[groups[g]].push_back(static_cast<double>(db));
    }
    row["delta"] = d;
    row["mid_duration_a"] = ma;
    row["mid_duration_b"] = mb;
    row["overall_acc_a"] = traces_a[s].rows.back().overall_acc;
    row["overall_acc_b"] = traces_b[s].rows.back().overall_acc;
    row["worst_group_recall_a"] =
        *std::min_element(traces_a[s].rows.back().group_recall.begin(),
                          traces_a[s].rows.back().group_recall.end());
    row["worst_group_recall_b"] =
        *std::min_element(traces_b[s].rows.back().group_recall.begin(),
                          traces_b[s].rows.back().group_recall.end());
    row["imbalance_a"] = recall_std(traces_a[s].rows.back());
    row["imbalance_b"] = recall_std(traces_b[s].rows.back());
    per_seed.push_back(row);
  }

  nlohmann::json summary;
  nlohmann::json med_delta, pos_counts, med_mid_a, med_mid_b;
  for (int g : groups) {
    med_delta[std::to_string(g)] = median(deltas[g]);
    int pos = 0, neg = 0, zero = 0;
    for (double d : deltas[g]) {
      if (d > 0) ++pos;
      else if (d < 0) ++neg;
      else ++zero;
    }
    pos_counts[std::to_string(g)] = {{"positive", pos}, {"negative", neg}, {"zero", zero},
                                     {"non_negative", pos + zero}};
    med_mid_a[std::to_string(g)] = median(mid_a[g]);
    med_mid_b[std::to_string(g)] = median(mid_b[g]);
  }
  summary["median_delta"] = med_delta;
  summary["delta_signs"] = pos_counts;
  summary["median_mid_duration_a"] = med_mid_a;
  summary["median_mid_duration_b"] = med_mid_b;

  // correlation of per-owner change against the owner's privacy budget
  std::vector<double> eps, change;
  for (const auto& p : a.profiles) {
    if (!deltas.count(p.owner_id)) continue;
    double mean = 0.0;
    for (double d : deltas[p.owner_id]) mean += d;
    eps.push_back(p.epsilon);
    change.push_back(mean / static_cast<double>(seeds));
  }
  const auto r = pearson(eps, change);
  summary["pearson_r_change_vs_epsilon"] = r.has_value() ? nlohmann::json(*r) : nlohmann::json();

  return nlohmann::json{{"metric", metric},
                        {"seeds", seeds},
                        {"base_seed", a.seed},
                        {"per_seed", per_seed},
                        {"summary", summary}};
}

}  // namespace idp
