#include "idp/idp.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "accounting.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "importance.hpp"
#include "runner.hpp"
#include "trace.hpp"

namespace {

thread_local std::string g_last_error;

idp_status set_error(idp_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Runs fn, translating the library's exception taxonomy into status codes.
template <typename Fn>
idp_status guarded(const Fn& fn) {
  try {
    fn();
    g_last_error.clear();
    return IDP_OK;
  } catch (const idp::DomainError& e) {
    return set_error(IDP_ERR_DOMAIN, e.what());
  } catch (const idp::InfeasibleError& e) {
    return set_error(IDP_ERR_INFEASIBLE, e.what());
  } catch (const idp::ConfigError& e) {
    return set_error(IDP_ERR_CONFIG, e.what());
  } catch (const idp::IoError& e) {
    return set_error(IDP_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return set_error(IDP_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(IDP_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

idp::ExperimentConfig parse_config(const char* config_json) {
  if (config_json == nullptr) throw idp::ConfigError("config must not be null");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw idp::ConfigError(std::string("config parse error: ") + e.what());
  }
  return idp::ExperimentConfig::from_json(j);
}

}  // namespace

struct idp_tif {
  idp::Tif tif;
};

struct idp_table {
  idp::FastTable table;
};

extern "C" {

const char* idp_version(void) { return "0.1.0"; }

const char* idp_last_error(void) { return g_last_error.c_str(); }

void idp_string_free(char* s) { std::free(s); }

idp_status idp_rdp_of_sgm_step(double q, double C, double sigma, double alpha, double* out) {
  if (out == nullptr) return set_error(IDP_ERR_CONFIG, "out must not be null");
  return guarded([&] { *out = idp::rdp_of_sgm_step(q, C, sigma, alpha); });
}

idp_status idp_sgm_rdp_step_tight(double q, double C, double sigma, double alpha, double* out) {
  if (out == nullptr) return set_error(IDP_ERR_CONFIG, "out must not be null");
  return guarded([&] { *out = idp::sgm_rdp_step_tight(q, C, sigma, alpha); });
}

idp_status idp_compose_rdp(double step_eps_bar, double steps, double* out) {
  if (out == nullptr) return set_error(IDP_ERR_CONFIG, "out must not be null");
  return guarded([&] { *out = idp::compose_rdp(step_eps_bar, steps); });
}

idp_status idp_rdp_to_dp(double alpha, double eps_bar, double delta, double* out) {
  if (out == nullptr) return set_error(IDP_ERR_CONFIG, "out must not be null");
  return guarded([&] { *out = idp::rdp_to_dp(alpha, eps_bar, delta); });
}

idp_status idp_sgm_epsilon(double q, double C, double sigma, long T, double delta,
                           double* out_epsilon, double* out_alpha) {
  if (out_epsilon == nullptr) return set_error(IDP_ERR_CONFIG, "out_epsilon must not be null");
  return guarded([&] {
    const idp::DpPoint pt = idp::sgm_epsilon(q, C, sigma, T, delta);
    *out_epsilon = pt.epsilon;
    if (out_alpha != nullptr) *out_alpha = pt.alpha;
  });
}

idp_status idp_calibrate_sampling_rate(double eps_target, double delta, double C, double sigma,
                                       long T, double* out_q) {
  if (out_q == nullptr) return set_error(IDP_ERR_CONFIG, "out_q must not be null");
  return guarded([&] { *out_q = idp::calibrate_sampling_rate(eps_target, delta, C, sigma, T); });
}

idp_status idp_calibrate_clipping_threshold(double eps_target, double delta, double q,
                                            double sigma, long T, double* out_C) {
  if (out_C == nullptr) return set_error(IDP_ERR_CONFIG, "out_C must not be null");
  return guarded(
      [&] { *out_C = idp::calibrate_clipping_threshold(eps_target, delta, q, sigma, T); });
}

idp_tif* idp_tif_beta(double a, double b, double gamma) {
  idp_tif* out = nullptr;
  guarded([&] { out = new idp_tif{idp::Tif::beta(a, b, gamma)}; });
  return out;
}

idp_tif* idp_tif_step(const double* levels, int n_levels, double step_length) {
  idp_tif* out = nullptr;
  guarded([&] {
    if (levels == nullptr || n_levels <= 0) throw idp::DomainError("levels must be non-empty");
    out = new idp_tif{idp::Tif::step(std::vector<double>(levels, levels + n_levels), step_length)};
  });
  return out;
}

idp_tif* idp_tif_tabulated(const double* samples, int n_samples, double gamma) {
  idp_tif* out = nullptr;
  guarded([&] {
    if (samples == nullptr || n_samples <= 0) throw idp::DomainError("samples must be non-empty");
    out = new idp_tif{idp::Tif::tabulated(std::vector<double>(samples, samples + n_samples), gamma)};
  });
  return out;
}

void idp_tif_free(idp_tif* tif) { delete tif; }

idp_status idp_tif_eval(const idp_tif* tif, double c, double* out) {
  if (tif == nullptr || out == nullptr) return set_error(IDP_ERR_CONFIG, "null argument");
  return guarded([&] { *out = tif->tif.eval(c); });
}

idp_status idp_bif_eval(const idp_tif* tif, double batch_mass, double c, double* out) {
  if (tif == nullptr || out == nullptr) return set_error(IDP_ERR_CONFIG, "null argument");
  return guarded([&] { *out = idp::bif_eval(tif->tif, batch_mass, c); });
}

idp_status idp_importance_scores(const idp_tif* tif, const double* thresholds, int n,
                                 double* out_scores) {
  if (tif == nullptr || out_scores == nullptr || (thresholds == nullptr && n > 0))
    return set_error(IDP_ERR_CONFIG, "null argument");
  return guarded([&] {
    const idp::ImportanceAssignment a =
        idp::importance_scores(tif->tif, std::span<const double>(thresholds, n));
    for (int i = 0; i < n; ++i) out_scores[i] = a.scores[i];
  });
}

idp_table* idp_table_build(const idp_tif* tif, double kappa, int resolution) {
  idp_table* out = nullptr;
  guarded([&] {
    if (tif == nullptr) throw idp::DomainError("tif must not be null");
    const int res = resolution > 0 ? resolution : idp::FastTable::default_resolution(tif->tif);
    out = new idp_table{idp::FastTable(tif->tif, kappa, res)};
  });
  return out;
}

void idp_table_free(idp_table* table) { delete table; }

idp_status idp_table_interval(const idp_table* table, double c1, double c2, double batch_mass,
                              double* out_integral) {
  if (table == nullptr || out_integral == nullptr)
    return set_error(IDP_ERR_CONFIG, "null argument");
  return guarded([&] { *out_integral = table->table.interval_integral(c1, c2, batch_mass); });
}

idp_status idp_run_calibrate(const char* config_json, char** out_json) {
  if (out_json == nullptr) return set_error(IDP_ERR_CONFIG, "out_json must not be null");
  idp_status infeasible = IDP_OK;
  const idp_status st = guarded([&] {
    const idp::ExperimentConfig cfg = parse_config(config_json);
    const nlohmann::json report = idp::run_calibrate(cfg);
    *out_json = dup_string(report.dump(2));
    if (report.value("infeasible", false))
      infeasible = set_error(IDP_ERR_INFEASIBLE, "calibration infeasible for at least one owner");
  });
  return st != IDP_OK ? st : infeasible;
}

idp_status idp_run_train(const char* config_json, const char* out_csv_path) {
  if (out_csv_path == nullptr) return set_error(IDP_ERR_CONFIG, "out_csv_path must not be null");
  return guarded([&] {
    const idp::ExperimentConfig cfg = parse_config(config_json);
    idp::run_train_to_file(cfg, out_csv_path);
  });
}

idp_status idp_run_audit(const char* kind, const char* options_json, char** out_json) {
  if (kind == nullptr || out_json == nullptr)
    return set_error(IDP_ERR_CONFIG, "null argument");
  idp_status audit_status = IDP_OK;
  const idp_status st = guarded([&] {
    nlohmann::json options = nlohmann::json::object();
    if (options_json != nullptr && options_json[0] != '\0') {
      try {
        options = nlohmann::json::parse(options_json);
      } catch (const nlohmann::json::exception& e) {
        throw idp::ConfigError(std::string("audit options parse error: ") + e.what());
      }
    }
    bool violated = false;
    const nlohmann::json report = idp::run_audit(kind, options, &violated);
    *out_json = dup_string(report.dump(2));
    if (violated) audit_status = set_error(IDP_ERR_AUDIT, "audit found violations");
  });
  return st != IDP_OK ? st : audit_status;
}

idp_status idp_run_compare(const char* config_a_json, const char* config_b_json,
                           const char* metric, int seeds, char** out_json) {
  if (out_json == nullptr) return set_error(IDP_ERR_CONFIG, "out_json must not be null");
  return guarded([&] {
    const idp::ExperimentConfig a = parse_config(config_a_json);
    const idp::ExperimentConfig b = parse_config(config_b_json);
    const std::string m = metric != nullptr ? metric : "recall";
    const nlohmann::json report = idp::run_compare(a, b, m, seeds);
    *out_json = dup_string(report.dump(2));
  });
}

idp_status idp_write_file_atomic(const char* path, const char* data) {
  if (path == nullptr || data == nullptr) return set_error(IDP_ERR_CONFIG, "null argument");
  return guarded([&] { idp::atomic_write_file(path, data); });
}

}  // extern "C"
