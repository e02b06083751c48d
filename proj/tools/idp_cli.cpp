// Command-line front end for the IDP training library. Built entirely on
// the C API in idp/idp.h; subcommands are calibrate, train, audit, compare.
//
// Exit codes: 0 success, 2 configuration error, 3 audit violation, 4 I/O
// error.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "idp/idp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAudit = 3;
constexpr int kExitIo = 4;

int exit_code_of(idp_status st) {
  switch (st) {
    case IDP_OK:
      return kExitOk;
    case IDP_ERR_AUDIT:
      return kExitAudit;
    case IDP_ERR_IO:
      return kExitIo;
    case IDP_ERR_DOMAIN:
    case IDP_ERR_CONFIG:
    case IDP_ERR_INFEASIBLE:
      return kExitConfig;
    default:
      return kExitConfig;
  }
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return true;
}

int write_output(const std::string& path, const char* data) {
  if (path.empty()) {
    std::fputs(data, stdout);
    std::fputc('\n', stdout);
    return kExitOk;
  }
  const idp_status st = idp_write_file_atomic(path.c_str(), data);
  if (st != IDP_OK) {
    std::fprintf(stderr, "error: %s\n", idp_last_error());
    return kExitIo;
  }
  return kExitOk;
}

int fail(idp_status st) {
  std::fprintf(stderr, "error: %s\n", idp_last_error());
  return exit_code_of(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Individualized differential privacy training toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  auto* calibrate = app.add_subcommand("calibrate", "Per-owner sampling-rate or clipping-threshold calibration");
  calibrate->add_option("--config", config_path, "experiment config JSON")->required();
  calibrate->add_option("--out", out_path, "output path for the JSON report");

  std::string train_config, train_out;
  auto* train = app.add_subcommand("train", "Run a training experiment and write its trace CSV");
  train->add_option("--config", train_config, "experiment config JSON")->required();
  train->add_option("--out", train_out, "output path for the trace CSV")->required();

  std::string audit_kind = "sensitivity", audit_scheme = "ino", audit_tif_json, audit_out;
  long audit_trials = -1;
  int audit_mu = 8, audit_k = 30;
  double audit_qhat = 0.3, audit_gamma = 3.0;
  unsigned long long audit_seed = 1;
  auto* audit = app.add_subcommand("audit", "Sensitivity / weights / gradient audits");
  audit->add_option("--kind", audit_kind, "sensitivity | weights | gradcheck")->required();
  audit->add_option("--trials", audit_trials, "trial count");
  audit->add_option("--scheme", audit_scheme, "ino | idp | top_mu | drop_smallest_mu");
  audit->add_option("--mu", audit_mu, "cutoff for top_mu / drop_smallest_mu");
  audit->add_option("--tif", audit_tif_json, "tif spec as inline JSON");
  audit->add_option("--K", audit_k, "weights audit: dataset size");
  audit->add_option("--q-hat", audit_qhat, "weights audit: uniform sampling rate");
  audit->add_option("--gamma", audit_gamma, "weights audit: integer tail length");
  audit->add_option("--seed", audit_seed, "probe seed");
  audit->add_option("--out", audit_out, "output path for the JSON report");

  std::string cmp_a, cmp_b, cmp_metric = "recall", cmp_out;
  int cmp_seeds = 5;
  auto* compare = app.add_subcommand("compare", "Multi-seed comparison of two configs");
  compare->add_option("--a", cmp_a, "config A JSON path")->required();
  compare->add_option("--b", cmp_b, "config B JSON path")->required();
  compare->add_option("--seeds", cmp_seeds, "number of seeds");
  compare->add_option("--metric", cmp_metric, "recall | loss | acc");
  compare->add_option("--out", cmp_out, "output path for the JSON summary");

  CLI11_PARSE(app, argc, argv);

  if (calibrate->parsed()) {
    std::string config;
    if (!read_file(config_path, config)) {
      std::fprintf(stderr, "error: cannot read %s\n", config_path.c_str());
      return kExitIo;
    }
    char* report = nullptr;
    const idp_status st = idp_run_calibrate(config.c_str(), &report);
    if (report == nullptr) return fail(st);
    const int wc = write_output(out_path, report);
    idp_string_free(report);
    if (st != IDP_OK) {
      std::fprintf(stderr, "error: %s\n", idp_last_error());
      return exit_code_of(st);
    }
    return wc;
  }

  if (train->parsed()) {
    std::string config;
    if (!read_file(train_config, config)) {
      std::fprintf(stderr, "error: cannot read %s\n", train_config.c_str());
      return kExitIo;
    }
    const idp_status st = idp_run_train(config.c_str(), train_out.c_str());
    if (st != IDP_OK) return fail(st);
    std::printf("%s\n", train_out.c_str());
    return kExitOk;
  }

  if (audit->parsed()) {
    nlohmann::json options{{"seed", audit_seed}};
    if (audit_trials >= 0) options["trials"] = audit_trials;
    if (audit_kind == "sensitivity") {
      options["scheme"] = audit_scheme;
      options["mu"] = audit_mu;
    } else if (audit_kind == "weights") {
      options["K"] = audit_k;
      options["q_hat"] = audit_qhat;
      options["gamma"] = audit_gamma;
    }
    if (!audit_tif_json.empty()) {
      try {
        options["tif"] = nlohmann::json::parse(audit_tif_json);
      } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: bad --tif JSON: %s\n", e.what());
        return kExitConfig;
      }
    }
    char* report = nullptr;
    const idp_status st = idp_run_audit(audit_kind.c_str(), options.dump().c_str(), &report);
    if (report == nullptr) return fail(st);
    const int wc = write_output(audit_out, report);
    idp_string_free(report);
    if (st == IDP_ERR_AUDIT) {
      std::fprintf(stderr, "audit: violations found\n");
      return kExitAudit;
    }
    if (st != IDP_OK) {
      std::fprintf(stderr, "error: %s\n", idp_last_error());
      return exit_code_of(st);
    }
    return wc;
  }

  if (compare->parsed()) {
    std::string config_a, config_b;
    if (!read_file(cmp_a, config_a) || !read_file(cmp_b, config_b)) {
      std::fprintf(stderr, "error: cannot read compare configs\n");
      return kExitIo;
    }
    char* report = nullptr;
    const idp_status st = idp_run_compare(config_a.c_str(), config_b.c_str(), cmp_metric.c_str(),
                                          cmp_seeds, &report);
    if (st != IDP_OK) return fail(st);
    const int wc = write_output(cmp_out, report);
    idp_string_free(report);
    return wc;
  }

  return kExitConfig;
}
