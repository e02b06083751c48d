#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "idp/idp.h"

namespace {

const char* kTrainConfig = R"({
  "seed": 5,
  "dataset": {"kind": "two_group_synthetic", "n_per_group": 60, "separation": 2.0,
              "n_eval_per_group": 30},
  "profiles": [{"owner_id": 0, "epsilon": 0.5, "delta": 1e-5},
               {"owner_id": 1, "epsilon": 5.0, "delta": 1e-5}],
  "mechanism": {"variant": "joint", "sigma": 1.0, "T": 10, "eta": 0.5,
                "per_owner": [{"owner_id": 0, "q": 0.2, "C": 0.2},
                              {"owner_id": 1, "q": 0.2, "C": 2.0}]},
  "model": {"arch": "logistic"},
  "optimizer": "idp",
  "eval_interval": 5
})";

}  // namespace

TEST_CASE("scalar accounting surface") {
  double out = 0.0;
  CHECK(idp_rdp_of_sgm_step(0.1, 1, 2, 2, &out) == IDP_OK);
  CHECK(out == doctest::Approx(0.01).epsilon(1e-14));

  CHECK(idp_rdp_of_sgm_step(0.1, 1, 2, 0.5, &out) == IDP_ERR_DOMAIN);
  CHECK(std::strlen(idp_last_error()) > 0);

  CHECK(idp_compose_rdp(0.01, 1000, &out) == IDP_OK);
  CHECK(out == doctest::Approx(10.0));

  CHECK(idp_rdp_to_dp(2, 1, 1e-5, &out) == IDP_OK);
  CHECK(out == doctest::Approx(11.126631).epsilon(1e-6));

  double eps = 0.0, alpha = 0.0;
  CHECK(idp_sgm_epsilon(0.19, 1, 4, 1000, 1e-5, &eps, &alpha) == IDP_OK);
  CHECK(eps > 6.8);
  CHECK(eps < 9.2);

  double q = 0.0;
  CHECK(idp_calibrate_sampling_rate(8, 1e-5, 1, 4, 1000, &q) == IDP_OK);
  CHECK(q == doctest::Approx(0.19).epsilon(0.15));
  CHECK(idp_calibrate_sampling_rate(1e-5, 1e-5, 1, 4, 1000, &q) == IDP_ERR_INFEASIBLE);

  double C = 0.0;
  CHECK(idp_calibrate_clipping_threshold(0.5, 1e-5, 0.05, 4, 1000, &C) == IDP_OK);
  CHECK(C == doctest::Approx(0.33).epsilon(0.15));
}

TEST_CASE("tif and table handles") {
  idp_tif* ramp = idp_tif_beta(1.0, 1.0, 4.0);
  REQUIRE(ramp != nullptr);
  double v = 0.0;
  CHECK(idp_tif_eval(ramp, 1.0, &v) == IDP_OK);
  CHECK(v == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(idp_tif_eval(ramp, 9.0, &v) == IDP_ERR_DOMAIN);

  CHECK(idp_bif_eval(ramp, 10.0, 8.0, &v) == IDP_OK);
  CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  double thresholds[10];
  for (double& t : thresholds) t = 1.0;
  double scores[10];
  CHECK(idp_importance_scores(ramp, thresholds, 10, scores) == IDP_OK);
  CHECK(scores[0] == 1.0);
  CHECK(scores[6] == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(scores[9] == doctest::Approx(0.125).epsilon(1e-12));

  idp_table* table = idp_table_build(ramp, 100.0, 0);
  REQUIRE(table != nullptr);
  CHECK(idp_table_interval(table, 96.0, 100.0, 100.0, &v) == IDP_OK);
  CHECK(v == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(idp_table_interval(table, 0.0, 1.0, 200.0, &v) == IDP_ERR_DOMAIN);
  idp_table_free(table);
  idp_tif_free(ramp);

  const double bad_levels[2] = {0.2, 0.9};
  CHECK(idp_tif_step(bad_levels, 2, 1.0) == nullptr);
  CHECK(std::strlen(idp_last_error()) > 0);
}

TEST_CASE("train run writes a parseable trace") {
  const char* path = "/tmp/idp_capi_trace.csv";
  REQUIRE(idp_run_train(kTrainConfig, path) == IDP_OK);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# config_hash=", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("iter,optimizer,overall_loss", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);  // iterations 0, 5, 10

  CHECK(idp_run_train("{not json", path) == IDP_ERR_CONFIG);
  CHECK(idp_run_train(R"({"optimizer": "ino"})", path) == IDP_ERR_CONFIG);
}

TEST_CASE("calibrate run returns the JSON report") {
  const char* cfg = R"({
    "seed": 1,
    "dataset": {"kind": "two_group_synthetic", "n_per_group": 10},
    "profiles": [{"owner_id": 0, "epsilon": 1.0, "delta": 1e-5},
                 {"owner_id": 1, "epsilon": 4.0, "delta": 1e-5}],
    "mechanism": {"variant": "sample", "sigma": 4.0, "T": 100, "C": 1.0}
  })";
  char* report = nullptr;
  REQUIRE(idp_run_calibrate(cfg, &report) == IDP_OK);
  REQUIRE(report != nullptr);
  const std::string text(report);
  idp_string_free(report);
  CHECK(text.find("\"owners\"") != std::string::npos);
  CHECK(text.find("\"q\"") != std::string::npos);
}

TEST_CASE("audit run reports violations through the status code") {
  char* report = nullptr;
  CHECK(idp_run_audit("gradcheck", R"({"trials": 3, "seed": 1})", &report) == IDP_OK);
  REQUIRE(report != nullptr);
  idp_string_free(report);

  report = nullptr;
  CHECK(idp_run_audit("sensitivity", R"({"trials": 150, "scheme": "top_mu", "seed": 2})",
                      &report) == IDP_ERR_AUDIT);
  REQUIRE(report != nullptr);
  const std::string text(report);
  idp_string_free(report);
  CHECK(text.find("worst_violation") != std::string::npos);

  report = nullptr;
  CHECK(idp_run_audit("bogus", "{}", &report) == IDP_ERR_CONFIG);
  CHECK(report == nullptr);
}

TEST_CASE("atomic write helper") {
  CHECK(idp_write_file_atomic("/tmp/idp_capi_atomic.txt", "data") == IDP_OK);
  CHECK(idp_write_file_atomic("/nonexistent-dir/f.txt", "data") == IDP_ERR_IO);
  CHECK(idp_write_file_atomic(nullptr, "data") == IDP_ERR_CONFIG);
}

TEST_CASE("version string is present") {
  CHECK(std::strlen(idp_version()) > 0);
}
