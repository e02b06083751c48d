/*
 * C interface to the individualized differential privacy training library:
 * Renyi accounting and per-owner calibration, tail/batch importance
 * functions, and the experiment runners (calibrate / train / audit /
 * compare) driven by JSON configuration documents.
 *
 * Conventions: functions return idp_status; outputs go through pointers.
 * Handles (idp_tif, idp_table) are opaque, created by idp_*_create-style
 * constructors and released with the matching _free. Strings returned
 * through char** are owned by the caller and released with
 * idp_string_free. idp_last_error() describes the most recent failure on
 * the calling thread.
 */

#ifndef IDP_IDP_H
#define IDP_IDP_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum idp_status {
  IDP_OK = 0,
  IDP_ERR_DOMAIN = 1,      /* math precondition violated */
  IDP_ERR_CONFIG = 2,      /* bad configuration / arguments */
  IDP_ERR_AUDIT = 3,       /* audit ran and found violations */
  IDP_ERR_IO = 4,          /* file system or format failure */
  IDP_ERR_INFEASIBLE = 5,  /* calibration target unreachable */
  IDP_ERR_INTERNAL = 6
} idp_status;

const char* idp_version(void);
const char* idp_last_error(void);
void idp_string_free(char* s);

/* ---- accounting ---- */

/* eps_bar = 2 alpha q^2 C^2 / sigma^2 (closed-form step bound) */
idp_status idp_rdp_of_sgm_step(double q, double C, double sigma, double alpha, double* out);

/* numerically tight per-step RDP of the subsampled Gaussian mechanism */
idp_status idp_sgm_rdp_step_tight(double q, double C, double sigma, double alpha, double* out);

idp_status idp_compose_rdp(double step_eps_bar, double steps, double* out);

idp_status idp_rdp_to_dp(double alpha, double eps_bar, double delta, double* out);

/* best (epsilon, alpha) over the default alpha grid after T steps */
idp_status idp_sgm_epsilon(double q, double C, double sigma, long T, double delta,
                           double* out_epsilon, double* out_alpha);

idp_status idp_calibrate_sampling_rate(double eps_target, double delta, double C, double sigma,
                                       long T, double* out_q);

idp_status idp_calibrate_clipping_threshold(double eps_target, double delta, double q,
                                            double sigma, long T, double* out_C);

/* ---- tail importance functions ---- */

typedef struct idp_tif idp_tif;
typedef struct idp_table idp_table;

idp_tif* idp_tif_beta(double a, double b, double gamma);
idp_tif* idp_tif_step(const double* levels, int n_levels, double step_length);
idp_tif* idp_tif_tabulated(const double* samples, int n_samples, double gamma);
void idp_tif_free(idp_tif* tif);

idp_status idp_tif_eval(const idp_tif* tif, double c, double* out);
idp_status idp_bif_eval(const idp_tif* tif, double batch_mass, double c, double* out);

/* average importance scores for thresholds given in rank order; out_scores
 * must hold n doubles */
idp_status idp_importance_scores(const idp_tif* tif, const double* thresholds, int n,
                                 double* out_scores);

/* fast-integration table; resolution <= 0 selects the default density */
idp_table* idp_table_build(const idp_tif* tif, double kappa, int resolution);
void idp_table_free(idp_table* table);
idp_status idp_table_interval(const idp_table* table, double c1, double c2, double batch_mass,
                              double* out_integral);

/* ---- experiment runners (JSON in / JSON or CSV out) ---- */

/* per-owner q or C calibration report for a sample/scale config */
idp_status idp_run_calibrate(const char* config_json, char** out_json);

/* full training run; writes the trace CSV atomically to out_csv_path */
idp_status idp_run_train(const char* config_json, const char* out_csv_path);

/* kind: "sensitivity" | "weights" | "gradcheck"; returns IDP_ERR_AUDIT and
 * still fills out_json when violations are found */
idp_status idp_run_audit(const char* kind, const char* options_json, char** out_json);

idp_status idp_run_compare(const char* config_a_json, const char* config_b_json,
                           const char* metric, int seeds, char** out_json);

/* atomic whole-file write (temp file + rename) */
idp_status idp_write_file_atomic(const char* path, const char* data);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* IDP_IDP_H */
