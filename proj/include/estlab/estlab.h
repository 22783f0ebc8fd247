#ifndef ESTLAB_H
#define ESTLAB_H

/* C interface to the estlab library. All objects are opaque handles owned by
 * the caller and released with the matching *_free function. Functions return
 * an estlab_status; on failure estlab_last_error() describes the problem
 * (thread-local, valid until the next call on the same thread). Strings
 * returned through char** are heap copies released with estlab_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ESTLAB_API __declspec(dllexport)
#else
#define ESTLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum estlab_status {
    ESTLAB_OK = 0,
    ESTLAB_E_NULL_ARGUMENT,
    ESTLAB_E_INVALID_ARGUMENT,
    ESTLAB_E_ALL_ZERO,
    ESTLAB_E_NEGATIVE_WEIGHT,
    ESTLAB_E_INVALID_DISTRIBUTION,
    ESTLAB_E_SUPPORT_MISMATCH,
    ESTLAB_E_UNKNOWN_AXIS,
    ESTLAB_E_ZERO_EVIDENCE,
    ESTLAB_E_ABSOLUTE_CONTINUITY,
    ESTLAB_E_ZERO_DENSITY,
    ESTLAB_E_DPI_VIOLATION,
    ESTLAB_E_NOT_SUFFICIENT,
    ESTLAB_E_SUPPORT_TOO_SMALL,
    ESTLAB_E_GRID_TOO_NARROW,
    ESTLAB_E_NON_NUMERIC_SUPPORT,
    ESTLAB_E_MISSING_ORACLE,
    ESTLAB_E_EMPTY_SAMPLE,
    ESTLAB_E_ZERO_L1_NORM,
    ESTLAB_E_NOT_BINARY,
    ESTLAB_E_ORDERING_VIOLATION,
    ESTLAB_E_PARTITION_INCOMPLETE,
    ESTLAB_E_DIMENSION_MISMATCH,
    ESTLAB_E_DIVERGED,
    ESTLAB_E_MISSING_ADMISSIBILITY,
    ESTLAB_E_UNKNOWN_EXPERIMENT,
    ESTLAB_E_INVALID_OVERRIDE,
    ESTLAB_E_INVALID_CONFIG,
    ESTLAB_E_IO,
    ESTLAB_E_PARSE,
    ESTLAB_E_INTERNAL
} estlab_status;

typedef struct estlab_config estlab_config;
typedef struct estlab_report estlab_report;
typedef struct estlab_joint estlab_joint;
typedef struct estlab_chain estlab_chain;

ESTLAB_API const char* estlab_version(void);
ESTLAB_API const char* estlab_last_error(void);
ESTLAB_API const char* estlab_status_name(estlab_status status);
ESTLAB_API void estlab_string_free(char* s);

/* Experiment catalog as a JSON array. */
ESTLAB_API estlab_status estlab_list_experiments(char** json_out);

/* Configs */
ESTLAB_API estlab_status estlab_config_create(const char* experiment_id, estlab_config** out);
ESTLAB_API estlab_status estlab_config_parse(const char* text, estlab_config** out);
ESTLAB_API estlab_status estlab_config_load(const char* path, estlab_config** out);
ESTLAB_API estlab_status estlab_config_set_seed(estlab_config* config, uint64_t seed);
/* key is "seed", "id", "name" or "params.name"; value is raw text checked by validate. */
ESTLAB_API estlab_status estlab_config_set(estlab_config* config, const char* key, const char* value);
/* Worker threads for Monte Carlo replicates; results do not depend on it. */
ESTLAB_API estlab_status estlab_config_set_jobs(estlab_config* config, unsigned jobs);
ESTLAB_API estlab_status estlab_config_id(const estlab_config* config, char** id_out);
ESTLAB_API estlab_status estlab_config_get_seed(const estlab_config* config, uint64_t* seed_out);
/* Writes {"valid": bool, "diagnostics": [...]} to *json_out. Returns
 * ESTLAB_E_INVALID_CONFIG when any diagnostic is an error. */
ESTLAB_API estlab_status estlab_config_validate(const estlab_config* config, char** json_out);
ESTLAB_API void estlab_config_free(estlab_config* config);

/* Runs the experiment. When out_dir is non-NULL the report and CSV files are
 * written there; nothing is left behind if the run fails. */
ESTLAB_API estlab_status estlab_run(const estlab_config* config, const char* out_dir, estlab_report** out);
ESTLAB_API estlab_status estlab_report_json(const estlab_report* report, char** json_out);
/* 1 when every verdict passed, 0 otherwise (also for NULL). */
ESTLAB_API int estlab_report_all_pass(const estlab_report* report);
ESTLAB_API void estlab_report_free(estlab_report* report);

/* Joint distributions: {"axes": [...], "supports": [[...]], "tensor": [...]} */
ESTLAB_API estlab_status estlab_joint_from_json(const char* json, estlab_joint** out);
ESTLAB_API estlab_status estlab_joint_to_json(const estlab_joint* joint, char** json_out);
ESTLAB_API estlab_status estlab_joint_mutual_information(const estlab_joint* joint, const char* axis_a,
                                                         const char* axis_b, double* nats_out);
ESTLAB_API estlab_status estlab_joint_entropy(const estlab_joint* joint, double* nats_out);
ESTLAB_API estlab_status estlab_joint_marginal(const estlab_joint* joint, const char* const* keep_axes, size_t count,
                                               estlab_joint** out);
ESTLAB_API estlab_status estlab_joint_condition(const estlab_joint* joint, const char* axis, const char* value,
                                                estlab_joint** out);
ESTLAB_API void estlab_joint_free(estlab_joint* joint);

/* Chains: {"prior": {"support": [...], "probs": [...]},
 *          "family":  {"input": [...], "output": [...], "rows": [[...]]},
 *          "channel": {...}, "restorer": {...} (optional)} */
ESTLAB_API estlab_status estlab_chain_from_json(const char* json, estlab_chain** out);
ESTLAB_API estlab_status estlab_chain_naive_tree(estlab_chain** out);
ESTLAB_API estlab_status estlab_chain_joint(const estlab_chain* chain, estlab_joint** out);
/* mi_out[3] = I(theta;X), I(theta;Y), I(theta;Xhat); the last is NaN without a restorer. */
ESTLAB_API estlab_status estlab_chain_dpi_audit(const estlab_chain* chain, double mi_out[3], int* monotone_out);
/* pe_out[3] = P_e at X, Y and Xhat; the last is NaN without a restorer. */
ESTLAB_API estlab_status estlab_chain_bayes_errors(const estlab_chain* chain, double pe_out[3]);
ESTLAB_API void estlab_chain_free(estlab_chain* chain);

#ifdef __cplusplus
}
#endif

#endif
