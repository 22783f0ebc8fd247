/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "estlab/estlab.h"

static int failures = 0;

#define EXPECT(cond)                                                        \
    do {                                                                    \
        if (!(cond)) {                                                      \
            fprintf(stderr, "%s:%d: expected %s (%s)\n", __FILE__, __LINE__, \
                    #cond, estlab_last_error());                            \
            ++failures;                                                     \
        }                                                                   \
    } while (0)

static void test_errors(void) {
    estlab_config* cfg = NULL;
    EXPECT(estlab_config_create(NULL, &cfg) == ESTLAB_E_NULL_ARGUMENT);
    EXPECT(estlab_config_create("no_such", &cfg) == ESTLAB_E_UNKNOWN_EXPERIMENT);
    EXPECT(cfg == NULL);
    EXPECT(strstr(estlab_last_error(), "no_such") != NULL);
    EXPECT(estlab_config_parse("[experiment]\nid crb\n", &cfg) == ESTLAB_E_INVALID_CONFIG);
    EXPECT(estlab_config_load("/nonexistent/x.ini", &cfg) == ESTLAB_E_IO);
    EXPECT(strcmp(estlab_status_name(ESTLAB_E_ZERO_EVIDENCE), "ZeroEvidence") == 0);
    EXPECT(estlab_report_all_pass(NULL) == 0);
}

static void test_config_and_run(void) {
    estlab_config* cfg = NULL;
    char* json = NULL;
    estlab_report* rep = NULL;
    uint64_t seed = 0;

    EXPECT(estlab_config_parse("[experiment]\nid = naive_tree\n[params]\ndraws = 10\n", &cfg) == ESTLAB_OK);
    EXPECT(estlab_config_validate(cfg, &json) == ESTLAB_OK);
    EXPECT(strstr(json, "seed missing") != NULL);
    estlab_string_free(json);

    EXPECT(estlab_config_set(cfg, "params.bogus", "1") == ESTLAB_OK);
    EXPECT(estlab_config_validate(cfg, &json) == ESTLAB_E_INVALID_CONFIG);
    EXPECT(strstr(json, "params.bogus") != NULL);
    estlab_string_free(json);
    EXPECT(estlab_run(cfg, NULL, &rep) == ESTLAB_E_INVALID_OVERRIDE);
    estlab_config_free(cfg);

    EXPECT(estlab_config_create("naive_tree", &cfg) == ESTLAB_OK);
    EXPECT(estlab_config_set_seed(cfg, 5) == ESTLAB_OK);
    EXPECT(estlab_config_get_seed(cfg, &seed) == ESTLAB_OK && seed == 5);
    EXPECT(estlab_config_set_jobs(cfg, 0) == ESTLAB_E_INVALID_ARGUMENT);
    EXPECT(estlab_run(cfg, NULL, &rep) == ESTLAB_OK);
    EXPECT(estlab_report_all_pass(rep) == 1);
    EXPECT(estlab_report_json(rep, &json) == ESTLAB_OK);
    EXPECT(strstr(json, "\"experiment\": \"naive_tree\"") != NULL);
    estlab_string_free(json);
    estlab_report_free(rep);
    estlab_config_free(cfg);
}

static void test_joint(void) {
    estlab_joint* j = NULL;
    estlab_joint* m = NULL;
    estlab_joint* c = NULL;
    double mi = -1.0, h = -1.0;
    const char* keep[] = {"A"};
    char* json = NULL;

    /* Perfectly correlated bits: I(A;B) = H = log 2. */
    EXPECT(estlab_joint_from_json("{\"axes\":[\"A\",\"B\"],\"supports\":[[\"0\",\"1\"],[\"0\",\"1\"]],"
                                  "\"tensor\":[0.5,0,0,0.5]}",
                                  &j) == ESTLAB_OK);
    EXPECT(estlab_joint_mutual_information(j, "A", "B", &mi) == ESTLAB_OK);
    EXPECT(fabs(mi - log(2.0)) < 1e-15);
    EXPECT(estlab_joint_entropy(j, &h) == ESTLAB_OK);
    EXPECT(fabs(h - log(2.0)) < 1e-15);
    EXPECT(estlab_joint_mutual_information(j, "A", "Z", &mi) == ESTLAB_E_UNKNOWN_AXIS);
    EXPECT(estlab_joint_marginal(j, keep, 1, &m) == ESTLAB_OK);
    EXPECT(estlab_joint_to_json(m, &json) == ESTLAB_OK);
    EXPECT(strstr(json, "\"A\"") != NULL);
    estlab_string_free(json);
    EXPECT(estlab_joint_condition(j, "B", "1", &c) == ESTLAB_OK);
    EXPECT(estlab_joint_entropy(c, &h) == ESTLAB_OK && fabs(h) < 1e-15);
    EXPECT(estlab_joint_from_json("{\"axes\":[\"A\"],\"supports\":[[\"0\"]],\"tensor\":[2]}", &m) != ESTLAB_OK);
    estlab_joint_free(c);
    estlab_joint_free(j);
}

static void test_chain(void) {
    estlab_chain* ch = NULL;
    double mi[3], pe[3];
    int monotone = 0;

    EXPECT(estlab_chain_naive_tree(&ch) == ESTLAB_OK);
    EXPECT(estlab_chain_dpi_audit(ch, mi, &monotone) == ESTLAB_OK);
    EXPECT(monotone == 1);
    EXPECT(mi[0] >= mi[1]);
    EXPECT(isnan(mi[2]));
    EXPECT(estlab_chain_bayes_errors(ch, pe) == ESTLAB_OK);
    EXPECT(pe[0] == 0.0);
    EXPECT(pe[1] >= pe[0]);
    estlab_chain_free(ch);

    EXPECT(estlab_chain_from_json(
               "{\"prior\":{\"support\":[\"a\",\"b\"],\"probs\":[0.5,0.5]},"
               "\"family\":{\"input\":[\"a\",\"b\"],\"output\":[\"0\",\"1\"],\"rows\":[[0.9,0.1],[0.2,0.8]]},"
               "\"channel\":{\"input\":[\"0\",\"1\"],\"output\":[\"u\",\"v\"],\"rows\":[[0.7,0.3],[0.3,0.7]]},"
               "\"restorer\":{\"input\":[\"u\",\"v\"],\"output\":[\"0\",\"1\"],\"rows\":[[1,0],[0,1]]}}",
               &ch) == ESTLAB_OK);
    EXPECT(estlab_chain_bayes_errors(ch, pe) == ESTLAB_OK);
    EXPECT(fabs(pe[0] - 0.5 * (0.1 + 0.2)) < 1e-15);
    EXPECT(pe[2] + 1e-12 >= pe[1] && pe[1] + 1e-12 >= pe[0]);
    EXPECT(estlab_chain_dpi_audit(ch, mi, &monotone) == ESTLAB_OK && monotone == 1);
    estlab_chain_free(ch);
}

int main(void) {
    test_errors();
    test_config_and_run();
    test_joint();
    test_chain();
    if (failures) {
        fprintf(stderr, "%d failures\n", failures);
        return 1;
    }
    printf("capi ok (%s)\n", estlab_version());
    return 0;
}
