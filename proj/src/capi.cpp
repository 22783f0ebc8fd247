#include "estlab/estlab.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <span>
#include <string>

#include "estlab/class_bounds.hpp"
#include "estlab/error.hpp"
#include "estlab/experiments.hpp"
#include "estlab/info.hpp"
#include "estlab/prob.hpp"

struct estlab_config {
    estlab::ExperimentConfig cfg;
};

struct estlab_report {
    estlab::ExperimentOutput out;
};

struct estlab_joint {
    estlab::JointDistribution joint;
};

struct estlab_chain {
    estlab::PipelineChain chain;
};

namespace {

thread_local std::string g_last_error;

static_assert(ESTLAB_E_IO == static_cast<int>(estlab::ErrorCode::Io) + ESTLAB_E_INVALID_ARGUMENT,
              "status codes must mirror ErrorCode");

estlab_status from_code(estlab::ErrorCode c) {
    return static_cast<estlab_status>(static_cast<int>(c) + ESTLAB_E_INVALID_ARGUMENT);
}

estlab_status fail(estlab_status s, std::string msg) {
    g_last_error = std::move(msg);
    return s;
}

// Runs `f`, translating exceptions into status codes.
template <class F>
estlab_status guarded(F&& f) {
    try {
        g_last_error.clear();
        f();
        return ESTLAB_OK;
    } catch (const estlab::Error& e) {
        return fail(from_code(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(ESTLAB_E_PARSE, e.what());
    } catch (const std::bad_alloc&) {
        return fail(ESTLAB_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(ESTLAB_E_INTERNAL, e.what());
    } catch (...) {
        return fail(ESTLAB_E_INTERNAL, "unknown failure");
    }
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) {
        throw std::bad_alloc();
    }
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

estlab::ConditionalTable table_from_json(const nlohmann::json& doc) {
    return {doc.at("input").get<estlab::Labels>(), doc.at("output").get<estlab::Labels>(),
            doc.at("rows").get<std::vector<std::vector<double>>>()};
}

} // namespace

#define ESTLAB_REQUIRE(ptr)                                                                                            \
    do {                                                                                                               \
        if (!(ptr)) {                                                                                                  \
            return fail(ESTLAB_E_NULL_ARGUMENT, #ptr " is NULL");                                                      \
        }                                                                                                              \
    } while (0)

extern "C" {

const char* estlab_version(void) { return "1.0.0"; }

const char* estlab_last_error(void) { return g_last_error.c_str(); }

const char* estlab_status_name(estlab_status s) {
    switch (s) {
    case ESTLAB_OK: return "OK";
    case ESTLAB_E_NULL_ARGUMENT: return "NullArgument";
    case ESTLAB_E_PARSE: return "Parse";
    case ESTLAB_E_INTERNAL: return "Internal";
    default: break;
    }
    if (s > ESTLAB_E_NULL_ARGUMENT && s <= ESTLAB_E_IO) {
        return estlab::error_code_name(static_cast<estlab::ErrorCode>(s - ESTLAB_E_INVALID_ARGUMENT)).data();
    }
    return "Unknown";
}

void estlab_string_free(char* s) { std::free(s); }

estlab_status estlab_list_experiments(char** json_out) {
    ESTLAB_REQUIRE(json_out);
    return guarded([&] { *json_out = dup_string(estlab::catalog_json().dump(2)); });
}

estlab_status estlab_config_create(const char* id, estlab_config** out) {
    ESTLAB_REQUIRE(id);
    ESTLAB_REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        if (!estlab::find_experiment(id)) {
            throw estlab::Error(estlab::ErrorCode::UnknownExperiment, std::string("unknown experiment '") + id + "'");
        }
        auto c = std::make_unique<estlab_config>();
        c->cfg.id = id;
        *out = c.release();
    });
}

estlab_status estlab_config_parse(const char* text, estlab_config** out) {
    ESTLAB_REQUIRE(text);
    ESTLAB_REQUIRE(out);
    return guarded([&] { *out = new estlab_config{estlab::parse_config(text)}; });
}

estlab_status estlab_config_load(const char* path, estlab_config** out) {
    ESTLAB_REQUIRE(path);
    ESTLAB_REQUIRE(out);
    return guarded([&] { *out = new estlab_config{estlab::load_config(path)}; });
}

estlab_status estlab_config_set_seed(estlab_config* config, uint64_t seed) {
    ESTLAB_REQUIRE(config);
    config->cfg.seed = seed;
    config->cfg.seed_given = true;
    return ESTLAB_OK;
}

estlab_status estlab_config_set(estlab_config* config, const char* key, const char* value) {
    ESTLAB_REQUIRE(config);
    ESTLAB_REQUIRE(key);
    ESTLAB_REQUIRE(value);
    return guarded([&] { estlab::apply_override(config->cfg, key, value); });
}

estlab_status estlab_config_set_jobs(estlab_config* config, unsigned jobs) {
    ESTLAB_REQUIRE(config);
    if (jobs == 0) {
        return fail(ESTLAB_E_INVALID_ARGUMENT, "jobs must be at least 1");
    }
    config->cfg.jobs = jobs;
    return ESTLAB_OK;
}

estlab_status estlab_config_id(const estlab_config* config, char** id_out) {
    ESTLAB_REQUIRE(config);
    ESTLAB_REQUIRE(id_out);
    return guarded([&] { *id_out = dup_string(config->cfg.id); });
}

estlab_status estlab_config_get_seed(const estlab_config* config, uint64_t* seed_out) {
    ESTLAB_REQUIRE(config);
    ESTLAB_REQUIRE(seed_out);
    *seed_out = config->cfg.seed;
    return ESTLAB_OK;
}

estlab_status estlab_config_validate(const estlab_config* config, char** json_out) {
    ESTLAB_REQUIRE(config);
    bool bad = false;
    const auto s = guarded([&] {
        const auto diags = estlab::validate(config->cfg);
        bad = estlab::has_errors(diags);
        if (json_out) {
            *json_out = dup_string(estlab::to_json(diags).dump(2));
        }
        if (bad) {
            std::string msg;
            for (const auto& d : diags) {
                if (d.severity == estlab::Severity::Error) {
                    msg += (msg.empty() ? "" : "; ") + d.path + ": " + d.message;
                }
            }
            g_last_error = msg;
        }
    });
    if (s != ESTLAB_OK) {
        return s;
    }
    return bad ? ESTLAB_E_INVALID_CONFIG : ESTLAB_OK;
}

void estlab_config_free(estlab_config* config) { delete config; }

estlab_status estlab_run(const estlab_config* config, const char* out_dir, estlab_report** out) {
    ESTLAB_REQUIRE(config);
    ESTLAB_REQUIRE(out);
    return guarded([&] {
        auto r = std::make_unique<estlab_report>();
        r->out = estlab::run_experiment(config->cfg);
        if (out_dir) {
            estlab::write_outputs(r->out, out_dir);
        }
        *out = r.release();
    });
}

estlab_status estlab_report_json(const estlab_report* report, char** json_out) {
    ESTLAB_REQUIRE(report);
    ESTLAB_REQUIRE(json_out);
    return guarded([&] { *json_out = dup_string(report->out.report.dump(2)); });
}

int estlab_report_all_pass(const estlab_report* report) { return report && report->out.all_pass ? 1 : 0; }

void estlab_report_free(estlab_report* report) { delete report; }

estlab_status estlab_joint_from_json(const char* json, estlab_joint** out) {
    ESTLAB_REQUIRE(json);
    ESTLAB_REQUIRE(out);
    return guarded([&] { *out = new estlab_joint{estlab::joint_from_json(nlohmann::json::parse(json))}; });
}

estlab_status estlab_joint_to_json(const estlab_joint* joint, char** json_out) {
    ESTLAB_REQUIRE(joint);
    ESTLAB_REQUIRE(json_out);
    return guarded([&] { *json_out = dup_string(estlab::to_json(joint->joint).dump()); });
}

estlab_status estlab_joint_mutual_information(const estlab_joint* joint, const char* a, const char* b,
                                              double* nats_out) {
    ESTLAB_REQUIRE(joint);
    ESTLAB_REQUIRE(a);
    ESTLAB_REQUIRE(b);
    ESTLAB_REQUIRE(nats_out);
    return guarded([&] { *nats_out = estlab::mutual_information(joint->joint, a, b); });
}

estlab_status estlab_joint_entropy(const estlab_joint* joint, double* nats_out) {
    ESTLAB_REQUIRE(joint);
    ESTLAB_REQUIRE(nats_out);
    return guarded([&] { *nats_out = estlab::joint_entropy(joint->joint); });
}

estlab_status estlab_joint_marginal(const estlab_joint* joint, const char* const* keep_axes, size_t count,
                                    estlab_joint** out) {
    ESTLAB_REQUIRE(joint);
    ESTLAB_REQUIRE(out);
    if (count > 0 && !keep_axes) {
        return fail(ESTLAB_E_NULL_ARGUMENT, "keep_axes is NULL");
    }
    return guarded([&] {
        std::vector<std::string> keep;
        for (size_t i = 0; i < count; ++i) {
            if (!keep_axes[i]) {
                throw estlab::Error(estlab::ErrorCode::InvalidArgument, "NULL axis name");
            }
            keep.emplace_back(keep_axes[i]);
        }
        *out = new estlab_joint{estlab::marginal(joint->joint, std::span<const std::string>(keep))};
    });
}

estlab_status estlab_joint_condition(const estlab_joint* joint, const char* axis, const char* value,
                                     estlab_joint** out) {
    ESTLAB_REQUIRE(joint);
    ESTLAB_REQUIRE(axis);
    ESTLAB_REQUIRE(value);
    ESTLAB_REQUIRE(out);
    return guarded([&] { *out = new estlab_joint{estlab::condition(joint->joint, axis, value)}; });
}

void estlab_joint_free(estlab_joint* joint) { delete joint; }

estlab_status estlab_chain_from_json(const char* json, estlab_chain** out) {
    ESTLAB_REQUIRE(json);
    ESTLAB_REQUIRE(out);
    return guarded([&] {
        const auto doc = nlohmann::json::parse(json);
        estlab::PipelineChain c;
        const auto& prior = doc.at("prior");
        c.prior = estlab::FiniteDistribution(prior.at("support").get<estlab::Labels>(),
                                             prior.at("probs").get<std::vector<double>>());
        c.family = table_from_json(doc.at("family"));
        c.channel = table_from_json(doc.at("channel"));
        if (doc.contains("restorer") && !doc.at("restorer").is_null()) {
            c.restorer = table_from_json(doc.at("restorer"));
        }
        estlab::assemble_joint(c); // validates shapes
        *out = new estlab_chain{std::move(c)};
    });
}

estlab_status estlab_chain_naive_tree(estlab_chain** out) {
    ESTLAB_REQUIRE(out);
    return guarded([&] { *out = new estlab_chain{estlab::naive_tree_chain()}; });
}

estlab_status estlab_chain_joint(const estlab_chain* chain, estlab_joint** out) {
    ESTLAB_REQUIRE(chain);
    ESTLAB_REQUIRE(out);
    return guarded([&] { *out = new estlab_joint{estlab::assemble_joint(chain->chain)}; });
}

estlab_status estlab_chain_dpi_audit(const estlab_chain* chain, double mi_out[3], int* monotone_out) {
    ESTLAB_REQUIRE(chain);
    ESTLAB_REQUIRE(mi_out);
    return guarded([&] {
        const auto a = estlab::dpi_audit(chain->chain);
        mi_out[0] = a.i_theta_x;
        mi_out[1] = a.i_theta_y;
        mi_out[2] = chain->chain.has_restorer() ? a.i_theta_xhat : std::nan("");
        if (monotone_out) {
            *monotone_out = a.monotone ? 1 : 0;
        }
    });
}

estlab_status estlab_chain_bayes_errors(const estlab_chain* chain, double pe_out[3]) {
    ESTLAB_REQUIRE(chain);
    ESTLAB_REQUIRE(pe_out);
    return guarded([&] {
        const auto joint = estlab::assemble_joint(chain->chain);
        const auto& prior = chain->chain.prior;
        pe_out[0] = estlab::bayes_error(prior, estlab::stage_conditionals(joint, estlab::kXAxis));
        pe_out[1] = estlab::bayes_error(prior, estlab::stage_conditionals(joint, estlab::kYAxis));
        pe_out[2] = chain->chain.has_restorer()
                        ? estlab::bayes_error(prior, estlab::stage_conditionals(joint, estlab::kXhatAxis))
                        : std::nan("");
    });
}

void estlab_chain_free(estlab_chain* chain) { delete chain; }

} // extern "C"
