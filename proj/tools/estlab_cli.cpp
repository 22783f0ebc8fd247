// Command-line front end over the C API: list, validate and run experiments.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "estlab/estlab.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitVerdict = 1;
constexpr int kExitConfig = 2;

struct Owned {
    char* s = nullptr;
    ~Owned() { estlab_string_free(s); }
};

bool config_status(estlab_status s) {
    return s == ESTLAB_E_INVALID_CONFIG || s == ESTLAB_E_INVALID_OVERRIDE || s == ESTLAB_E_UNKNOWN_EXPERIMENT ||
           s == ESTLAB_E_IO || s == ESTLAB_E_PARSE;
}

int report_error(const char* what, estlab_status s) {
    std::fprintf(stderr, "error: %s: %s\n", what, estlab_last_error());
    return config_status(s) ? kExitConfig : kExitVerdict;
}

// A path to an existing file is loaded; otherwise a catalog id runs with defaults.
estlab_status open_config(const std::string& arg, estlab_config** out) {
    if (!std::filesystem::exists(arg)) {
        Owned cat;
        if (estlab_list_experiments(&cat.s) == ESTLAB_OK) {
            for (const auto& e : nlohmann::json::parse(cat.s)) {
                if (e["id"] == arg) {
                    return estlab_config_create(arg.c_str(), out);
                }
            }
        }
    }
    return estlab_config_load(arg.c_str(), out);
}

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
};

estlab_status prepare(const Common& c, estlab_config** out) {
    estlab_status s = open_config(c.config, out);
    if (s != ESTLAB_OK) {
        return s;
    }
    if (c.seed) {
        estlab_config_set_seed(*out, *c.seed);
    }
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return ESTLAB_E_INVALID_OVERRIDE;
        }
        s = estlab_config_set(*out, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (s != ESTLAB_OK) {
            return s;
        }
    }
    return ESTLAB_OK;
}

void print_diagnostics(const char* json) {
    const auto doc = nlohmann::json::parse(json);
    for (const auto& d : doc["diagnostics"]) {
        std::fprintf(stderr, "%s: %s: %s\n", d["severity"].get<std::string>().c_str(),
                     d["path"].get<std::string>().c_str(), d["message"].get<std::string>().c_str());
    }
}

int cmd_list(bool json) {
    Owned cat;
    if (const auto s = estlab_list_experiments(&cat.s); s != ESTLAB_OK) {
        return report_error("list", s);
    }
    if (json) {
        std::printf("%s\n", cat.s);
        return kExitPass;
    }
    for (const auto& e : nlohmann::json::parse(cat.s)) {
        std::printf("%-28s %s\n", e["id"].get<std::string>().c_str(), e["description"].get<std::string>().c_str());
        std::printf("%-28s   anchor: %s; op: %s\n", "", e["anchor"].get<std::string>().c_str(),
                    e["operation"].get<std::string>().c_str());
    }
    return kExitPass;
}

int cmd_validate(const Common& c) {
    estlab_config* cfg = nullptr;
    if (const auto s = prepare(c, &cfg); s != ESTLAB_OK) {
        estlab_config_free(cfg);
        return report_error("config", s);
    }
    Owned diag;
    const auto s = estlab_config_validate(cfg, &diag.s);
    estlab_config_free(cfg);
    if (diag.s) {
        print_diagnostics(diag.s);
    }
    if (s == ESTLAB_OK) {
        std::printf("valid\n");
        return kExitPass;
    }
    return config_status(s) ? kExitConfig : kExitVerdict;
}

int cmd_run(const Common& c, const std::string& out_flag, unsigned jobs) {
    estlab_config* cfg = nullptr;
    if (const auto s = prepare(c, &cfg); s != ESTLAB_OK) {
        estlab_config_free(cfg);
        return report_error("config", s);
    }
    Owned diag;
    if (estlab_config_validate(cfg, &diag.s) != ESTLAB_OK) {
        print_diagnostics(diag.s);
        estlab_config_free(cfg);
        return kExitConfig;
    }
    print_diagnostics(diag.s); // warnings only
    estlab_config_set_jobs(cfg, jobs);
    Owned id;
    estlab_config_id(cfg, &id.s);
    std::string out = out_flag;
    if (out.empty()) {
        const char* root = std::getenv("ESTLAB_OUT");
        out = (std::filesystem::path(root && *root ? root : "out") / id.s).string();
    }
    estlab_report* rep = nullptr;
    const auto s = estlab_run(cfg, out.c_str(), &rep);
    estlab_config_free(cfg);
    if (s != ESTLAB_OK) {
        return report_error("run", s);
    }
    Owned json;
    estlab_report_json(rep, &json.s);
    const auto doc = nlohmann::json::parse(json.s);
    for (const auto& v : doc["verdicts"]) {
        std::printf("%s %s: %s\n", v["passed"].get<bool>() ? "PASS" : "FAIL", v["name"].get<std::string>().c_str(),
                    v["invariant"].get<std::string>().c_str());
    }
    const bool pass = estlab_report_all_pass(rep) == 1;
    estlab_report_free(rep);
    std::printf("wrote %s\n", out.c_str());
    return pass ? kExitPass : kExitVerdict;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"estlab experiment runner"};
    app.require_subcommand(1);

    bool list_json = false;
    auto* list = app.add_subcommand("list", "List the experiment catalog");
    list->add_flag("--json", list_json, "Print the catalog as JSON");

    Common vc;
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", vc.config, "Config file or experiment id")->required();
    validate->add_option("--set", vc.sets, "Override key=value (repeatable)");
    validate->add_option("--seed", vc.seed, "Seed override");

    Common rc;
    std::string out;
    unsigned jobs = 1;
    auto* run = app.add_subcommand("run", "Run an experiment and write its report");
    run->add_option("config", rc.config, "Config file or experiment id")->required();
    run->add_option("--seed", rc.seed, "Seed override");
    run->add_option("--out", out, "Output directory (default: $ESTLAB_OUT/<id> or out/<id>)");
    run->add_option("--set", rc.sets, "Override key=value (repeatable)");
    run->add_option("--jobs", jobs, "Worker threads for Monte Carlo replicates")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfig;
    }
    if (*list) {
        return cmd_list(list_json);
    }
    if (*validate) {
        return cmd_validate(vc);
    }
    return cmd_run(rc, out, jobs);
}
