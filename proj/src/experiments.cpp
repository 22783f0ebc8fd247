#include "estlab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "estlab/error.hpp"
#include "experiments_impl.hpp"

namespace estlab {

namespace {

ParamSpec make_spec(std::string name, ParamType type, std::string def, std::string desc) {
    ParamSpec p;
    p.name = std::move(name);
    p.type = type;
    p.default_value = std::move(def);
    p.description = std::move(desc);
    return p;
}

ParamSpec p_int(std::string name, std::string def, std::string desc, double min, std::optional<double> max = {}) {
    ParamSpec p = make_spec(std::move(name), ParamType::Int, std::move(def), std::move(desc));
    p.min = min;
    p.max = max;
    return p;
}

ParamSpec p_real(std::string name, std::string def, std::string desc, std::optional<double> min = {},
                 bool exclusive = false, std::optional<double> max = {}) {
    ParamSpec p = make_spec(std::move(name), ParamType::Real, std::move(def), std::move(desc));
    p.min = min;
    p.min_exclusive = exclusive;
    p.max = max;
    return p;
}

ParamSpec p_list(std::string name, std::string def, std::string desc, std::optional<double> min = {},
                 bool exclusive = false) {
    ParamSpec p = make_spec(std::move(name), ParamType::RealList, std::move(def), std::move(desc));
    p.min = min;
    p.min_exclusive = exclusive;
    return p;
}

ParamSpec p_bool(std::string name, std::string def, std::string desc) {
    return make_spec(std::move(name), ParamType::Bool, std::move(def), std::move(desc));
}

ParamSpec p_choice(std::string name, std::string def, std::string desc, std::vector<std::string> choices) {
    ParamSpec p = make_spec(std::move(name), ParamType::Choice, std::move(def), std::move(desc));
    p.choices = std::move(choices);
    return p;
}

std::vector<ExperimentInfo> build_catalog() {
    std::vector<ExperimentInfo> c;
    c.push_back({"naive_tree", "Two-class tree whose channel merges x=1 and x=4; posterior vs likelihood decisions",
                 "naive tree example: posterior vs likelihood decisions", "prob_core.assemble_joint, estimators.map_restorer",
                 {p_int("draws", "100000", "posterior-sampler draws at y=1.5", 1)}});
    c.push_back({"dpi_random_chains", "Mutual-information ordering on random chains; sufficiency cross-check",
                 "data processing inequality and sufficient-statistic equality", "info_metrics.dpi_audit",
                 {p_int("chains", "1000", "random chains", 1), p_int("classes", "2", "classes per chain", 2, 6),
                  p_int("sufficient_instances", "100", "constructed sufficient-statistic instances", 1)}});
    c.push_back({"crb_gaussian_mean", "Fisher information and CRB of a Gaussian mean; CRB attainment through noise",
                 "AWGN Gaussian-mean example and the coincidence construction", "info_metrics.fisher_information, estimators.estimator_variance_mc",
                 {p_real("sigma_x", "1", "source standard deviation", 0.0, true),
                  p_int("m", "10", "observations per replicate", 2), p_real("mu", "0", "true mean"),
                  p_int("replicates", "10000", "Monte Carlo replicates", 1000)}});
    c.push_back({"crb_laplace_rate", "Fisher information of the Laplace rate and the ML estimator's MSE",
                 "Laplace-rate CRB J_m = m / lambda^2", "info_metrics.fisher_information, estimators.estimator_variance_mc",
                 {p_real("lambda", "2", "true rate", 0.0, true), p_int("m", "50", "observations per replicate", 3),
                  p_int("replicates", "10000", "Monte Carlo replicates", 1000)}});
    c.push_back({"bayes_ordering_audit", "Bayes error ordering X -> Y -> Xhat and equality under class-aware perception",
                 "Bayes error bounds after transformation and class-agnostic / conditional recovery",
                 "class_bounds.theorem_ordering_audit",
                 {p_int("chains", "1000", "chains per branch", 1), p_int("classes", "2", "classes per chain", 2, 6)}});
    c.push_back({"pe_separability_identity", "P_e = (1 - J1) / 2 on random binary chains at every stage",
                 "error probability through separability", "class_bounds.separability, class_bounds.bayes_error",
                 {p_int("chains", "1000", "random binary chains", 1)}});
    c.push_back({"double_meaning_mse", "Mixed-domain MSE minimizer is the weighted mean; trained linear map collapses to it",
                 "Double Meaning theorem, MSE case", "domain_shift.double_meaning_minimizer, domain_shift.train_mixed_restorer",
                 {p_int("n", "4", "signal length", 1), p_list("scales", "1,2", "per-domain linear inverses", 0.0, true),
                  p_int("samples", "2000", "training draws", 2), p_real("lr", "0.01", "initial learning rate", 0.0, true),
                  p_int("max_epochs", "10000", "epoch cap", 1), p_int("test_samples", "200", "held-out draws", 1)}});
    c.push_back({"double_meaning_l1", "Mixed-domain L1 minimizer is the coordinatewise median; scalar subgradient training",
                 "Double Meaning theorem, L1 case", "domain_shift.double_meaning_minimizer, domain_shift.train_mixed_restorer",
                 {p_list("scales", "1,2,5", "per-domain scalar inverses", 0.0, true),
                  p_int("samples", "500", "training draws", 2), p_real("lr", "0.01", "initial learning rate", 0.0, true),
                  p_int("max_epochs", "10000", "epoch cap", 1)}});
    c.push_back({"resolution_shift", "Mixed training over two blur resolutions predicts (I + H_12) x2 / 2",
                 "resolution-shift example with sigma2 = 2 sigma1", "domain_shift.resolution_shift_prediction",
                 {p_real("sigma1", "1", "finer blur width", 0.0, true), p_real("sigma2", "2", "coarser blur width", 0.0, true),
                  p_int("n", "64", "signal length", 16), p_int("margin", "8", "boundary samples excluded", 0),
                  p_real("smooth", "1", "width of the smoothing applied to the training signals", 0.0, true),
                  p_int("test_samples", "50", "held-out draws", 1)}});
    c.push_back({"mixed_vs_targeted", "Per-domain error of mixed vs targeted restorers on overlapping and disjoint domains",
                 "averaged output across domains; disjoint supports avoid averaging", "domain_shift.mixed_vs_targeted_report",
                 {p_int("n", "32", "signal length", 8), p_real("sigma1", "1", "finer blur width", 0.0, true),
                  p_real("sigma2", "2", "coarser blur width", 0.0, true), p_int("samples", "512", "training draws", 2),
                  p_int("test_samples", "500", "test draws per domain", 1),
                  p_choice("solver", "ls", "training solver", {"ls", "gd"})}});
    c.push_back({"sparse_noiseless_recovery", "Exact recovery of separated spikes from noiseless blurred data; penalty path",
                 "noiseless MAP recovery of sparse spikes", "sparse_recovery.l1_map_solve",
                 {p_list("sizes", "32,64,128,256", "signal lengths", 8.0), p_int("trials", "4", "instances per size", 1),
                  p_int("spikes", "3", "spikes per instance", 1), p_real("kernel_sigma", "1", "kernel width", 0.0, true)}});
    c.push_back({"sparse_certificate_sweep", "l1 recovery bound on noisy blurred spikes",
                 "l1 error bound 4 rho delta / (beta gamma0)", "sparse_recovery.recovery_certificate",
                 {p_int("draws", "100", "noisy draws", 1), p_int("n", "64", "signal length", 8),
                  p_int("spikes", "3", "spikes per draw", 1), p_real("sigma_n", "0.05", "noise level", 0.0),
                  p_real("kernel_sigma", "1", "kernel width", 0.0, true)}});
    c.push_back({"lambda_pipeline", "Rate estimation from clean vs restored spike trains",
                 "denoising does not improve the downstream rate estimate", "sparse_recovery.lambda_pipeline_experiment",
                 {p_real("lambda", "1", "true rate", 0.0, true), p_int("m", "100", "signals per replicate", 3),
                  p_real("sigma_n", "0.1", "AWGN level", 0.0), p_int("replicates", "1000", "Monte Carlo replicates", 1),
                  p_int("n", "32", "signal length", 8), p_int("spikes", "2", "spikes per signal", 1),
                  p_real("kernel_sigma", "1", "kernel width", 0.0, true),
                  p_choice("restorer", "penalized", "restoration stage", {"penalized", "constrained", "oracle"}),
                  p_bool("oracle_check", "true", "also run the norm-preserving oracle")}});
    c.push_back({"pr_gap", "Proportional-representation gap of several restorers on the naive tree",
                 "posterior sampling achieves PR and CPR", "class_bounds.pr_gap", {}});
    c.push_back({"rao_blackwell_demo", "Conditioning an unbiased estimator on the toss count",
                 "Rao-Blackwell improvement", "info_metrics.rao_blackwellize",
                 {p_list("grid", "0.2,0.4,0.6,0.8", "success probabilities", 0.0, true),
                  p_int("tosses", "2", "tosses per observation", 1, 12)}});
    c.push_back({"entropy_error_bound", "exp(2h) / (2 pi e) against the MMSE on gridded densities",
                 "estimation error and differential entropy", "info_metrics.entropy_error_bound",
                 {p_real("sigma", "1", "Gaussian standard deviation", 0.0, true),
                  p_int("points", "20001", "grid cells", 101), p_real("halfwidth", "10", "grid half-width in sigmas", 4.0)}});
    return c;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, out);
    return r.ec == std::errc() && r.ptr == end && !s.empty();
}

bool parse_double(std::string_view s, double& out) {
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, out);
    return r.ec == std::errc() && r.ptr == end && !s.empty() && std::isfinite(out);
}

std::optional<bool> parse_bool(std::string_view s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    return std::nullopt;
}

std::string bound_text(const ParamSpec& p) {
    std::string t;
    char buf[64];
    if (p.min) {
        std::snprintf(buf, sizeof buf, "%.17g", *p.min);
        t += std::string(p.min_exclusive ? "> " : ">= ") + buf;
    }
    if (p.max) {
        std::snprintf(buf, sizeof buf, "%.17g", *p.max);
        t += std::string(t.empty() ? "" : " and ") + "<= " + buf;
    }
    return t;
}

bool in_range(const ParamSpec& p, double v) {
    if (p.min && (p.min_exclusive ? !(v > *p.min) : !(v >= *p.min))) {
        return false;
    }
    return !(p.max && v > *p.max);
}

// Parses one value against its spec; returns an error message or the typed value.
std::variant<std::string, nlohmann::ordered_json> typed_value(const ParamSpec& p, std::string_view raw) {
    const std::string text = trim(raw);
    switch (p.type) {
    case ParamType::Int: {
        std::uint64_t v = 0;
        if (!parse_u64(text, v)) {
            return "expected a nonnegative integer, got '" + text + "'";
        }
        if (!in_range(p, static_cast<double>(v))) {
            return "must be " + bound_text(p);
        }
        return nlohmann::ordered_json(v);
    }
    case ParamType::Real: {
        double v = 0.0;
        if (!parse_double(text, v)) {
            return "expected a finite number, got '" + text + "'";
        }
        if (!in_range(p, v)) {
            return "must be " + bound_text(p);
        }
        return nlohmann::ordered_json(v);
    }
    case ParamType::Bool: {
        const auto v = parse_bool(text);
        if (!v) {
            return "expected true or false, got '" + text + "'";
        }
        return nlohmann::ordered_json(*v);
    }
    case ParamType::RealList: {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v = 0.0;
            if (!parse_double(trim(item), v)) {
                return "expected a comma-separated list of numbers, got '" + text + "'";
            }
            if (!in_range(p, v)) {
                return "every entry must be " + bound_text(p);
            }
            arr.push_back(v);
        }
        if (arr.empty()) {
            return std::string("list is empty");
        }
        return arr;
    }
    case ParamType::Choice:
        if (std::find(p.choices.begin(), p.choices.end(), text) == p.choices.end()) {
            std::string all;
            for (const auto& c : p.choices) {
                all += (all.empty() ? "" : ", ") + c;
            }
            return "must be one of " + all;
        }
        return nlohmann::ordered_json(text);
    }
    return std::string("unsupported parameter type");
}

} // namespace

const std::vector<ExperimentInfo>& experiment_catalog() {
    static const std::vector<ExperimentInfo> catalog = build_catalog();
    return catalog;
}

const ExperimentInfo* find_experiment(std::string_view id) {
    for (const auto& e : experiment_catalog()) {
        if (e.id == id) {
            return &e;
        }
    }
    return nullptr;
}

nlohmann::ordered_json catalog_json() {
    static const char* type_names[] = {"int", "real", "bool", "real_list", "choice"};
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : experiment_catalog()) {
        nlohmann::ordered_json entry;
        entry["id"] = e.id;
        entry["description"] = e.description;
        entry["anchor"] = e.anchor;
        entry["operation"] = e.operation;
        nlohmann::ordered_json params = nlohmann::ordered_json::array();
        for (const auto& p : e.params) {
            nlohmann::ordered_json q;
            q["name"] = p.name;
            q["type"] = type_names[static_cast<int>(p.type)];
            q["default"] = p.default_value;
            q["description"] = p.description;
            if (!p.choices.empty()) {
                q["choices"] = p.choices;
            }
            const auto b = bound_text(p);
            if (!b.empty()) {
                q["range"] = b;
            }
            params.push_back(std::move(q));
        }
        entry["params"] = std::move(params);
        arr.push_back(std::move(entry));
    }
    return arr;
}

void apply_override(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in) {
    const std::string key = trim(key_in);
    const std::string value = trim(value_in);
    if (key.empty()) {
        throw Error(ErrorCode::InvalidOverride, "empty key");
    }
    if (key == "id" || key == "experiment.id") {
        cfg.id = value;
    } else if (key == "seed" || key == "experiment.seed") {
        std::uint64_t s = 0;
        if (!parse_u64(value, s)) {
            throw Error(ErrorCode::InvalidOverride, "seed must be an unsigned 64-bit integer, got '" + value + "'");
        }
        cfg.seed = s;
        cfg.seed_given = true;
    } else if (key.rfind("params.", 0) == 0) {
        cfg.overrides[key.substr(7)] = value;
    } else if (key.find('.') != std::string::npos) {
        cfg.unknown_keys.push_back(key);
    } else {
        cfg.overrides[key] = value;
    }
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const auto hash = raw.find_first_of("#;");
        const std::string line = trim(raw.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const std::string where = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(ErrorCode::InvalidConfig, where + ": unterminated section header");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section != "experiment" && section != "params") {
                throw Error(ErrorCode::InvalidConfig, where + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidConfig, where + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) {
            throw Error(ErrorCode::InvalidConfig, where + ": key '" + key + "' outside any section");
        }
        if (section == "experiment") {
            if (key == "id" || key == "seed") {
                try {
                    apply_override(cfg, key, value);
                } catch (const Error& e) {
                    throw Error(ErrorCode::InvalidConfig, where + ": " + e.what());
                }
            } else {
                cfg.unknown_keys.push_back("experiment." + key);
            }
        } else {
            cfg.overrides[key] = value;
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<Diagnostic> validate(const ExperimentConfig& cfg) {
    std::vector<Diagnostic> out;
    for (const auto& k : cfg.unknown_keys) {
        out.push_back({Severity::Error, k, "unknown key '" + k + "'"});
    }
    if (cfg.id.empty()) {
        out.push_back({Severity::Error, "experiment.id", "missing experiment id"});
        return out;
    }
    const auto* info = find_experiment(cfg.id);
    if (!info) {
        out.push_back({Severity::Error, "experiment.id", "unknown experiment '" + cfg.id + "'"});
        return out;
    }
    if (!cfg.seed_given) {
        out.push_back({Severity::Warning, "experiment.seed", "seed missing; defaulted to 0"});
    }
    for (const auto& [key, value] : cfg.overrides) {
        const auto it = std::find_if(info->params.begin(), info->params.end(),
                                     [&](const ParamSpec& p) { return p.name == key; });
        if (it == info->params.end()) {
            out.push_back({Severity::Error, "params." + key, "unknown key '" + key + "' for " + cfg.id});
            continue;
        }
        const auto v = typed_value(*it, value);
        if (const auto* msg = std::get_if<std::string>(&v)) {
            out.push_back({Severity::Error, "params." + key, *msg});
        }
    }
    if (cfg.id == "resolution_shift" || cfg.id == "mixed_vs_targeted") {
        const auto real = [&](const std::string& k, double def) {
            const auto it = cfg.overrides.find(k);
            double v = def;
            if (it != cfg.overrides.end() && !parse_double(trim(it->second), v)) {
                return def;
            }
            return v;
        };
        if (!(real("sigma2", 2.0) > real("sigma1", 1.0))) {
            out.push_back({Severity::Error, "params.sigma2", "must exceed sigma1 (the coarser resolution)"});
        }
    }
    return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

nlohmann::ordered_json to_json(const std::vector<Diagnostic>& diags) {
    nlohmann::ordered_json doc;
    doc["valid"] = !has_errors(diags);
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : diags) {
        nlohmann::ordered_json e;
        e["severity"] = d.severity == Severity::Error ? "error" : "warning";
        e["path"] = d.path;
        e["message"] = d.message;
        arr.push_back(std::move(e));
    }
    doc["diagnostics"] = std::move(arr);
    return doc;
}

void write_csv(std::ostream& os, const Table& t) {
    const auto text = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) {
            return s;
        }
        std::string q = "\"";
        for (char c : s) {
            q += c == '"' ? std::string("\"\"") : std::string(1, c);
        }
        return q + "\"";
    };
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        os << (c ? "," : "") << text(t.columns[c]);
    }
    os << '\n';
    char buf[40];
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) {
                os << ',';
            }
            if (const auto* d = std::get_if<double>(&row[c])) {
                std::snprintf(buf, sizeof buf, "%.17g", *d);
                os << buf;
            } else if (const auto* i = std::get_if<std::int64_t>(&row[c])) {
                os << *i;
            } else {
                os << text(std::get<std::string>(row[c]));
            }
        }
        os << '\n';
    }
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    const auto diags = validate(cfg);
    for (const auto& d : diags) {
        if (d.severity != Severity::Error) {
            continue;
        }
        if (d.path == "experiment.id" && !cfg.id.empty()) {
            throw Error(ErrorCode::UnknownExperiment, d.message);
        }
        throw Error(d.path.rfind("params.", 0) == 0 ? ErrorCode::InvalidOverride : ErrorCode::InvalidConfig,
                    d.path + ": " + d.message);
    }
    const auto& info = *find_experiment(cfg.id);
    detail::Params params;
    for (const auto& p : info.params) {
        const auto it = cfg.overrides.find(p.name);
        const auto v = typed_value(p, it == cfg.overrides.end() ? p.default_value : it->second);
        params.values[p.name] = std::get<nlohmann::ordered_json>(v);
    }
    detail::Context ctx{params, cfg.seed, std::max(1u, cfg.jobs), {}};
    ctx.out.report["experiment"] = cfg.id;
    ctx.out.report["seed"] = cfg.seed;
    nlohmann::ordered_json snapshot = nlohmann::ordered_json::object();
    for (const auto& p : info.params) {
        snapshot[p.name] = params.values.at(p.name);
    }
    ctx.out.report["params"] = std::move(snapshot);
    ctx.out.report["results"] = nlohmann::ordered_json::object();
    ctx.out.report["verdicts"] = nlohmann::ordered_json::array();
    detail::dispatch(cfg.id, ctx);
    bool all = true;
    for (const auto& v : ctx.out.report["verdicts"]) {
        all = all && v["passed"].get<bool>();
    }
    ctx.out.all_pass = all;
    ctx.out.report["all_pass"] = all;
    return std::move(ctx.out);
}

void write_outputs(const ExperimentOutput& output, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path target = fs::absolute(dir).lexically_normal();
    const fs::path parent = target.parent_path();
    const fs::path staging = parent / (target.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(staging, ec);
    try {
        fs::create_directories(staging / "tables");
        fs::create_directories(staging / "plotdata");
        const auto open = [](const fs::path& p) {
            std::ofstream f(p, std::ios::binary);
            if (!f) {
                throw Error(ErrorCode::Io, "cannot write " + p.string());
            }
            return f;
        };
        {
            auto f = open(staging / "report.json");
            f << output.report.dump(2) << '\n';
        }
        for (const auto& t : output.tables) {
            auto f = open(staging / "tables" / (t.name + ".csv"));
            write_csv(f, t);
        }
        for (const auto& t : output.plots) {
            auto f = open(staging / "plotdata" / (t.name + ".csv"));
            write_csv(f, t);
        }
        fs::remove_all(target);
        fs::rename(staging, target);
    } catch (const fs::filesystem_error& e) {
        fs::remove_all(staging, ec);
        throw Error(ErrorCode::Io, e.what());
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
}

} // namespace estlab
