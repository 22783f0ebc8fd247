#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"

#include "estlab/experiments.hpp"

using namespace estlab;
namespace fs = std::filesystem;

namespace {

bool has_diag(const std::vector<Diagnostic>& d, Severity s, const std::string& path) {
    for (const auto& x : d) {
        if (x.severity == s && x.path == path) {
            return true;
        }
    }
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("catalog is complete") {
    const auto& cat = experiment_catalog();
    CHECK(cat.size() >= 16);
    std::set<std::string> ids;
    for (const auto& e : cat) {
        ids.insert(e.id);
        CHECK_FALSE(e.description.empty());
        CHECK_FALSE(e.anchor.empty());
        CHECK(e.operation.find('.') != std::string::npos);
    }
    for (const char* id : {"naive_tree", "dpi_random_chains", "crb_gaussian_mean", "crb_laplace_rate",
                           "bayes_ordering_audit", "pe_separability_identity", "double_meaning_mse",
                           "double_meaning_l1", "resolution_shift", "mixed_vs_targeted", "sparse_noiseless_recovery",
                           "sparse_certificate_sweep", "lambda_pipeline", "pr_gap", "rao_blackwell_demo",
                           "entropy_error_bound"}) {
        CHECK(ids.count(id) == 1);
    }
}

TEST_CASE("config parsing") {
    const auto c = parse_config("# comment\n[experiment]\nid = crb_gaussian_mean\nseed = 7\n\n[params]\n"
                                "sigma_x = 2 ; trailing\nm=5\n");
    CHECK(c.id == "crb_gaussian_mean");
    CHECK(c.seed == 7);
    CHECK(c.seed_given);
    CHECK(c.overrides.at("sigma_x") == "2");
    CHECK(c.overrides.at("m") == "5");
    CHECK_THROWS_CODE(parse_config("[experiment]\nid crb\n"), ErrorCode::InvalidConfig);
    CHECK_THROWS_CODE(parse_config("[other]\nx = 1\n"), ErrorCode::InvalidConfig);
}

TEST_CASE("validation diagnostics") {
    auto c = parse_config("[experiment]\nid = crb_gaussian_mean\n[params]\nsigma_x = 0\nbogus = 1\n");
    const auto d = validate(c);
    CHECK(has_diag(d, Severity::Warning, "experiment.seed"));
    CHECK(has_diag(d, Severity::Error, "params.sigma_x"));
    CHECK(has_diag(d, Severity::Error, "params.bogus"));
    CHECK(has_errors(d));
    for (const auto& x : d) {
        if (x.path == "params.sigma_x") {
            CHECK(x.message.find("> 0") != std::string::npos);
        }
        if (x.path == "params.bogus") {
            CHECK(x.message.find("bogus") != std::string::npos);
        }
    }

    ExperimentConfig unknown;
    unknown.id = "no_such";
    CHECK(has_errors(validate(unknown)));
    CHECK_THROWS_CODE(run_experiment(unknown), ErrorCode::UnknownExperiment);

    ExperimentConfig ok;
    ok.id = "naive_tree";
    apply_override(ok, "seed", "3");
    apply_override(ok, "params.draws", "10");
    CHECK_FALSE(has_errors(validate(ok)));
    CHECK(ok.seed == 3);
    apply_override(ok, "draws", "ten");
    CHECK_THROWS_CODE(run_experiment(ok), ErrorCode::InvalidOverride);
}

TEST_CASE("csv dialect") {
    Table t{"t", {"name", "x", "n"}, {{std::string("a,b"), 0.1, std::int64_t{3}}, {std::string("q\"r"), 1.0, std::int64_t{-1}}}};
    std::ostringstream os;
    write_csv(os, t);
    CHECK(os.str() == "name,x,n\n\"a,b\",0.10000000000000001,3\n\"q\"\"r\",1,-1\n");
}

TEST_CASE("outputs are staged and replaced atomically") {
    const fs::path dir = fs::temp_directory_path() / "estlab_unit_outputs";
    fs::remove_all(dir);
    fs::create_directories(dir / "stale");

    ExperimentConfig c;
    c.id = "naive_tree";
    c.seed = 1;
    c.seed_given = true;
    const auto out = run_experiment(c);
    CHECK(out.all_pass);
    write_outputs(out, dir);
    CHECK(fs::exists(dir / "report.json"));
    CHECK_FALSE(fs::exists(dir / "stale"));
    CHECK_FALSE(fs::exists(fs::path(dir.string() + ".partial")));

    const auto first = slurp(dir / "report.json");
    write_outputs(run_experiment(c), dir);
    CHECK(slurp(dir / "report.json") == first);
    fs::remove_all(dir);
}

TEST_CASE("report structure") {
    ExperimentConfig c;
    c.id = "crb_gaussian_mean";
    c.seed = 2;
    apply_override(c, "replicates", "1000");
    const auto out = run_experiment(c);
    const auto& r = out.report;
    CHECK(r["experiment"] == "crb_gaussian_mean");
    CHECK(r["seed"] == 2);
    CHECK(r["params"]["replicates"] == 1000);
    CHECK(r["params"]["sigma_x"] == 1.0);
    CHECK(r["results"]["crb"]["value"] == doctest::Approx(0.1));
    CHECK(r["results"]["crb"]["provenance"]["kind"] == "exact");
    CHECK(r.contains("verdicts"));
    CHECK_FALSE(r.contains("jobs"));
}
