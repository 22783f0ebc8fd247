#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "estlab/experiments.hpp"

namespace estlab::detail {

struct Params {
    std::map<std::string, nlohmann::ordered_json> values;

    double real(const std::string& k) const { return values.at(k).get<double>(); }
    std::size_t count(const std::string& k) const { return values.at(k).get<std::size_t>(); }
    bool flag(const std::string& k) const { return values.at(k).get<bool>(); }
    std::string choice(const std::string& k) const { return values.at(k).get<std::string>(); }
    std::vector<double> list(const std::string& k) const { return values.at(k).get<std::vector<double>>(); }
};

struct Context {
    const Params& params;
    std::uint64_t seed;
    unsigned jobs;
    ExperimentOutput out;

    void exact(const std::string& name, nlohmann::ordered_json value) {
        nlohmann::ordered_json r;
        r["value"] = std::move(value);
        r["provenance"]["kind"] = "exact";
        out.report["results"][name] = std::move(r);
    }

    void monte_carlo(const std::string& name, nlohmann::ordered_json value, std::size_t replicates, double stderr_) {
        nlohmann::ordered_json r;
        r["value"] = std::move(value);
        r["provenance"]["kind"] = "monte-carlo";
        r["provenance"]["replicates"] = replicates;
        r["provenance"]["stderr"] = stderr_;
        out.report["results"][name] = std::move(r);
    }

    // `invariant` names the property the verdict checks.
    void verdict(const std::string& name, const std::string& invariant, bool passed) {
        nlohmann::ordered_json v;
        v["name"] = name;
        v["invariant"] = invariant;
        v["passed"] = passed;
        out.report["verdicts"].push_back(std::move(v));
    }
};

void dispatch(const std::string& id, Context& ctx);

} // namespace estlab::detail
