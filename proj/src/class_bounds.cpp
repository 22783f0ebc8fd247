#include "estlab/class_bounds.hpp"

#include <algorithm>
#include <cmath>

#include "estlab/error.hpp"

namespace estlab {

CostMatrix CostMatrix::zero_one(std::size_t classes) {
    std::vector<std::vector<double>> c(classes, std::vector<double>(classes, 1.0));
    for (std::size_t i = 0; i < classes; ++i) {
        c[i][i] = 0.0;
    }
    return CostMatrix(std::move(c));
}

CostMatrix::CostMatrix(std::vector<std::vector<double>> c) : c_(std::move(c)) {
    if (c_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty cost matrix");
    }
    for (const auto& row : c_) {
        if (row.size() != c_.size()) {
            throw Error(ErrorCode::InvalidArgument, "cost matrix must be square");
        }
        for (double v : row) {
            if (!(v >= 0.0)) {
                throw Error(ErrorCode::InvalidArgument, "costs must be nonnegative");
            }
        }
    }
}

nlohmann::json to_json(const ClassificationReport& r, const Labels& outcomes, const Labels& classes) {
    nlohmann::json doc;
    doc["stage"] = r.stage;
    doc["P_e"] = r.p_error;
    doc["risk"] = r.risk;
    if (r.j1) {
        doc["J1"] = *r.j1;
    } else {
        doc["J1"] = nullptr;
    }
    nlohmann::json regions = nlohmann::json::object();
    for (std::size_t o = 0; o < r.regions.size(); ++o) {
        regions[outcomes.at(o)] = classes.at(r.regions[o]);
    }
    doc["regions"] = std::move(regions);
    nlohmann::json ties = nlohmann::json::array();
    for (auto o : r.ties) {
        ties.push_back(outcomes.at(o));
    }
    doc["ties"] = std::move(ties);
    return doc;
}

namespace {

void check_shapes(const FiniteDistribution& priors, const ConditionalTable& cc) {
    if (cc.input() != priors.support()) {
        throw Error(ErrorCode::SupportMismatch, "class conditionals and priors disagree on theta support");
    }
}

} // namespace

ClassificationReport bayes_classify(const FiniteDistribution& priors, const ConditionalTable& cc,
                                    const CostMatrix& cost, std::string stage) {
    check_shapes(priors, cc);
    const std::size_t mcls = priors.size();
    if (cost.size() != mcls) {
        throw Error(ErrorCode::SupportMismatch, "cost matrix size differs from class count");
    }
    ClassificationReport r;
    r.stage = std::move(stage);
    r.regions.resize(cc.cols());
    double err = 0.0, risk = 0.0;
    for (std::size_t o = 0; o < cc.cols(); ++o) {
        std::size_t best = 0;
        double best_cost = INFINITY;
        bool tied = false;
        for (std::size_t i = 0; i < mcls; ++i) {
            double c = 0.0;
            for (std::size_t j = 0; j < mcls; ++j) {
                c += cost(i, j) * priors[j] * cc(j, o);
            }
            if (c < best_cost) {
                best_cost = c;
                best = i;
                tied = false;
            } else if (c == best_cost) {
                tied = true;
            }
        }
        r.regions[o] = best;
        if (tied) {
            r.ties.push_back(o);
        }
        risk += best_cost;
        for (std::size_t j = 0; j < mcls; ++j) {
            if (j != best) {
                err += priors[j] * cc(j, o);
            }
        }
    }
    r.risk = risk;
    r.p_error = err;
    if (mcls == 2) {
        r.j1 = separability(priors, cc, 1.0);
    }
    return r;
}

double bayes_risk(const FiniteDistribution& priors, const ConditionalTable& cc, const CostMatrix& cost) {
    return bayes_classify(priors, cc, cost).risk;
}

double bayes_error(const FiniteDistribution& priors, const ConditionalTable& cc) {
    check_shapes(priors, cc);
    // sum_o (p(o) - max_i P(theta_i) p(o|theta_i)), written without cancellation
    double err = 0.0;
    for (std::size_t o = 0; o < cc.cols(); ++o) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < priors.size(); ++i) {
            if (priors[i] * cc(i, o) > priors[best] * cc(best, o)) {
                best = i;
            }
        }
        for (std::size_t j = 0; j < priors.size(); ++j) {
            if (j != best) {
                err += priors[j] * cc(j, o);
            }
        }
    }
    return err;
}

double separability(const FiniteDistribution& priors, const ConditionalTable& cc, double alpha) {
    check_shapes(priors, cc);
    if (priors.size() != 2) {
        throw Error(ErrorCode::NotBinary, "separability is defined for two classes");
    }
    if (!(alpha > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
    }
    double j = 0.0;
    for (std::size_t o = 0; o < cc.cols(); ++o) {
        const double a = priors[0] * cc(0, o);
        const double b = priors[1] * cc(1, o);
        const double p = a + b;
        if (p <= 0.0) {
            continue;
        }
        // p(o) * |q1 - q2|^alpha with q_i = P(theta_i | o)
        j += p * std::pow(std::abs(a - b) / p, alpha);
    }
    return j;
}

double separability_integral(const FiniteDistribution& priors, const ConditionalTable& cc) {
    check_shapes(priors, cc);
    if (priors.size() != 2) {
        throw Error(ErrorCode::NotBinary, "separability is defined for two classes");
    }
    double j = 0.0;
    for (std::size_t o = 0; o < cc.cols(); ++o) {
        j += std::abs(priors[0] * cc(0, o) - priors[1] * cc(1, o));
    }
    return j;
}

ConditionalTable stage_conditionals(const JointDistribution& joint, std::string_view axis) {
    return joint.conditional(kThetaAxis, axis);
}

OrderingAudit theorem_ordering_audit(const PipelineChain& chain) {
    if (!chain.has_restorer()) {
        throw Error(ErrorCode::InvalidArgument, "ordering audit needs a restorer stage");
    }
    const auto joint = assemble_joint(chain);
    OrderingAudit a;
    a.pe_x = bayes_error(chain.prior, stage_conditionals(joint, kXAxis));
    a.pe_y = bayes_error(chain.prior, stage_conditionals(joint, kYAxis));
    a.pe_xhat = bayes_error(chain.prior, stage_conditionals(joint, kXhatAxis));
    a.conditional_restorer = chain.restorer_depends_on_theta();
    if (a.conditional_restorer) {
        a.holds = std::abs(a.pe_xhat - a.pe_x) <= kOrderingTol;
        if (!a.holds) {
            throw Error(ErrorCode::OrderingViolation, "conditional perfect perception changed the Bayes error");
        }
    } else {
        a.holds = a.pe_xhat >= a.pe_y - kOrderingTol && a.pe_y >= a.pe_x - kOrderingTol;
        if (!a.holds) {
            throw Error(ErrorCode::OrderingViolation, "Bayes error decreased along the chain");
        }
    }
    return a;
}

PrGap pr_gap(const PipelineChain& chain, const std::map<std::string, std::size_t>& partition, std::size_t classes) {
    const auto& xs = chain.family.output();
    for (const auto& x : xs) {
        const auto it = partition.find(x);
        if (it == partition.end() || it->second >= classes) {
            throw Error(ErrorCode::PartitionIncomplete, "X label '" + x + "' has no class region");
        }
    }
    if (!chain.has_restorer()) {
        throw Error(ErrorCode::InvalidArgument, "PR gap needs a restorer stage");
    }
    const auto joint = assemble_joint(chain);
    const auto px = marginal_distribution(joint, kXAxis);
    const auto ph = marginal_distribution(joint, kXhatAxis);
    PrGap g;
    g.p_x.assign(classes, 0.0);
    g.p_xhat.assign(classes, 0.0);
    for (std::size_t i = 0; i < px.size(); ++i) {
        g.p_x[partition.at(px.support()[i])] += px[i];
    }
    for (std::size_t i = 0; i < ph.size(); ++i) {
        const auto it = partition.find(ph.support()[i]);
        if (it == partition.end()) {
            g.out_of_partition += ph[i];
        } else {
            g.p_xhat[it->second] += ph[i];
        }
    }
    g.gap.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        g.gap[c] = std::abs(g.p_xhat[c] - g.p_x[c]);
    }
    return g;
}

} // namespace estlab
