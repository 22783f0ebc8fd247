#pragma once

// Bayes classification over finite outcomes: decision regions, risk,
// separability, the stage-ordering audit and the proportional-representation gap.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "estlab/prob.hpp"

namespace estlab {

class CostMatrix {
public:
    // 0-1 cost: c_ij = 1 for i != j.
    static CostMatrix zero_one(std::size_t classes);
    explicit CostMatrix(std::vector<std::vector<double>> c);

    std::size_t size() const noexcept { return c_.size(); }
    // Cost of deciding class i when the truth is class j.
    double operator()(std::size_t i, std::size_t j) const { return c_[i][j]; }

private:
    std::vector<std::vector<double>> c_;
};

struct ClassificationReport {
    std::string stage;
    std::vector<std::size_t> regions; // outcome index -> decided class index
    std::vector<std::size_t> ties;    // outcomes whose decision was a tie
    double risk = 0.0;
    double p_error = 0.0;
    std::optional<double> j1; // binary problems only
};

nlohmann::json to_json(const ClassificationReport& report, const Labels& outcomes, const Labels& classes);

// argmin_i sum_j c_ij P(theta_j) p(o | theta_j) per outcome; ties to the lowest class.
ClassificationReport bayes_classify(const FiniteDistribution& priors, const ConditionalTable& class_conditionals,
                                    const CostMatrix& cost, std::string stage = "X");
double bayes_risk(const FiniteDistribution& priors, const ConditionalTable& class_conditionals, const CostMatrix& cost);
// Minimum probability of error (0-1 cost).
double bayes_error(const FiniteDistribution& priors, const ConditionalTable& class_conditionals);

// E |q1(o) - q2(o)|^alpha with q the class posteriors. Throws NotBinary for M > 2.
double separability(const FiniteDistribution& priors, const ConditionalTable& class_conditionals, double alpha);
// sum_o |beta p(o|theta1) - (1 - beta) p(o|theta2)|
double separability_integral(const FiniteDistribution& priors, const ConditionalTable& class_conditionals);

struct OrderingAudit {
    double pe_x = 0.0;
    double pe_y = 0.0;
    double pe_xhat = 0.0;
    bool conditional_restorer = false;
    bool holds = true;
};

inline constexpr double kOrderingTol = 1e-9;

// Exact P_e at X, Y and Xhat. theta-agnostic restorer: P_e(xhat) >= P_e(y) >= P_e(x);
// per-class restorer: P_e(xhat) = P_e(x). Violations throw OrderingViolation.
OrderingAudit theorem_ordering_audit(const PipelineChain& chain);
// Class-conditional law of one stage, p(stage | theta).
ConditionalTable stage_conditionals(const JointDistribution& joint, std::string_view axis);

struct PrGap {
    std::vector<double> gap;        // |P(xhat in X_i) - P(x in X_i)| per class
    std::vector<double> p_x;        // P(x in X_i)
    std::vector<double> p_xhat;     // P(xhat in X_i)
    double out_of_partition = 0.0;  // P(xhat matches no class region)
};

// `partition` maps every X label to its class index. Xhat labels are matched
// by name; outputs outside the X support count as out-of-partition mass.
PrGap pr_gap(const PipelineChain& chain, const std::map<std::string, std::size_t>& partition, std::size_t classes);

} // namespace estlab
