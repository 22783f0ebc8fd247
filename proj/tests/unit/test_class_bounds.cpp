#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "support.hpp"

#include "estlab/class_bounds.hpp"
#include "estlab/estimators.hpp"
#include "estlab/experiments.hpp"
#include "estlab/prob.hpp"
#include "estlab/rng.hpp"

using namespace estlab;

namespace {

// sum_o min_j P(theta_j) p(o | theta_j)
double brute_pe(const FiniteDistribution& prior, const ConditionalTable& t) {
    double pe = 0.0;
    for (std::size_t o = 0; o < t.cols(); ++o) {
        double total = 0.0, best = 0.0;
        for (std::size_t j = 0; j < t.rows(); ++j) {
            const double w = prior[j] * t(j, o);
            total += w;
            best = std::max(best, w);
        }
        pe += total - best;
    }
    return pe;
}

} // namespace

TEST_CASE("bayes error matches brute force and the separability identity") {
    Rng rng = make_stream(21, 0);
    for (int i = 0; i < 200; ++i) {
        const auto chain = random_chain(rng);
        const double pe = bayes_error(chain.prior, chain.family);
        CHECK(pe == doctest::Approx(brute_pe(chain.prior, chain.family)).epsilon(1e-12));
        CHECK(std::abs(pe - 0.5 * (1 - separability(chain.prior, chain.family, 1.0))) < 1e-10);
        CHECK(std::abs(pe - 0.5 * (1 - separability_integral(chain.prior, chain.family))) < 1e-10);
    }
}

TEST_CASE("degenerate prior has zero error") {
    const FiniteDistribution prior({"a", "b"}, {1.0, 0.0});
    const ConditionalTable t({"a", "b"}, {"u", "v"}, {{0.3, 0.7}, {0.6, 0.4}});
    CHECK(bayes_error(prior, t) == 0.0);
    CHECK(separability(prior, t, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("non-binary separability throws") {
    RandomChainShape s;
    s.classes = 3;
    Rng rng = make_stream(1, 0);
    const auto chain = random_chain(rng, s);
    CHECK_THROWS_CODE(separability(chain.prior, chain.family, 1.0), ErrorCode::NotBinary);
}

TEST_CASE("cost matrix decisions") {
    const FiniteDistribution prior({"a", "b"}, {0.5, 0.5});
    const ConditionalTable t({"a", "b"}, {"u", "v"}, {{0.6, 0.4}, {0.4, 0.6}});
    const auto zero_one = bayes_classify(prior, t, CostMatrix::zero_one(2));
    CHECK(zero_one.regions == std::vector<std::size_t>{0, 1});
    CHECK(zero_one.p_error == doctest::Approx(0.4));
    // Deciding a when the truth is b costs 10: always decide b.
    const auto skewed = bayes_classify(prior, t, CostMatrix({{0, 10}, {1, 0}}));
    CHECK(skewed.regions == std::vector<std::size_t>{1, 1});
    CHECK(skewed.risk == doctest::Approx(0.5));
}

TEST_CASE("stage ordering") {
    Rng rng = make_stream(31, 0);
    for (int i = 0; i < 200; ++i) {
        const auto a = theorem_ordering_audit(random_chain(rng));
        CHECK(a.holds);
        CHECK(a.pe_xhat + kOrderingTol >= a.pe_y);
        CHECK(a.pe_y + kOrderingTol >= a.pe_x);
    }
    const auto naive = assemble_joint(naive_tree_chain());
    const auto chain = with_restorer(naive_tree_chain(), perfect_perception_restorer(naive, true, ThetaOracle{}));
    const auto c = theorem_ordering_audit(chain);
    CHECK(c.conditional_restorer);
    CHECK(c.pe_xhat == doctest::Approx(c.pe_x));
}

TEST_CASE("posterior sampler has no proportional-representation gap") {
    const auto base = naive_tree_chain();
    const auto joint = assemble_joint(base);
    const auto chain = with_restorer(base, posterior_sampler(joint));
    std::map<std::string, std::size_t> partition;
    for (const auto& x : base.family.output()) {
        partition[x] = std::stoi(x) <= 2 ? 0 : 1;
    }
    const auto gap = pr_gap(chain, partition, 2);
    for (double g : gap.gap) {
        CHECK(g <= 1e-9);
    }
    const auto mmse = pr_gap(with_restorer(base, mmse_restorer(joint)), partition, 2);
    CHECK(mmse.out_of_partition > 0.0);
    CHECK_THROWS_CODE(pr_gap(chain, {{"0", 0}}, 2), ErrorCode::PartitionIncomplete);
}
