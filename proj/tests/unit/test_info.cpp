#include <cmath>
#include <numbers>
#include <vector>

#include "support.hpp"

#include "estlab/channels.hpp"
#include "estlab/info.hpp"
#include "estlab/prob.hpp"
#include "estlab/rng.hpp"

using namespace estlab;

namespace {

// Two tosses of a coin with heads probability theta. Outcomes HH, HT, TH, TT.
ConditionalTable two_coin_family(const std::vector<double>& grid) {
    std::vector<std::vector<double>> rows;
    for (double t : grid) {
        rows.push_back({t * t, t * (1 - t), (1 - t) * t, (1 - t) * (1 - t)});
    }
    return ConditionalTable(numeric_labels(grid), {"HH", "HT", "TH", "TT"}, rows);
}

const Labels kOutcomes{"HH", "HT", "TH", "TT"};
const DeterministicMap kHeads{kOutcomes, {"0", "1", "2"}, {2, 1, 1, 0}};
const DeterministicMap kFirst{kOutcomes, {"H", "T"}, {0, 0, 1, 1}};

} // namespace

TEST_CASE("gaussian fisher information closed form and finite differences") {
    for (double sigma : {0.5, 1.0, 2.0}) {
        const auto a = fisher_information(GaussianMean{sigma}, 0.3, 10);
        CHECK(a.J == doctest::Approx(1 / (sigma * sigma)).epsilon(1e-14));
        CHECK(a.J_m == doctest::Approx(10 / (sigma * sigma)).epsilon(1e-14));
        CHECK(a.crb == doctest::Approx(sigma * sigma / 10).epsilon(1e-14));
        const auto fd = fisher_information(quantized_gaussian_mean(sigma, 0.3), 0.3, 10);
        CHECK(fd.method == InfoMethod::FiniteDifference);
        CHECK(std::abs(fd.J - a.J) / a.J < 0.01);
    }
}

TEST_CASE("laplace rate fisher information") {
    for (double lambda : {0.5, 2.0}) {
        const auto a = fisher_information(LaplaceRate{}, lambda, 50);
        CHECK(a.J_m == doctest::Approx(50 / (lambda * lambda)).epsilon(1e-14));
        const auto fd = fisher_information(quantized_laplace_rate(0.5 * lambda, 1.5 * lambda, 40 / lambda, 8000),
                                           lambda, 50);
        CHECK(std::abs(fd.J_m - a.J_m) / a.J_m < 0.01);
    }
}

TEST_CASE("score has zero mean") {
    CHECK(std::abs(score_mean(GaussianMean{1.5}, 0.2)) < 1e-6);
    CHECK(std::abs(score_mean(LaplaceRate{}, 1.3)) < 1e-6); // trapezoid quadrature
    CHECK(std::abs(score_mean(quantized_gaussian_mean(1.0, 0.0), 0.0)) < 1e-8);
    // Gaussian score by hand: (x - mu) / sigma^2
    CHECK(score(GaussianMean{2.0}, 3.0, 1.0) == doctest::Approx(0.5));
    CHECK(score(LaplaceRate{}, 2.0, 0.5) == doctest::Approx(1 / 0.5 - 2.0));
}

TEST_CASE("crb comparison and efficiency") {
    const auto y = fisher_information(GaussianMean{1.0}, 0.0, 4);
    const auto xhat = fisher_information(GaussianMean{2.0}, 0.0, 4);
    CHECK(crb_compare(y, y) == CrbOrdering::Equal);
    CHECK(crb_compare(y, xhat) == CrbOrdering::YTighter);
    CHECK_THROWS_CODE(crb_compare(xhat, y), ErrorCode::DpiViolation);
    CHECK(efficiency(0.25, y).value == doctest::Approx(1.0));
    CHECK(efficiency(0.2, y).super_efficient);
}

TEST_CASE("dpi holds on random chains") {
    Rng rng = make_stream(11, 0);
    for (int i = 0; i < 200; ++i) {
        const auto audit = dpi_audit(random_chain(rng));
        CHECK(audit.monotone);
        CHECK(audit.i_theta_x + kDpiTol >= audit.i_theta_y);
        CHECK(audit.i_theta_y + kDpiTol >= audit.i_theta_xhat);
    }
}

TEST_CASE("two-coin sufficiency") {
    const std::vector<double> grid{0.2, 0.5, 0.9};
    const auto family = two_coin_family(grid);
    const auto prior = FiniteDistribution::uniform(family.input());
    CHECK(sufficiency_check(prior, family, kHeads));
    CHECK(factorization_check(family, kHeads));
    CHECK_FALSE(sufficiency_check(prior, family, kFirst));
    CHECK_FALSE(factorization_check(family, kFirst));

    // I(theta; T) = I(theta; X) exactly for the head count.
    PipelineChain chain{prior, family, kHeads.to_table(), std::nullopt, {}};
    const auto audit = dpi_audit(chain);
    CHECK(audit.x_equals_y);
}

TEST_CASE("rao-blackwell on two coins") {
    const std::vector<double> grid{0.2, 0.5, 0.9};
    const auto family = two_coin_family(grid);
    const std::vector<double> first_is_heads{1, 1, 0, 0};
    const auto rb = rao_blackwellize(family, first_is_heads, kHeads);
    // E[first | heads = t] = t / 2
    REQUIRE(rb.by_statistic.size() == 3);
    CHECK(rb.by_statistic[0] == doctest::Approx(0.0));
    CHECK(rb.by_statistic[1] == doctest::Approx(0.5));
    CHECK(rb.by_statistic[2] == doctest::Approx(1.0));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        CHECK(rb.mean_after[k] == doctest::Approx(t));
        CHECK(rb.variance_before[k] == doctest::Approx(t * (1 - t)));
        CHECK(rb.variance_after[k] == doctest::Approx(t * (1 - t) / 2));
    }
}

TEST_CASE("differential entropy bound") {
    for (double sigma : {0.5, 1.0, 3.0}) {
        CHECK(entropy_error_bound(GaussianMean{sigma}) == doctest::Approx(sigma * sigma).epsilon(1e-12));
        GridDensity g;
        const int points = 20001;
        g.bin_width = 20.0 * sigma / (points - 1);
        for (int i = 0; i < points; ++i) {
            const double x = -10.0 * sigma + i * g.bin_width;
            g.density.push_back(std::exp(-x * x / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * std::numbers::pi)));
        }
        const double h = 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * sigma * sigma);
        CHECK(differential_entropy(g) == doctest::Approx(h).epsilon(1e-6));
        CHECK(entropy_error_bound(g) == doctest::Approx(sigma * sigma).epsilon(0.01));
    }
}
