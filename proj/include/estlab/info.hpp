#pragma once

// Fisher information, Cramer-Rao bounds and the information audits built on
// the exact probability engine.

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "estlab/channels.hpp"
#include "estlab/prob.hpp"

namespace estlab {

// x ~ N(mu, sigma^2) with theta = mu.
struct GaussianMean {
    double sigma = 1.0;
};

// Density lambda * exp(-lambda * ||x||_1); only the l1 norm enters the score.
struct LaplaceRate {};

// theta -> p_theta over a finite support. The pmf can be evaluated at any
// theta inside [lo, hi] so the score can be taken by central differences.
class DiscreteTableFamily {
public:
    using Pmf = std::function<std::vector<double>(double)>;

    DiscreteTableFamily(Labels support, std::vector<double> grid, Pmf pmf, double lo, double hi);

    // Tables at grid points, linearly interpolated in between.
    static DiscreteTableFamily from_tables(std::vector<double> grid, const std::vector<FiniteDistribution>& tables);

    const Labels& support() const noexcept { return support_; }
    const std::vector<double>& grid() const noexcept { return grid_; }
    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }
    std::vector<double> pmf(double theta) const;
    FiniteDistribution at(double theta) const;
    // Rows at the grid points, labelled by the grid values.
    ConditionalTable table() const;
    // p_theta pushed through a theta-independent channel.
    DiscreteTableFamily through(const ConditionalTable& channel) const;

private:
    Labels support_;
    std::vector<double> grid_;
    Pmf pmf_;
    double lo_, hi_;
};

using ScalarParamFamily = std::variant<GaussianMean, LaplaceRate, DiscreteTableFamily>;

// Gaussian N(mu, sigma^2) binned on `points` cells spanning mu0 +- halfwidth*sigma,
// bin masses from CDF differences, renormalized.
DiscreteTableFamily quantized_gaussian_mean(double sigma, double mu0, double halfwidth_sigmas = 6.0,
                                            std::size_t points = 2001);
// |x| ~ Exp(lambda) binned on [0, upper) with `points` cells.
DiscreteTableFamily quantized_laplace_rate(double lambda_lo, double lambda_hi, double upper,
                                           std::size_t points = 4001);

enum class InfoMethod { Analytic, FiniteDifference };

struct InfoReport {
    double theta = 0.0;
    double J = 0.0;
    double J_m = 0.0;
    double crb = std::numeric_limits<double>::infinity();
    bool crb_infinite = true;
    InfoMethod method = InfoMethod::Analytic;
    std::size_t m = 1;
    double tolerance = 0.0;
};

nlohmann::json to_json(const InfoReport& report);

// h = 1e-4 * max(|theta|, 1)
double default_fd_step(double theta);

double score(const GaussianMean& family, double x, double mu);
double score(const LaplaceRate& family, double l1_norm, double lambda);
double score(const DiscreteTableFamily& family, std::size_t outcome, double theta,
             std::optional<double> step = std::nullopt);

// E[score | theta]: trapezoid quadrature for named families, enumeration for tables.
double score_mean(const ScalarParamFamily& family, double theta);

InfoReport fisher_information(const ScalarParamFamily& family, double theta, std::size_t m = 1,
                              std::optional<double> step = std::nullopt);

enum class CrbOrdering { Equal, YTighter };

// Throws DpiViolation when the restored stage appears more informative.
CrbOrdering crb_compare(const InfoReport& y, const InfoReport& xhat, double rel_tol = 1e-6);

struct Efficiency {
    double value = 0.0;
    bool super_efficient = false;
};

Efficiency efficiency(double estimator_variance, const InfoReport& report, double tol = 1e-9);

struct DpiAudit {
    double i_theta_x = 0.0;
    double i_theta_y = 0.0;
    double i_theta_xhat = 0.0;
    bool monotone = true;
    bool x_equals_y = false;
    bool y_equals_xhat = false;
};

inline constexpr double kDpiTol = 1e-9;

DpiAudit dpi_audit(const PipelineChain& chain);

bool sufficiency_check(const FiniteDistribution& prior, const ConditionalTable& family,
                       const DeterministicMap& statistic);
// Cross-check: T is sufficient iff p(x | T(x), theta) does not depend on theta.
bool factorization_check(const ConditionalTable& family, const DeterministicMap& statistic, double tol = 1e-12);

struct GridDensity {
    std::vector<double> density; // at bin centers
    double bin_width = 1.0;
};

// Differential entropy of the binned density: H_binned + log(bin_width).
double differential_entropy(const GridDensity& density);

// Lower bound exp(2h)/(2 pi e) on E(X - Xhat)^2.
double entropy_error_bound(const GaussianMean& family);
double entropy_error_bound(const GridDensity& density);

struct RaoBlackwellResult {
    std::vector<double> by_statistic; // E[f | T = t]
    std::vector<double> improved;     // E[f | T(x)] per x
    std::vector<double> mean_before, mean_after;
    std::vector<double> variance_before, variance_after; // per grid point
};

RaoBlackwellResult rao_blackwellize(const ConditionalTable& family, std::span<const double> estimator,
                                    const DeterministicMap& statistic);

} // namespace estlab
