#include "estlab/info.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "estlab/error.hpp"

namespace estlab {

namespace {

std::vector<double> renormalized(std::vector<double> p) {
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) {
        v /= total;
    }
    return p;
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

} // namespace

DiscreteTableFamily::DiscreteTableFamily(Labels support, std::vector<double> grid, Pmf pmf, double lo, double hi)
    : support_(std::move(support)), grid_(std::move(grid)), pmf_(std::move(pmf)), lo_(lo), hi_(hi) {
    if (grid_.empty() || !(lo_ <= hi_)) {
        throw Error(ErrorCode::InvalidArgument, "family needs a nonempty grid and lo <= hi");
    }
    for (std::size_t k = 1; k < grid_.size(); ++k) {
        if (!(grid_[k] > grid_[k - 1])) {
            throw Error(ErrorCode::InvalidArgument, "theta grid must be strictly increasing");
        }
    }
    for (double theta : grid_) {
        at(theta); // validates every grid row
    }
}

DiscreteTableFamily DiscreteTableFamily::from_tables(std::vector<double> grid,
                                                     const std::vector<FiniteDistribution>& tables) {
    if (tables.size() != grid.size() || tables.empty()) {
        throw Error(ErrorCode::InvalidArgument, "need one table per grid point");
    }
    for (const auto& t : tables) {
        if (t.support() != tables.front().support()) {
            throw Error(ErrorCode::SupportMismatch, "tables must share a support");
        }
    }
    auto rows = std::make_shared<std::vector<std::vector<double>>>();
    for (const auto& t : tables) {
        rows->push_back(t.probs());
    }
    auto g = std::make_shared<std::vector<double>>(grid);
    Pmf pmf = [rows, g](double theta) {
        const auto& gr = *g;
        if (gr.size() == 1 || theta <= gr.front()) {
            return rows->front();
        }
        if (theta >= gr.back()) {
            return rows->back();
        }
        const auto k = static_cast<std::size_t>(std::upper_bound(gr.begin(), gr.end(), theta) - gr.begin());
        const double w = (theta - gr[k - 1]) / (gr[k] - gr[k - 1]);
        std::vector<double> out((*rows)[k].size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = (1.0 - w) * (*rows)[k - 1][i] + w * (*rows)[k][i];
        }
        return out;
    };
    const double lo = grid.front(), hi = grid.back();
    return {tables.front().support(), std::move(grid), std::move(pmf), lo, hi};
}

std::vector<double> DiscreteTableFamily::pmf(double theta) const {
    if (theta < lo_ || theta > hi_) {
        throw Error(ErrorCode::InvalidArgument, "theta outside the family domain");
    }
    auto p = pmf_(theta);
    if (p.size() != support_.size()) {
        throw Error(ErrorCode::InvalidDistribution, "pmf length differs from support");
    }
    return p;
}

FiniteDistribution DiscreteTableFamily::at(double theta) const {
    return {support_, renormalized(pmf(theta))};
}

ConditionalTable DiscreteTableFamily::table() const {
    std::vector<std::vector<double>> rows;
    for (double theta : grid_) {
        rows.push_back(at(theta).probs());
    }
    return {numeric_labels(grid_), support_, std::move(rows)};
}

DiscreteTableFamily DiscreteTableFamily::through(const ConditionalTable& channel) const {
    if (channel.input() != support_) {
        throw Error(ErrorCode::SupportMismatch, "channel input differs from family support");
    }
    Pmf inner = pmf_;
    Pmf composed = [inner, channel](double theta) { return channel.push_forward(inner(theta)); };
    return {channel.output(), grid_, std::move(composed), lo_, hi_};
}

DiscreteTableFamily quantized_gaussian_mean(double sigma, double mu0, double halfwidth_sigmas, std::size_t points) {
    if (!(sigma > 0.0) || points < 3) {
        throw Error(ErrorCode::InvalidArgument, "need sigma > 0 and at least 3 grid points");
    }
    const double lo = mu0 - halfwidth_sigmas * sigma;
    const double step = 2.0 * halfwidth_sigmas * sigma / static_cast<double>(points - 1);
    std::vector<double> centers(points);
    for (std::size_t k = 0; k < points; ++k) {
        centers[k] = lo + static_cast<double>(k) * step;
    }
    DiscreteTableFamily::Pmf pmf = [centers, step, sigma](double mu) {
        std::vector<double> p(centers.size());
        for (std::size_t k = 0; k < centers.size(); ++k) {
            p[k] = normal_interval_mass(centers[k] - 0.5 * step, centers[k] + 0.5 * step, mu, sigma);
        }
        return renormalized(std::move(p));
    };
    return {numeric_labels(centers), {mu0}, std::move(pmf), mu0 - sigma, mu0 + sigma};
}

DiscreteTableFamily quantized_laplace_rate(double lambda_lo, double lambda_hi, double upper, std::size_t points) {
    if (!(lambda_lo > 0.0) || !(lambda_hi >= lambda_lo) || !(upper > 0.0) || points < 2) {
        throw Error(ErrorCode::InvalidArgument, "invalid Laplace quantization");
    }
    const double step = upper / static_cast<double>(points);
    std::vector<double> lefts(points);
    for (std::size_t k = 0; k < points; ++k) {
        lefts[k] = static_cast<double>(k) * step;
    }
    DiscreteTableFamily::Pmf pmf = [lefts, step](double lambda) {
        std::vector<double> p(lefts.size());
        const double cell = -std::expm1(-lambda * step);
        for (std::size_t k = 0; k < lefts.size(); ++k) {
            p[k] = std::exp(-lambda * lefts[k]) * cell;
        }
        return renormalized(std::move(p));
    };
    std::vector<double> grid{lambda_lo};
    if (lambda_hi > lambda_lo) {
        grid.push_back(lambda_hi);
    }
    return {numeric_labels(lefts), std::move(grid), std::move(pmf), lambda_lo, lambda_hi};
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const InfoReport& r) {
    nlohmann::json doc;
    doc["theta"] = r.theta;
    doc["J"] = r.J;
    doc["J_m"] = r.J_m;
    if (r.crb_infinite) {
        doc["crb"] = "inf";
    } else {
        doc["crb"] = r.crb;
    }
    doc["method"] = r.method == InfoMethod::Analytic ? "analytic" : "finite-difference";
    doc["m"] = r.m;
    doc["tolerance"] = r.tolerance;
    return doc;
}

double default_fd_step(double theta) {
    return 1e-4 * std::max(std::abs(theta), 1.0);
}

double score(const GaussianMean& family, double x, double mu) {
    if (!(family.sigma > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
    }
    return (x - mu) / (family.sigma * family.sigma);
}

double score(const LaplaceRate&, double l1_norm, double lambda) {
    if (!(lambda > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "rate must be positive");
    }
    if (l1_norm < 0.0) {
        throw Error(ErrorCode::ZeroDensity, "negative l1 norm has no density");
    }
    return 1.0 / lambda - l1_norm;
}

namespace {

struct FdProbs {
    std::vector<double> center, plus, minus;
    double h;
};

FdProbs fd_probs(const DiscreteTableFamily& family, double theta, std::optional<double> step) {
    const double h = step.value_or(default_fd_step(theta));
    if (theta - h < family.lower() || theta + h > family.upper()) {
        throw Error(ErrorCode::InvalidArgument, "theta must be interior: theta +- h leaves the domain");
    }
    return {family.at(theta).probs(), family.at(theta + h).probs(), family.at(theta - h).probs(), h};
}

double fd_score(const FdProbs& p, std::size_t k) {
    if (p.plus[k] <= 0.0 || p.minus[k] <= 0.0) {
        throw Error(ErrorCode::ZeroDensity, "density vanishes next to theta");
    }
    return (std::log(p.plus[k]) - std::log(p.minus[k])) / (2.0 * p.h);
}

// Trapezoid rule on [a, b] with n intervals.
template <class F>
double trapezoid(F&& f, double a, double b, std::size_t n) {
    const double h = (b - a) / static_cast<double>(n);
    double s = 0.5 * (f(a) + f(b));
    for (std::size_t i = 1; i < n; ++i) {
        s += f(a + static_cast<double>(i) * h);
    }
    return s * h;
}

} // namespace

double score(const DiscreteTableFamily& family, std::size_t outcome, double theta, std::optional<double> step) {
    const auto p = fd_probs(family, theta, step);
    if (outcome >= p.center.size()) {
        throw Error(ErrorCode::InvalidArgument, "outcome index out of range");
    }
    if (p.center[outcome] <= 0.0) {
        throw Error(ErrorCode::ZeroDensity, "outcome has zero probability at theta");
    }
    return fd_score(p, outcome);
}

double score_mean(const ScalarParamFamily& family, double theta) {
    return std::visit(
        Overloaded{
            [theta](const GaussianMean& g) {
                const double s = g.sigma;
                const auto integrand = [&](double x) {
                    const double z = (x - theta) / s;
                    return score(g, x, theta) * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
                };
                return trapezoid(integrand, theta - 12.0 * s, theta + 12.0 * s, 24000);
            },
            [theta](const LaplaceRate& l) {
                const auto integrand = [&](double r) { return score(l, r, theta) * theta * std::exp(-theta * r); };
                return trapezoid(integrand, 0.0, 60.0 / theta, 120000);
            },
            [theta](const DiscreteTableFamily& t) {
                const auto p = fd_probs(t, theta, std::nullopt);
                double m = 0.0;
                for (std::size_t k = 0; k < p.center.size(); ++k) {
                    if (p.center[k] > 0.0) {
                        m += p.center[k] * fd_score(p, k);
                    }
                }
                return m;
            },
        },
        family);
}

InfoReport fisher_information(const ScalarParamFamily& family, double theta, std::size_t m,
                              std::optional<double> step) {
    if (m == 0) {
        throw Error(ErrorCode::InvalidArgument, "sample count must be positive");
    }
    InfoReport r;
    r.theta = theta;
    r.m = m;
    std::visit(Overloaded{
                   [&](const GaussianMean& g) {
                       if (!(g.sigma > 0.0)) {
                           throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
                       }
                       r.J = 1.0 / (g.sigma * g.sigma);
                       r.method = InfoMethod::Analytic;
                   },
                   [&](const LaplaceRate&) {
                       if (!(theta > 0.0)) {
                           throw Error(ErrorCode::InvalidArgument, "rate must be positive");
                       }
                       r.J = 1.0 / (theta * theta);
                       r.method = InfoMethod::Analytic;
                   },
                   [&](const DiscreteTableFamily& t) {
                       const auto p = fd_probs(t, theta, step);
                       double j = 0.0;
                       for (std::size_t k = 0; k < p.center.size(); ++k) {
                           if (p.center[k] > 0.0) {
                               const double s = fd_score(p, k);
                               j += p.center[k] * s * s;
                           }
                       }
                       r.J = j;
                       r.method = InfoMethod::FiniteDifference;
                       r.tolerance = p.h * p.h; // O(h^2) truncation of the central difference
                   },
               },
               family);
    r.J_m = static_cast<double>(m) * r.J;
    // FD noise on a constant likelihood is ~1e-24; treat that as zero sensitivity.
    if (r.J > 1e-18) {
        r.crb = 1.0 / r.J_m;
        r.crb_infinite = false;
    } else {
        r.J = 0.0;
        r.J_m = 0.0;
        r.crb = std::numeric_limits<double>::infinity();
        r.crb_infinite = true;
    }
    return r;
}

CrbOrdering crb_compare(const InfoReport& y, const InfoReport& xhat, double rel_tol) {
    if (y.m != xhat.m || y.theta != xhat.theta) {
        throw Error(ErrorCode::InvalidArgument, "reports must share theta and m");
    }
    if (y.crb_infinite && xhat.crb_infinite) {
        return CrbOrdering::Equal;
    }
    if (y.crb_infinite) {
        throw Error(ErrorCode::DpiViolation, "restored stage carries information the measurement lacks");
    }
    if (xhat.crb_infinite) {
        return CrbOrdering::YTighter;
    }
    const double scale = std::max(y.crb, xhat.crb);
    if (std::abs(y.crb - xhat.crb) <= rel_tol * scale) {
        return CrbOrdering::Equal;
    }
    if (xhat.crb > y.crb) {
        return CrbOrdering::YTighter;
    }
    throw Error(ErrorCode::DpiViolation, "restored-stage bound is tighter than the measurement bound");
}

Efficiency efficiency(double estimator_variance, const InfoReport& report, double tol) {
    if (!(estimator_variance > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "estimator variance must be positive");
    }
    if (report.crb_infinite) {
        throw Error(ErrorCode::InvalidArgument, "efficiency undefined when the bound is infinite");
    }
    Efficiency e;
    e.value = report.crb / estimator_variance;
    e.super_efficient = e.value > 1.0 + tol;
    return e;
}

// ---------------------------------------------------------------------------

DpiAudit dpi_audit(const PipelineChain& chain) {
    const auto joint = assemble_joint(chain);
    DpiAudit a;
    a.i_theta_x = mutual_information(joint, kThetaAxis, kXAxis);
    a.i_theta_y = mutual_information(joint, kThetaAxis, kYAxis);
    a.i_theta_xhat = chain.has_restorer() ? mutual_information(joint, kThetaAxis, kXhatAxis) : a.i_theta_y;
    a.x_equals_y = std::abs(a.i_theta_x - a.i_theta_y) <= kDpiTol;
    a.y_equals_xhat = std::abs(a.i_theta_y - a.i_theta_xhat) <= kDpiTol;
    a.monotone = a.i_theta_x >= a.i_theta_y - kDpiTol && a.i_theta_y >= a.i_theta_xhat - kDpiTol;
    return a;
}

bool sufficiency_check(const FiniteDistribution& prior, const ConditionalTable& family,
                       const DeterministicMap& statistic) {
    if (statistic.input != family.output()) {
        throw Error(ErrorCode::SupportMismatch, "statistic must be defined on the family support");
    }
    PipelineChain chain{prior, family, statistic.to_table(), std::nullopt, {}};
    const auto joint = assemble_joint(chain);
    return std::abs(mutual_information(joint, kThetaAxis, kXAxis) - mutual_information(joint, kThetaAxis, kYAxis)) <=
           kDpiTol;
}

bool factorization_check(const ConditionalTable& family, const DeterministicMap& statistic, double tol) {
    if (statistic.input != family.output()) {
        throw Error(ErrorCode::SupportMismatch, "statistic must be defined on the family support");
    }
    const std::size_t nx = family.cols();
    for (std::size_t t = 0; t < statistic.output.size(); ++t) {
        std::vector<double> reference;
        for (std::size_t th = 0; th < family.rows(); ++th) {
            double mass = 0.0;
            for (std::size_t x = 0; x < nx; ++x) {
                if (statistic.mapping[x] == t) {
                    mass += family(th, x);
                }
            }
            if (mass <= 0.0) {
                continue;
            }
            std::vector<double> cond(nx, 0.0);
            for (std::size_t x = 0; x < nx; ++x) {
                if (statistic.mapping[x] == t) {
                    cond[x] = family(th, x) / mass;
                }
            }
            if (reference.empty()) {
                reference = std::move(cond);
                continue;
            }
            for (std::size_t x = 0; x < nx; ++x) {
                if (std::abs(cond[x] - reference[x]) > tol) {
                    return false;
                }
            }
        }
    }
    return true;
}

double differential_entropy(const GridDensity& d) {
    if (!(d.bin_width > 0.0) || d.density.empty()) {
        throw Error(ErrorCode::InvalidArgument, "grid density needs bins and a positive width");
    }
    std::vector<double> mass(d.density.size());
    for (std::size_t k = 0; k < mass.size(); ++k) {
        if (d.density[k] < 0.0) {
            throw Error(ErrorCode::InvalidDistribution, "negative density");
        }
        mass[k] = d.density[k] * d.bin_width;
    }
    return entropy(renormalized(std::move(mass))) + std::log(d.bin_width);
}

double entropy_error_bound(const GaussianMean& family) {
    const double h = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * family.sigma * family.sigma);
    return std::exp(2.0 * h) / (2.0 * std::numbers::pi * std::numbers::e);
}

double entropy_error_bound(const GridDensity& density) {
    return std::exp(2.0 * differential_entropy(density)) / (2.0 * std::numbers::pi * std::numbers::e);
}

RaoBlackwellResult rao_blackwellize(const ConditionalTable& family, std::span<const double> estimator,
                                    const DeterministicMap& statistic) {
    const std::size_t nx = family.cols();
    if (estimator.size() != nx) {
        throw Error(ErrorCode::InvalidArgument, "estimator must be defined on the whole support");
    }
    const auto uniform = FiniteDistribution::uniform(family.input());
    if (!sufficiency_check(uniform, family, statistic)) {
        throw Error(ErrorCode::NotSufficient, "statistic is not sufficient for the family");
    }
    const std::size_t nt = statistic.output.size();
    // Under sufficiency p(x | t) is the same for every theta; use the grid mixture.
    const auto mix = family.push_forward(uniform.probs());
    RaoBlackwellResult r;
    r.by_statistic.assign(nt, 0.0);
    std::vector<double> mass(nt, 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
        r.by_statistic[statistic.mapping[x]] += mix[x] * estimator[x];
        mass[statistic.mapping[x]] += mix[x];
    }
    for (std::size_t t = 0; t < nt; ++t) {
        r.by_statistic[t] = mass[t] > 0.0 ? r.by_statistic[t] / mass[t] : 0.0;
    }
    r.improved.resize(nx);
    for (std::size_t x = 0; x < nx; ++x) {
        r.improved[x] = r.by_statistic[statistic.mapping[x]];
    }
    const auto moments = [&](std::span<const double> f, std::size_t th) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t x = 0; x < nx; ++x) {
            mean += family(th, x) * f[x];
        }
        for (std::size_t x = 0; x < nx; ++x) {
            sq += family(th, x) * (f[x] - mean) * (f[x] - mean);
        }
        return std::pair{mean, sq};
    };
    for (std::size_t th = 0; th < family.rows(); ++th) {
        const auto [m0, v0] = moments(estimator, th);
        const auto [m1, v1] = moments(r.improved, th);
        r.mean_before.push_back(m0);
        r.variance_before.push_back(v0);
        r.mean_after.push_back(m1);
        r.variance_after.push_back(v1);
    }
    return r;
}

} // namespace estlab
