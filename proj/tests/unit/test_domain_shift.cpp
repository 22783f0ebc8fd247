#include <cmath>
#include <vector>

#include "support.hpp"

#include "estlab/channels.hpp"
#include "estlab/domain_shift.hpp"

using namespace estlab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

// Weighted l1 cost of a scalar candidate.
double l1_cost(const std::vector<double>& t, const std::vector<double>& w, double x) {
    double c = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        c += w[i] * std::abs(x - t[i]);
    }
    return c;
}

} // namespace

TEST_CASE("mse minimizer is the weighted mean") {
    const std::vector<Eigen::VectorXd> t{vec({0, 1}), vec({0.9, 3})};
    const auto eq = double_meaning_minimizer(t, {}, Loss::Mse);
    CHECK(eq.xhat[0] == doctest::Approx(0.45));
    CHECK(eq.xhat[1] == doctest::Approx(2.0));
    const std::vector<double> w{0.25, 0.75};
    const auto wt = double_meaning_minimizer(t, w, Loss::Mse);
    CHECK(wt.xhat[0] == doctest::Approx(0.675));
    CHECK(weighted_quadratic_gradient(t, w, wt.xhat).norm() < 1e-14);
    CHECK_THROWS_CODE(double_meaning_minimizer({vec({1}), vec({1, 2})}, {}, Loss::Mse), ErrorCode::DimensionMismatch);
}

TEST_CASE("l1 minimizer is the lower weighted median") {
    const std::vector<Eigen::VectorXd> two{vec({0}), vec({0.9})};
    const auto tie = double_meaning_minimizer(two, {}, Loss::L1);
    CHECK(tie.xhat[0] == 0.0);
    CHECK(tie.ties.size() == 1);

    // Scan every target value: the l1 cost is piecewise linear with kinks there.
    const std::vector<double> vals{3.0, -1.0, 0.5, 7.0, 2.0};
    const std::vector<double> w{0.1, 0.3, 0.15, 0.25, 0.2};
    std::vector<Eigen::VectorXd> t;
    for (double v : vals) {
        t.push_back(vec({v}));
    }
    const auto m = double_meaning_minimizer(t, w, Loss::L1);
    double best = 1e300;
    for (double v : vals) {
        best = std::min(best, l1_cost(vals, w, v));
    }
    CHECK(l1_cost(vals, w, m.xhat[0]) == doctest::Approx(best).epsilon(1e-14));
}

TEST_CASE("trained linear restorer converges to the mean of the scales") {
    const auto spec = linear_domains_instance(4, {1.0, 2.0});
    TrainConfig cfg;
    cfg.samples = 2000;
    cfg.seed = 3;
    const auto r = train_mixed_restorer(spec, cfg);
    CHECK(r.converged);
    const Eigen::MatrixXd target = 1.5 * Eigen::MatrixXd::Identity(4, 4);
    CHECK((r.W - target).cwiseAbs().maxCoeff() <= 1e-3);
    cfg.solver = Solver::LeastSquares;
    const auto ls = train_mixed_restorer(spec, cfg);
    CHECK((ls.W - target).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("resolution shift prediction") {
    const Eigen::Index n = 40;
    Eigen::VectorXd x2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x2[i] = std::sin(0.3 * i) + 0.1 * i;
    }
    const auto p = resolution_shift_prediction(x2, 1.0, 2.0);
    const auto h = blur_matrix(n, std::sqrt(3.0)).matrix;
    CHECK((p - 0.5 * (x2 + h * x2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mixed vs targeted gaps") {
    TrainConfig cfg;
    cfg.solver = Solver::LeastSquares;
    cfg.samples = 512;
    cfg.seed = 4;
    const auto blur = mixed_vs_targeted_report(two_blur_instance(32, 1.0, 2.0), cfg, 200);
    for (const auto& d : blur.per_domain) {
        CHECK(d.gap > 1e-3);
    }
    const auto disjoint = mixed_vs_targeted_report(disjoint_instance(8, {1.0, 2.0}), cfg, 200);
    for (const auto& d : disjoint.per_domain) {
        CHECK(std::abs(d.gap) < 1e-12);
    }
}

TEST_CASE("decimation keeps linear signals") {
    Eigen::VectorXd x(9);
    for (Eigen::Index i = 0; i < 9; ++i) {
        x[i] = 2.0 * i - 1.0;
    }
    CHECK((decimate_interpolate(x) - x).cwiseAbs().maxCoeff() < 1e-14);
}
