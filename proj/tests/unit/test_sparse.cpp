#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "support.hpp"

#include "estlab/rng.hpp"
#include "estlab/sparse.hpp"

using namespace estlab;

TEST_CASE("soft threshold") {
    Eigen::VectorXd v(4);
    v << 3.0, -0.5, -2.0, 1.0;
    Eigen::VectorXd want(4);
    want << 2.0, 0.0, -1.0, 0.0;
    CHECK((soft_threshold(v, 1.0) - want).norm() == 0.0);
}

TEST_CASE("power iteration matches the eigen solver") {
    const auto op = build_kernel_operator(1.5, 32, 1.0);
    const Eigen::MatrixXd gtg = op.G.transpose() * op.G;
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gtg).eigenvalues().maxCoeff();
    CHECK(gram_norm(op.G, 500) == doctest::Approx(top).epsilon(1e-6));
    CHECK(op.alpha0 == 1.0);
    CHECK(op.gamma0 == 1.0);
    CHECK_THROWS_CODE(build_kernel_operator(2.0, 8, 1.0), ErrorCode::InvalidArgument);
}

TEST_CASE("scalar lasso matches the subgradient solution") {
    // min 0.5 (y - g x)^2 + tau |x|  ->  x = soft(g y, tau) / g^2
    Eigen::MatrixXd G(1, 1);
    G << 2.0;
    for (double y : {-3.0, -0.2, 0.0, 0.4, 5.0}) {
        Eigen::VectorXd yv(1);
        yv << y;
        const auto r = lasso_solve(yv, G, 1.0, SolverConfig{});
        const double gy = 2.0 * y;
        const double want = (gy > 0 ? 1 : -1) * std::max(std::abs(gy) - 1.0, 0.0) / 4.0;
        CHECK(r.x[0] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("penalized solution satisfies the optimality conditions") {
    const auto op = build_kernel_operator(1.0, 48, 1.0);
    Rng rng = make_stream(2, 0);
    Eigen::VectorXd y(48);
    for (Eigen::Index i = 0; i < 48; ++i) {
        y[i] = standard_normal(rng);
    }
    const double tau = 0.3;
    const auto r = lasso_solve(y, op.G, tau, SolverConfig{});
    CHECK(r.converged);
    const Eigen::VectorXd c = op.G.transpose() * (y - op.G * r.x);
    for (Eigen::Index i = 0; i < 48; ++i) {
        if (r.x[i] != 0.0) {
            CHECK(c[i] == doctest::Approx(tau * (r.x[i] > 0 ? 1 : -1)).epsilon(1e-6));
        } else {
            CHECK(std::abs(c[i]) <= tau * (1 + 1e-6));
        }
    }
}

TEST_CASE("exhaustive search confirms noiseless recovery on n = 16") {
    const std::size_t n = 16;
    const auto op = build_kernel_operator(1.0, n, 1.0);
    const SpikeSignal truth(n, {3, 10}, {1.5, -0.8});
    const Eigen::VectorXd y = op.G * truth.dense();

    // Every support of size <= 2: exact fits and their l1 norms.
    double best_l1 = 1e300;
    std::pair<std::size_t, std::size_t> best{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            Eigen::MatrixXd A(n, 2);
            A.col(0) = op.G.col(static_cast<Eigen::Index>(i));
            A.col(1) = op.G.col(static_cast<Eigen::Index>(j));
            const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
            if ((A * c - y).norm() < 1e-10 && c.lpNorm<1>() < best_l1) {
                best_l1 = c.lpNorm<1>();
                best = {i, j};
            }
        }
    }
    CHECK(best.first == 3);
    CHECK(best.second == 10);

    SolverConfig cfg;
    cfg.feasibility_tol = 1e-12 * std::max(1.0, y.lpNorm<1>());
    const auto r = l1_map_solve(y, op, Constrained{0.0, Fidelity::L1}, cfg);
    CHECK((r.x - truth.dense()).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(r.x.lpNorm<1>() == doctest::Approx(best_l1).epsilon(1e-6));
}

TEST_CASE("penalty path shrinks the l1 norm") {
    const auto op = build_kernel_operator(1.0, 32, 1.0);
    Rng rng = make_stream(8, 0);
    Eigen::VectorXd y(32);
    for (Eigen::Index i = 0; i < 32; ++i) {
        y[i] = standard_normal(rng);
    }
    const std::vector<double> taus{2.0, 1.0, 0.5, 0.25, 0.1};
    const auto path = penalty_path(y, op.G, taus);
    for (std::size_t k = 1; k < path.size(); ++k) {
        CHECK(path[k].x.lpNorm<1>() + 1e-12 >= path[k - 1].x.lpNorm<1>());
        CHECK(path[k].residual <= path[k - 1].residual + 1e-12);
    }
}

TEST_CASE("recovery certificate constants") {
    const auto op = build_kernel_operator(1.0, 32, 1.0);
    const SpikeSignal truth(32, {5, 20}, {1.0, -1.0});
    Eigen::VectorXd est = truth.dense();
    est[5] = 1.05;
    const auto c = recovery_certificate(truth.dense(), est, op, 0.1, NormKind::L1);
    // rho = max(1 / 0.25, 1) = 4; bound = 4 * 4 * 0.1 / 0.6
    CHECK(c.rho == doctest::Approx(4.0));
    CHECK(c.bound == doctest::Approx(16 * 0.1 / 0.6));
    CHECK(c.achieved == doctest::Approx(0.05));
    CHECK(c.holds);
    const auto bare = build_kernel_operator(1.0, 32, 1.0, std::nullopt);
    CHECK_THROWS_CODE(recovery_certificate(truth.dense(), est, bare, 0.1, NormKind::L1),
                      ErrorCode::MissingAdmissibilityConstants);
}

TEST_CASE("random support respects separation") {
    Rng rng = make_stream(4, 0);
    for (int t = 0; t < 100; ++t) {
        const auto s = random_support(rng, 64, 4, 5);
        REQUIRE(s.size() == 4);
        for (std::size_t k = 1; k < s.size(); ++k) {
            CHECK(s[k] - s[k - 1] >= 5);
        }
    }
    CHECK(default_separation(1.0, 1.0) == 3);
}
