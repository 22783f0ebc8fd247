#pragma once

// Sparse spike trains observed through a shift-invariant Gaussian kernel:
// l1 MAP solvers, recovery certificates and the rate-estimation pipeline.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "estlab/rng.hpp"

namespace estlab {

struct SpikeSignal {
    std::size_t n = 0;
    std::vector<std::size_t> support; // strictly increasing
    std::vector<double> amplitudes;   // nonzero, one per support index

    SpikeSignal() = default;
    SpikeSignal(std::size_t n, std::vector<std::size_t> support, std::vector<double> amplitudes);

    Eigen::VectorXd dense() const;
    double l1_norm() const;
};

// Admissibility constants of the kernel family.
struct Admissibility {
    double beta = 0.6;
    double epsilon = 0.5;
};

struct KernelOperator {
    Eigen::MatrixXd G; // G(k, j) = g[k - j]
    double sigma = 1.0;
    double fs = 1.0;
    double alpha0 = 1.0; // max_n g_n(0)
    double gamma0 = 1.0; // min_n g_n(0)
    std::optional<Admissibility> admissibility;

    Eigen::Index size() const noexcept { return G.cols(); }
};

// g[k] = exp(-k^2 / (2 (sigma Fs)^2)), so alpha0 = gamma0 = 1.
// Requires sigma > 0 and n >= 8 sigma Fs.
KernelOperator build_kernel_operator(double sigma, std::size_t n, double fs,
                                     std::optional<Admissibility> admissibility = Admissibility{});

// sign(v) * max(|v| - t, 0) elementwise.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t);

// Largest eigenvalue of G^T G by power iteration.
double gram_norm(const Eigen::MatrixXd& G, int iterations = 100);

// 0.5 ||y - G x||^2 + lambda sigma_z^2 ||x||_1
struct Penalized {
    double lambda = 1.0;
    double sigma_z = 1.0;
    double tau() const noexcept { return lambda * sigma_z * sigma_z; }
};

enum class Fidelity { L1, L2 };

// min ||x||_1 subject to ||y - G x|| <= delta (norm given by `fidelity`).
struct Constrained {
    double delta = 0.0;
    Fidelity fidelity = Fidelity::L1;
};

using SolveMode = std::variant<Penalized, Constrained>;

struct SolverConfig {
    std::size_t max_iterations = 100000;
    double step_tol = 1e-9;
    double feasibility_tol = 1e-6;
    double path_factor = 0.5;  // geometric ratio of the penalty path
    double path_floor = 1e-14; // smallest tau relative to ||G^T y||_inf
    int bisection_steps = 60;
    bool polish = true; // exact active-set solve once the sign pattern settles
    int polish_every = 10;
    bool record_trace = false;
};

struct SolveResult {
    Eigen::VectorXd x;
    bool converged = false;
    std::size_t iterations = 0;
    double tau = 0.0;              // penalty weight of the returned iterate
    double objective = 0.0;        // penalized objective at tau
    double residual = 0.0;         // ||y - G x|| in the constraint norm (l2 for penalized)
    std::vector<double> objective_trace; // ISTA objective per iteration (record_trace)
};

// Penalized: ISTA with step 1/L (L from power iteration), stopping on
// ||x_{t+1} - x_t||_inf <= step_tol. Constrained: warm-started penalty path
// down to the first feasible tau, then bisection for the largest feasible tau.
SolveResult l1_map_solve(const Eigen::VectorXd& y, const KernelOperator& op, const SolveMode& mode,
                         const SolverConfig& config = {});

// Penalized solve at a given tau with an optional warm start.
SolveResult lasso_solve(const Eigen::VectorXd& y, const Eigen::MatrixXd& G, double tau, const SolverConfig& config,
                        const Eigen::VectorXd* warm = nullptr, double lipschitz = 0.0);

// Solutions along a sequence of penalty weights (warm started in order).
std::vector<SolveResult> penalty_path(const Eigen::VectorXd& y, const Eigen::MatrixXd& G, std::span<const double> taus,
                                      const SolverConfig& config = {});

enum class NormKind { L1, L2 };

struct RecoveryCertificate {
    NormKind norm = NormKind::L1;
    double noise_budget = 0.0;
    double rho = 0.0;
    double bound = 0.0;
    double achieved = 0.0;
    bool holds = false;
};

// rho = max(gamma0 / eps^2, (Fs sigma)^2 alpha0); l1 bound 4 rho delta / (beta gamma0),
// l2 bound 64 N rho^2 S_w / (beta^2 gamma0^2). Throws MissingAdmissibilityConstants.
RecoveryCertificate recovery_certificate(const Eigen::VectorXd& x_true, const Eigen::VectorXd& x_hat,
                                         const KernelOperator& op, double noise_budget, NormKind norm);

nlohmann::json to_json(const RecoveryCertificate& c);
nlohmann::json sparse_problem_json(const KernelOperator& op, const SpikeSignal& x, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& x_hat, const std::optional<RecoveryCertificate>& cert);

// Random spike positions with minimum spacing `min_separation`.
std::vector<std::size_t> random_support(Rng& rng, std::size_t n, std::size_t k, std::size_t min_separation);
// 2 ceil(sigma Fs) + 1
std::size_t default_separation(double sigma, double fs);

// ---------------------------------------------------------------------------
// Rate estimation through a restoration stage

enum class SparseRestorer {
    L1MapPenalized,   // tau = lambda_true sigma_n^2
    L1MapConstrained, // delta = E||w||_1 = n sigma_n sqrt(2 / pi); delta = 0 when noiseless
    NormOracle,       // MAP output rescaled to the true ||x||_1
};

struct LambdaPipelineConfig {
    double lambda = 1.0;
    std::size_t m = 100;
    std::size_t n = 32;
    std::size_t spikes = 2;
    double kernel_sigma = 1.0;
    double fs = 1.0;
    double sigma_n = 0.1;
    SparseRestorer restorer = SparseRestorer::L1MapPenalized;
    std::size_t replicates = 1000;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    SolverConfig solver;
};

struct LambdaReplicate {
    std::size_t replicate = 0;
    double lambda_hat_x = 0.0;
    double lambda_hat_xhat = 0.0;
};

struct LambdaPipelineReport {
    double crb = 0.0;        // lambda^2 / m
    double mse_x = 0.0;      // MSE of lambda_hat from clean X
    double mse_xhat = 0.0;   // MSE of lambda_hat from the restored signal
    double se_x = 0.0;
    double se_xhat = 0.0;
    double se_diff = 0.0;    // stderr of the paired difference
    bool restored_not_better = false; // mse_xhat >= mse_x - 4 se_diff
    bool clean_above_crb = false;     // mse_x >= crb - 4 se_x
    std::vector<LambdaReplicate> rows;
};

// One clean signal: K spikes whose l1 norm is Exp(lambda), split uniformly, random signs.
SpikeSignal draw_laplace_spikes(Rng& rng, const LambdaPipelineConfig& config);

LambdaPipelineReport lambda_pipeline_experiment(const LambdaPipelineConfig& config);

void write_lambda_csv(std::ostream& os, const LambdaPipelineReport& report);

} // namespace estlab
