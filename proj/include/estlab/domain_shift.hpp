#pragma once

// Mixed-domain restoration: closed-form loss minimizers over several valid
// reconstructions, a trained linear restorer, and the blur-resolution instance.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "estlab/channels.hpp"
#include "estlab/rng.hpp"

namespace estlab {

enum class Loss { Mse, L1 };

struct MinimizerResult {
    Eigen::VectorXd xhat;
    // Coordinates where the weighted median was not unique; the lower one is returned.
    std::vector<Eigen::Index> ties;
};

// MSE: weighted mean. L1: coordinatewise weighted lower median.
// Empty weights mean uniform. Throws DimensionMismatch.
MinimizerResult double_meaning_minimizer(const std::vector<Eigen::VectorXd>& targets, std::span<const double> weights,
                                         Loss loss);

// Gradient of sum_i w_i ||x - t_i||^2 / 2 at x.
Eigen::VectorXd weighted_quadratic_gradient(const std::vector<Eigen::VectorXd>& targets,
                                            std::span<const double> weights, const Eigen::VectorXd& x);

struct DomainDraw {
    Eigen::VectorXd y;
    // Valid reconstructions of y: (domain index, G_domain(y)).
    std::vector<std::pair<std::size_t, Eigen::VectorXd>> targets;
};

struct DomainSpec {
    std::string name;
    Eigen::Index dim_y = 0;
    Eigen::Index dim_x = 0;
    std::vector<double> weights; // one per domain, summing to one
    // Draws an observation produced by domain `d`.
    std::function<DomainDraw(Rng&, std::size_t d)> draw;

    std::size_t domains() const noexcept { return weights.size(); }
};

// Restricts a spec to domain d alone (targets of other domains dropped).
DomainSpec single_domain(const DomainSpec& spec, std::size_t d);

enum class Solver { GradientDescent, LeastSquares };

struct TrainConfig {
    Loss loss = Loss::Mse;
    Solver solver = Solver::GradientDescent;
    std::size_t samples = 2000;
    std::size_t max_epochs = 10000;
    double lr = 1e-2;
    bool bias = false;
    std::uint64_t seed = 0;
    double grad_tol = 1e-10;
};

struct LinearRestorer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
    std::vector<double> loss_log;
    bool converged = false;

    Eigen::VectorXd predict(const Eigen::VectorXd& y) const { return W * y + b; }
};

nlohmann::json to_json(const LinearRestorer& restorer);
void write_loss_log_csv(std::ostream& os, const LinearRestorer& restorer);

// Full-batch training on `samples` draws; draw i comes from domain i mod M.
// The loss at a draw averages over its valid targets with the domain weights.
// GD halves lr whenever the loss rises; ten rises in a row throw Diverged.
LinearRestorer train_mixed_restorer(const DomainSpec& spec, const TrainConfig& config);

// 0.5 (I + H(sqrt(sigma2^2 - sigma1^2))) x2 with reflect boundary.
Eigen::VectorXd resolution_shift_prediction(const Eigen::VectorXd& x2, double sigma1, double sigma2);

struct DomainErrors {
    std::size_t domain = 0;
    double mixed_mse = 0.0;
    double targeted_mse = 0.0;
    double gap = 0.0;
};

struct MixedVsTargeted {
    std::vector<DomainErrors> per_domain;
    LinearRestorer mixed;
    std::vector<LinearRestorer> targeted;
};

// Per-domain mean squared error (per coordinate) on `test_samples` fresh draws.
MixedVsTargeted mixed_vs_targeted_report(const DomainSpec& spec, const TrainConfig& config,
                                         std::size_t test_samples = 500);

// ---------------------------------------------------------------------------
// Instances

// y ~ N(0, I_n); domain k maps y -> scales[k] * y. Every y is valid for all domains.
DomainSpec linear_domains_instance(Eigen::Index n, std::vector<double> scales);

// x2 = normal vector smoothed by a blur of width `smooth`, y = H(sigma2) x2.
// Domain 0 reads y as H(sigma1) x1 so its target is x1 = H(sigma_12) x2;
// domain 1 target is x2. Optional AWGN of std `noise` on y.
DomainSpec two_blur_instance(Eigen::Index n, double sigma1, double sigma2, double smooth = 1.0, double noise = 0.0);

// Domain k places its observation on its own block of coordinates and maps
// it by scales[k]; the y-supports do not overlap.
DomainSpec disjoint_instance(Eigen::Index n, std::vector<double> scales);

// Domain 0 observes x directly; domain 1 observes x decimated by 2 and
// linearly interpolated back. Each draw lists only its own target.
DomainSpec sampling_shift_instance(Eigen::Index n, double smooth = 2.0);

// Linear interpolation of every other sample of x back to full length.
Eigen::VectorXd decimate_interpolate(const Eigen::VectorXd& x);

} // namespace estlab
