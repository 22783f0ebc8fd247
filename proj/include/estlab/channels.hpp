#pragma once

// Degradation processes: Gaussian blur operators, AWGN, deterministic maps.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "estlab/prob.hpp"

namespace estlab {

// Kernel taps exp(-k^2 / 2 sigma^2) for k in [-halfwidth, halfwidth], normalized.
// Throws SupportTooSmall when halfwidth < 3 sigma.
std::vector<double> gaussian_kernel(double sigma, int halfwidth);
// ceil(5 sigma), at least 1.
int default_halfwidth(double sigma);
std::vector<double> gaussian_kernel(double sigma);

// Full linear convolution of two tap vectors.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

// sqrt(sigma1^2 + sigma2^2)
double compose_blurs(double sigma1, double sigma2);
// sqrt(sigma2^2 - sigma1^2): the blur taking resolution sigma1 to sigma2.
double blur_difference(double sigma1, double sigma2);

enum class Boundary { Reflect, ZeroPad };

struct BlurOperator {
    double sigma = 0.0;
    int halfwidth = 0;
    Boundary boundary = Boundary::Reflect;
    Eigen::MatrixXd matrix;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix * x; }
};

// Reflect uses half-sample symmetric extension (x[-1] = x[0]), so every row
// sums to one. Zero-pad drops taps that leave the signal.
BlurOperator blur_matrix(std::size_t n, double sigma, Boundary boundary = Boundary::Reflect,
                         std::optional<int> halfwidth = std::nullopt);

struct AwgnChannel {
    double sigma_n = 1.0;
};

// Mass of N(mean, sd^2) on [a, b), accurate in both tails.
double normal_interval_mass(double a, double b, double mean, double sd);

// Rows are CDF-difference masses of N(x, sigma_n^2) over the y bins (edges at
// midpoints between y grid points, outer bins half a step wide), renormalized.
// Throws GridTooNarrow when any row loses more than `max_lost_mass`.
ConditionalTable quantize_awgn(const AwgnChannel& channel, std::span<const double> x_grid,
                               std::span<const double> y_grid, double max_lost_mass = 1e-6);

// A total map from input labels to output labels.
struct DeterministicMap {
    Labels input;
    Labels output;
    std::vector<std::size_t> mapping;

    ConditionalTable to_table() const;
    bool injective() const;
};

// Invertible degradation: every y carrying positive mass under p_x * channel
// has exactly one x with positive joint probability.
bool is_invertible(const ConditionalTable& channel, const FiniteDistribution& source);
bool is_invertible(const DeterministicMap& map);

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m);
nlohmann::json kernel_to_json(std::span<const double> taps);

} // namespace estlab
