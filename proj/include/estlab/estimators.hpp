#pragma once

// Restorers p(xhat | y) derived from a reference joint, and parameter
// estimators theta_hat computed from samples at the X, Y or Xhat stage.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "estlab/channels.hpp"
#include "estlab/info.hpp"
#include "estlab/prob.hpp"
#include "estlab/rng.hpp"

namespace estlab {

enum class RestorerKind {
    MmseMap,
    MapPoint,
    PosteriorSampler,
    PerfectPerception,
    ConditionalPerfectPerception,
    Deterministic,
    Constant,
};

std::string_view restorer_kind_name(RestorerKind kind) noexcept;

struct Restorer {
    RestorerKind kind = RestorerKind::Deterministic;
    // Y -> Xhat. Unused when class_tables is populated.
    ConditionalTable table;
    // One Y -> Xhat table per theta label (oracle-conditioned restorers).
    std::vector<ConditionalTable> class_tables;
    // Y indices where an argmax tie was broken toward the lowest index.
    std::vector<std::size_t> ties;

    bool depends_on_theta() const noexcept { return !class_tables.empty(); }
    const ConditionalTable& table_for(std::size_t theta_index) const;
    // Draws an output index for observation y (and the oracle class when needed).
    std::size_t draw(std::size_t y, Rng& rng, std::size_t theta_index = 0) const;
};

nlohmann::json to_json(const Restorer& restorer);

// Attaches the restorer to a copy of the chain.
PipelineChain with_restorer(PipelineChain chain, const Restorer& restorer);

// y -> E[X | Y = y]. Output support is the sorted set of distinct means.
Restorer mmse_restorer(const JointDistribution& joint);
std::vector<double> mmse_values(const JointDistribution& joint);
// y -> argmax_x p(x | y), ties to the lowest X index.
Restorer map_restorer(const JointDistribution& joint);
// y -> argmax_x p(y | x): ignores the prior.
Restorer likelihood_restorer(const JointDistribution& joint);
// Samples x ~ p(x | y); the table is the posterior itself.
Restorer posterior_sampler(const JointDistribution& joint);

// With `theta` set, rows come from p(x | y, theta) at that class; without it,
// the oracle reveals the true class of every draw (one table per class).
struct ThetaOracle {
    std::optional<std::string> theta;
};

// conditional=false: rows of p(x | y). conditional=true needs an oracle,
// otherwise throws MissingOracle.
Restorer perfect_perception_restorer(const JointDistribution& joint, bool conditional,
                                     const std::optional<ThetaOracle>& oracle = std::nullopt);
Restorer deterministic_restorer(const DeterministicMap& map);
// Every y goes to output label `output[index]`.
Restorer constant_restorer(const Labels& y_support, const Labels& output, std::size_t index);

// Draws an index from a probability row by inverse CDF.
std::size_t sample_index(std::span<const double> probs, Rng& rng);

// Family of the restored stage when the restorer sees theta:
// p(xhat | theta) = sum_y p(y | theta) p(x | y, theta), which equals p(x | theta).
DiscreteTableFamily conditional_perfect_perception_family(const DiscreteTableFamily& family,
                                                          const ConditionalTable& channel);
// Same with a theta-agnostic posterior built from `prior` over the family grid.
DiscreteTableFamily perfect_perception_family(const DiscreteTableFamily& family, const ConditionalTable& channel,
                                              const FiniteDistribution& prior);

// ---------------------------------------------------------------------------
// Parameter estimation

enum class EstimatorKind { SampleMean, MlGaussianMean, MlLaplaceRate, PluginBayes };
enum class Stage { X, Y, Xhat };

std::string_view stage_name(Stage stage) noexcept;

struct ParamEstimator {
    EstimatorKind kind = EstimatorKind::SampleMean;
    Stage stage = Stage::Y;
    // PluginBayes only: posterior mean of theta over a grid. Rows are
    // p(outcome | theta_k), theta labels numeric; samples are outcome indices.
    std::optional<ConditionalTable> plugin_family;
    std::optional<FiniteDistribution> plugin_prior;
};

// Scalar samples. For MlLaplaceRate each sample is read as its l1 norm |x|.
double estimate_parameter(const ParamEstimator& estimator, std::span<const double> samples);
// Vector samples: MlLaplaceRate uses sum of ||x_i||_1, mean estimators use all coordinates.
double estimate_parameter(const ParamEstimator& estimator, const std::vector<std::vector<double>>& samples);

enum class SourceKind { GaussianMean, LaplaceRate };
enum class PipelineRestorer {
    Identity,      // xhat_i = y_i
    SampleAverage, // a single xhat = mean(y)
    NoiseOracle,   // xhat_i = x_i: a restorer that removes the noise exactly
};

struct ScalarPipeline {
    SourceKind source = SourceKind::GaussianMean;
    double sigma_x = 1.0; // GaussianMean only
    double sigma_n = 0.0; // AWGN on Y; 0 means Y = X
    PipelineRestorer restorer = PipelineRestorer::Identity;
};

// Shared: one theta for all m observations. PerObservation: theta_i drawn
// uniformly from theta_true * [1 - spread, 1 + spread] for each observation.
enum class ThetaMode { Shared, PerObservation };

struct McOptions {
    std::size_t replicates = 10000;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    ThetaMode theta_mode = ThetaMode::Shared;
    double theta_spread = 0.1;
};

struct McReplicate {
    std::size_t replicate = 0;
    double theta_true = 0.0;
    double theta_hat = 0.0;
    double squared_error = 0.0;
};

struct McResult {
    double mean = 0.0;          // of theta_hat
    double variance = 0.0;      // of theta_hat (unbiased)
    double variance_stderr = 0.0;
    double mse = 0.0;           // E(theta - theta_hat)^2
    double mse_stderr = 0.0;
    double crb = 0.0;           // 1 / (m J) of the estimator's stage
    double crb_ratio = 0.0;     // crb / mse
    bool below_crb = false;     // mse < crb - 4 stderr
    std::vector<McReplicate> rows;
};

struct StageSamples {
    std::vector<double> x, y, xhat;
};

// One replicate of the pipeline at theta_true with m observations.
StageSamples simulate_pipeline(const ScalarPipeline& pipeline, double theta_true, std::size_t m, Rng& rng,
                               ThetaMode mode = ThetaMode::Shared, double spread = 0.1);

// CRB 1/(m J) of a stage. X̂ under SampleAverage is one sample of variance sigma_y^2/m.
double stage_crb(const ScalarPipeline& pipeline, Stage stage, double theta, std::size_t m);

McResult estimator_variance_mc(const ScalarPipeline& pipeline, const ParamEstimator& estimator, double theta_true,
                               std::size_t m, const McOptions& options);

// replicate,theta_true,theta_hat,squared_error
void write_replicates_csv(std::ostream& os, const McResult& result);

} // namespace estlab
