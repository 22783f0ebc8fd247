#pragma once

// Exact finite-alphabet probability engine. Everything here is computed by
// enumeration in linear space with 64-bit floats; no sampling.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "estlab/rng.hpp"

namespace estlab {

using Labels = std::vector<std::string>;

enum class LogBase { Nats, Bits };

inline constexpr double kDistributionTol = 1e-12;
inline constexpr double kJointTol = 1e-10;

// Canonical axis names. Reports name axes, never positions.
inline constexpr std::string_view kThetaAxis = "theta";
inline constexpr std::string_view kXAxis = "X";
inline constexpr std::string_view kYAxis = "Y";
inline constexpr std::string_view kXhatAxis = "Xhat";

// Shortest decimal text that round-trips to `value`; used for numeric labels.
std::string format_label(double value);
Labels numeric_labels(std::span<const double> values);
Labels index_labels(std::size_t n);
// Parses every label as a number; throws NonNumericSupport otherwise.
std::vector<double> parse_numeric_labels(const Labels& labels);

class FiniteDistribution {
public:
    FiniteDistribution() = default;
    FiniteDistribution(Labels support, std::vector<double> probs);

    static FiniteDistribution point_mass(Labels support, std::size_t index);
    static FiniteDistribution uniform(Labels support);

    std::size_t size() const noexcept { return probs_.size(); }
    const Labels& support() const noexcept { return support_; }
    const std::vector<double>& probs() const noexcept { return probs_; }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::optional<std::size_t> index_of(std::string_view label) const;

private:
    Labels support_;
    std::vector<double> probs_;
};

// Weights must be nonnegative with at least one positive entry. Labels
// default to "0", "1", ...
FiniteDistribution normalize(std::span<const double> weights, Labels support = {});

// p(out | in): one distribution per input label.
class ConditionalTable {
public:
    ConditionalTable() = default;
    ConditionalTable(Labels input, Labels output, std::vector<std::vector<double>> rows);

    static ConditionalTable identity(const Labels& support);

    const Labels& input() const noexcept { return input_; }
    const Labels& output() const noexcept { return output_; }
    std::size_t rows() const noexcept { return input_.size(); }
    std::size_t cols() const noexcept { return output_.size(); }
    double operator()(std::size_t i, std::size_t j) const { return rows_[i][j]; }
    const std::vector<double>& row(std::size_t i) const { return rows_[i]; }
    FiniteDistribution row_distribution(std::size_t i) const;

    // Row vector times table: sum_i p[i] * T(i, .).
    std::vector<double> push_forward(std::span<const double> p) const;
    // Composition this ∘ next: in -> out(this) -> out(next).
    ConditionalTable then(const ConditionalTable& next) const;

private:
    Labels input_;
    Labels output_;
    std::vector<std::vector<double>> rows_;
};

class JointDistribution {
public:
    JointDistribution() = default;
    JointDistribution(std::vector<std::string> axes, std::vector<Labels> supports,
                      std::vector<double> tensor);

    const std::vector<std::string>& axes() const noexcept { return axes_; }
    const std::vector<Labels>& supports() const noexcept { return supports_; }
    const std::vector<double>& tensor() const noexcept { return tensor_; }
    std::size_t rank() const noexcept { return axes_.size(); }
    std::size_t axis_index(std::string_view axis) const; // throws UnknownAxis
    bool has_axis(std::string_view axis) const noexcept;
    const Labels& support(std::string_view axis) const { return supports_[axis_index(axis)]; }

    double at(std::span<const std::size_t> index) const;
    std::size_t flat_index(std::span<const std::size_t> index) const;

    // Only valid for rank-1 joints.
    FiniteDistribution as_distribution() const;
    // p(b | a) as a table; rows with zero evidence are set to the marginal of b.
    ConditionalTable conditional(std::string_view given, std::string_view target) const;

private:
    std::vector<std::string> axes_;
    std::vector<Labels> supports_;
    std::vector<std::size_t> strides_;
    std::vector<double> tensor_;
};

// theta -> X -> Y [-> Xhat]. The channel is a single table, so it cannot
// depend on theta. A restorer is either one table (theta-agnostic) or one
// table per class (oracle-conditioned); never both.
struct PipelineChain {
    FiniteDistribution prior;
    ConditionalTable family;
    ConditionalTable channel;
    std::optional<ConditionalTable> restorer;
    std::vector<ConditionalTable> class_restorers;

    bool has_restorer() const noexcept { return restorer.has_value() || !class_restorers.empty(); }
    bool restorer_depends_on_theta() const noexcept { return !class_restorers.empty(); }
};

JointDistribution assemble_joint(const PipelineChain& chain);
JointDistribution marginal(const JointDistribution& joint, std::span<const std::string> keep_axes);
JointDistribution marginal(const JointDistribution& joint, std::initializer_list<std::string_view> keep_axes);
FiniteDistribution marginal_distribution(const JointDistribution& joint, std::string_view axis);
JointDistribution condition(const JointDistribution& joint, std::string_view axis, std::string_view value);

double entropy(std::span<const double> probs, LogBase base = LogBase::Nats);
double entropy(const FiniteDistribution& dist, LogBase base = LogBase::Nats);
double joint_entropy(const JointDistribution& joint, LogBase base = LogBase::Nats);
// H(target | given) = H(given, target) - H(given).
double conditional_entropy(const JointDistribution& joint, std::string_view target,
                           std::string_view given, LogBase base = LogBase::Nats);
double kl_divergence(const FiniteDistribution& p, const FiniteDistribution& q, LogBase base = LogBase::Nats);
double mutual_information(const JointDistribution& joint, std::string_view a, std::string_view b,
                          LogBase base = LogBase::Nats);

// JSON: {"axes": [...], "supports": [[...]], "tensor": [...]} row-major.
nlohmann::json to_json(const JointDistribution& joint);
nlohmann::json to_json(const FiniteDistribution& dist);
nlohmann::json to_json(const ConditionalTable& table);
JointDistribution joint_from_json(const nlohmann::json& doc);

// Random chains for audits. Rows are Dirichlet(1) draws; with probability
// `zero_fraction` an individual cell is zeroed before renormalization.
struct RandomChainShape {
    std::size_t classes = 2;
    std::size_t x_min = 2, x_max = 5;
    std::size_t y_min = 2, y_max = 5;
    std::size_t xhat_min = 2, xhat_max = 5;
    double zero_fraction = 0.2;
    bool with_restorer = true;
};

std::vector<double> random_simplex(Rng& rng, std::size_t n, double zero_fraction = 0.0);
ConditionalTable random_table(Rng& rng, const Labels& input, const Labels& output, double zero_fraction = 0.0);
PipelineChain random_chain(Rng& rng, const RandomChainShape& shape = {});

} // namespace estlab
