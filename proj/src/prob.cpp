#include "estlab/prob.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "estlab/error.hpp"

namespace estlab {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::UnknownAxis: return "UnknownAxis";
    case ErrorCode::ZeroEvidence: return "ZeroEvidence";
    case ErrorCode::AbsoluteContinuityViolated: return "AbsoluteContinuityViolated";
    case ErrorCode::ZeroDensity: return "ZeroDensity";
    case ErrorCode::DpiViolation: return "DpiViolation";
    case ErrorCode::NotSufficient: return "NotSufficient";
    case ErrorCode::SupportTooSmall: return "SupportTooSmall";
    case ErrorCode::GridTooNarrow: return "GridTooNarrow";
    case ErrorCode::NonNumericSupport: return "NonNumericSupport";
    case ErrorCode::MissingOracle: return "MissingOracle";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::ZeroL1Norm: return "ZeroL1Norm";
    case ErrorCode::NotBinary: return "NotBinary";
    case ErrorCode::OrderingViolation: return "OrderingViolation";
    case ErrorCode::PartitionIncomplete: return "PartitionIncomplete";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::MissingAdmissibilityConstants: return "MissingAdmissibilityConstants";
    case ErrorCode::UnknownExperiment: return "UnknownExperiment";
    case ErrorCode::InvalidOverride: return "InvalidOverride";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

std::string format_label(double value) {
    if (value == 0.0) {
        return "0"; // folds -0
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

Labels numeric_labels(std::span<const double> values) {
    Labels out;
    out.reserve(values.size());
    for (double v : values) {
        out.push_back(format_label(v));
    }
    return out;
}

Labels index_labels(std::size_t n) {
    Labels out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(std::to_string(i));
    }
    return out;
}

std::vector<double> parse_numeric_labels(const Labels& labels) {
    std::vector<double> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
        double v = 0.0;
        const auto* end = label.data() + label.size();
        const auto res = std::from_chars(label.data(), end, v);
        if (res.ec != std::errc() || res.ptr != end) {
            throw Error(ErrorCode::NonNumericSupport, "label '" + label + "' is not numeric");
        }
        out.push_back(v);
    }
    return out;
}

namespace {

void check_unique(const Labels& labels, const char* what) {
    std::set<std::string_view> seen;
    for (const auto& l : labels) {
        if (!seen.insert(l).second) {
            throw Error(ErrorCode::InvalidDistribution, std::string(what) + ": duplicate label '" + l + "'");
        }
    }
}

void check_row(std::span<const double> probs, double tol, const char* what) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw Error(ErrorCode::InvalidDistribution, std::string(what) + ": negative or non-finite probability");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol) {
        throw Error(ErrorCode::InvalidDistribution,
                    std::string(what) + ": probabilities sum to " + format_label(sum));
    }
}

std::vector<double> normalized_copy(std::span<const double> w) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<double> out(w.begin(), w.end());
    for (double& v : out) {
        v /= total;
    }
    return out;
}

} // namespace

FiniteDistribution::FiniteDistribution(Labels support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
    if (support_.size() != probs_.size()) {
        throw Error(ErrorCode::InvalidDistribution, "support and probability sizes differ");
    }
    if (probs_.empty()) {
        throw Error(ErrorCode::InvalidDistribution, "empty support");
    }
    check_unique(support_, "distribution");
    check_row(probs_, kDistributionTol, "distribution");
}

FiniteDistribution FiniteDistribution::point_mass(Labels support, std::size_t index) {
    std::vector<double> p(support.size(), 0.0);
    p.at(index) = 1.0;
    return {std::move(support), std::move(p)};
}

FiniteDistribution FiniteDistribution::uniform(Labels support) {
    std::vector<double> p(support.size(), 1.0 / static_cast<double>(support.size()));
    return {std::move(support), std::move(p)};
}

std::optional<std::size_t> FiniteDistribution::index_of(std::string_view label) const {
    const auto it = std::find(support_.begin(), support_.end(), label);
    if (it == support_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - support_.begin());
}

FiniteDistribution normalize(std::span<const double> weights, Labels support) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::NegativeWeight, "weights must be finite and nonnegative");
        }
        total += w;
    }
    if (total <= 0.0) {
        throw Error(ErrorCode::AllZero, "every weight is zero");
    }
    if (support.empty()) {
        support = index_labels(weights.size());
    }
    return {std::move(support), normalized_copy(weights)};
}

// ---------------------------------------------------------------------------

ConditionalTable::ConditionalTable(Labels input, Labels output, std::vector<std::vector<double>> rows)
    : input_(std::move(input)), output_(std::move(output)), rows_(std::move(rows)) {
    if (rows_.size() != input_.size()) {
        throw Error(ErrorCode::InvalidDistribution, "row count differs from input support size");
    }
    if (output_.empty()) {
        throw Error(ErrorCode::InvalidDistribution, "empty output support");
    }
    check_unique(input_, "table input");
    check_unique(output_, "table output");
    for (const auto& r : rows_) {
        if (r.size() != output_.size()) {
            throw Error(ErrorCode::InvalidDistribution, "row width differs from output support size");
        }
        check_row(r, kDistributionTol, "table row");
    }
}

ConditionalTable ConditionalTable::identity(const Labels& support) {
    std::vector<std::vector<double>> rows(support.size(), std::vector<double>(support.size(), 0.0));
    for (std::size_t i = 0; i < support.size(); ++i) {
        rows[i][i] = 1.0;
    }
    return {support, support, std::move(rows)};
}

FiniteDistribution ConditionalTable::row_distribution(std::size_t i) const {
    return {output_, rows_.at(i)};
}

std::vector<double> ConditionalTable::push_forward(std::span<const double> p) const {
    if (p.size() != rows()) {
        throw Error(ErrorCode::SupportMismatch, "vector length differs from table input size");
    }
    std::vector<double> out(cols(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
        if (p[i] == 0.0) {
            continue;
        }
        for (std::size_t j = 0; j < cols(); ++j) {
            out[j] += p[i] * rows_[i][j];
        }
    }
    return out;
}

ConditionalTable ConditionalTable::then(const ConditionalTable& next) const {
    if (output_ != next.input_) {
        throw Error(ErrorCode::SupportMismatch, "composed tables do not share a support");
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(rows_.size());
    for (const auto& r : rows_) {
        rows.push_back(normalized_copy(next.push_forward(r)));
    }
    return {input_, next.output_, std::move(rows)};
}

// ---------------------------------------------------------------------------

JointDistribution::JointDistribution(std::vector<std::string> axes, std::vector<Labels> supports,
                                     std::vector<double> tensor)
    : axes_(std::move(axes)), supports_(std::move(supports)), tensor_(std::move(tensor)) {
    if (axes_.size() != supports_.size() || axes_.empty()) {
        throw Error(ErrorCode::InvalidDistribution, "axes and supports disagree");
    }
    check_unique(axes_, "joint axes");
    strides_.assign(axes_.size(), 1);
    std::size_t cells = 1;
    for (std::size_t k = axes_.size(); k-- > 0;) {
        if (supports_[k].empty()) {
            throw Error(ErrorCode::InvalidDistribution, "empty support on axis " + axes_[k]);
        }
        check_unique(supports_[k], "joint support");
        strides_[k] = cells;
        cells *= supports_[k].size();
    }
    if (tensor_.size() != cells) {
        throw Error(ErrorCode::InvalidDistribution, "tensor size does not match supports");
    }
    check_row(tensor_, kJointTol, "joint");
}

std::size_t JointDistribution::axis_index(std::string_view axis) const {
    const auto it = std::find(axes_.begin(), axes_.end(), axis);
    if (it == axes_.end()) {
        throw Error(ErrorCode::UnknownAxis, "no axis named '" + std::string(axis) + "'");
    }
    return static_cast<std::size_t>(it - axes_.begin());
}

bool JointDistribution::has_axis(std::string_view axis) const noexcept {
    return std::find(axes_.begin(), axes_.end(), axis) != axes_.end();
}

std::size_t JointDistribution::flat_index(std::span<const std::size_t> index) const {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < index.size(); ++k) {
        flat += index[k] * strides_[k];
    }
    return flat;
}

double JointDistribution::at(std::span<const std::size_t> index) const {
    return tensor_.at(flat_index(index));
}

FiniteDistribution JointDistribution::as_distribution() const {
    if (rank() != 1) {
        throw Error(ErrorCode::InvalidArgument, "joint has more than one axis");
    }
    return {supports_[0], normalized_copy(tensor_)};
}

ConditionalTable JointDistribution::conditional(std::string_view given, std::string_view target) const {
    const std::string g(given), t(target);
    const std::vector<std::string> keep{g, t};
    const auto pair = marginal(*this, keep);
    const bool given_first = pair.axes()[0] == g;
    const auto& gs = support(given);
    const auto& ts = support(target);
    const auto target_marginal = marginal_distribution(*this, target).probs();
    std::vector<std::vector<double>> rows(gs.size(), std::vector<double>(ts.size(), 0.0));
    for (std::size_t i = 0; i < gs.size(); ++i) {
        double mass = 0.0;
        for (std::size_t j = 0; j < ts.size(); ++j) {
            const std::size_t idx[2] = {given_first ? i : j, given_first ? j : i};
            rows[i][j] = pair.at(idx);
            mass += rows[i][j];
        }
        if (mass > 0.0) {
            for (double& v : rows[i]) {
                v /= mass;
            }
        } else {
            rows[i] = target_marginal;
        }
    }
    return {gs, ts, std::move(rows)};
}

// ---------------------------------------------------------------------------

JointDistribution assemble_joint(const PipelineChain& chain) {
    const auto& prior = chain.prior;
    const auto& fam = chain.family;
    const auto& ch = chain.channel;
    if (fam.input() != prior.support()) {
        throw Error(ErrorCode::SupportMismatch, "family input differs from prior support");
    }
    if (ch.input() != fam.output()) {
        throw Error(ErrorCode::SupportMismatch, "channel input differs from family output");
    }
    if (chain.restorer && !chain.class_restorers.empty()) {
        throw Error(ErrorCode::InvalidArgument, "chain has both a shared and a per-class restorer");
    }
    const std::size_t nt = prior.size(), nx = fam.cols(), ny = ch.cols();

    if (!chain.has_restorer()) {
        std::vector<double> tensor(nt * nx * ny);
        for (std::size_t t = 0; t < nt; ++t) {
            for (std::size_t x = 0; x < nx; ++x) {
                const double ptx = prior[t] * fam(t, x);
                for (std::size_t y = 0; y < ny; ++y) {
                    tensor[(t * nx + x) * ny + y] = ptx * ch(x, y);
                }
            }
        }
        return {{std::string(kThetaAxis), std::string(kXAxis), std::string(kYAxis)},
                {prior.support(), fam.output(), ch.output()},
                std::move(tensor)};
    }

    if (!chain.class_restorers.empty() && chain.class_restorers.size() != nt) {
        throw Error(ErrorCode::SupportMismatch, "need one restorer table per class");
    }
    const auto& first = chain.restorer ? *chain.restorer : chain.class_restorers.front();
    for (std::size_t t = 0; t < (chain.restorer ? 1 : nt); ++t) {
        const auto& r = chain.restorer ? *chain.restorer : chain.class_restorers[t];
        if (r.input() != ch.output() || r.output() != first.output()) {
            throw Error(ErrorCode::SupportMismatch, "restorer input differs from channel output");
        }
    }
    const std::size_t nh = first.cols();
    std::vector<double> tensor(nt * nx * ny * nh);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& r = chain.restorer ? *chain.restorer : chain.class_restorers[t];
        for (std::size_t x = 0; x < nx; ++x) {
            const double ptx = prior[t] * fam(t, x);
            for (std::size_t y = 0; y < ny; ++y) {
                const double ptxy = ptx * ch(x, y);
                for (std::size_t h = 0; h < nh; ++h) {
                    tensor[((t * nx + x) * ny + y) * nh + h] = ptxy * r(y, h);
                }
            }
        }
    }
    return {{std::string(kThetaAxis), std::string(kXAxis), std::string(kYAxis), std::string(kXhatAxis)},
            {prior.support(), fam.output(), ch.output(), first.output()},
            std::move(tensor)};
}

JointDistribution marginal(const JointDistribution& joint, std::span<const std::string> keep_axes) {
    std::vector<bool> keep(joint.rank(), false);
    for (const auto& a : keep_axes) {
        keep[joint.axis_index(a)] = true;
    }
    std::vector<std::string> axes;
    std::vector<Labels> supports;
    for (std::size_t k = 0; k < joint.rank(); ++k) {
        if (keep[k]) {
            axes.push_back(joint.axes()[k]);
            supports.push_back(joint.supports()[k]);
        }
    }
    if (axes.empty()) {
        throw Error(ErrorCode::UnknownAxis, "marginal needs at least one axis");
    }
    std::vector<std::size_t> out_strides(axes.size(), 1);
    std::size_t cells = 1;
    for (std::size_t k = axes.size(); k-- > 0;) {
        out_strides[k] = cells;
        cells *= supports[k].size();
    }
    // For each source axis, the stride it contributes in the output (0 if summed out).
    std::vector<std::size_t> contrib(joint.rank(), 0);
    for (std::size_t k = 0, o = 0; k < joint.rank(); ++k) {
        if (keep[k]) {
            contrib[k] = out_strides[o++];
        }
    }
    std::vector<double> out(cells, 0.0);
    std::vector<std::size_t> idx(joint.rank(), 0);
    const auto& tensor = joint.tensor();
    for (std::size_t f = 0; f < tensor.size(); ++f) {
        std::size_t o = 0;
        for (std::size_t k = 0; k < joint.rank(); ++k) {
            o += idx[k] * contrib[k];
        }
        out[o] += tensor[f];
        for (std::size_t k = joint.rank(); k-- > 0;) {
            if (++idx[k] < joint.supports()[k].size()) {
                break;
            }
            idx[k] = 0;
        }
    }
    return {std::move(axes), std::move(supports), std::move(out)};
}

JointDistribution marginal(const JointDistribution& joint, std::initializer_list<std::string_view> keep_axes) {
    std::vector<std::string> keep;
    for (auto a : keep_axes) {
        keep.emplace_back(a);
    }
    return marginal(joint, keep);
}

FiniteDistribution marginal_distribution(const JointDistribution& joint, std::string_view axis) {
    return marginal(joint, {axis}).as_distribution();
}

JointDistribution condition(const JointDistribution& joint, std::string_view axis, std::string_view value) {
    const std::size_t a = joint.axis_index(axis);
    const auto& labels = joint.supports()[a];
    const auto it = std::find(labels.begin(), labels.end(), value);
    if (it == labels.end()) {
        throw Error(ErrorCode::ZeroEvidence, "value '" + std::string(value) + "' is not in the support");
    }
    const std::size_t v = static_cast<std::size_t>(it - labels.begin());
    if (joint.rank() == 1) {
        throw Error(ErrorCode::InvalidArgument, "cannot condition a one-axis joint on its only axis");
    }
    std::vector<std::string> axes;
    std::vector<Labels> supports;
    for (std::size_t k = 0; k < joint.rank(); ++k) {
        if (k != a) {
            axes.push_back(joint.axes()[k]);
            supports.push_back(joint.supports()[k]);
        }
    }
    std::vector<double> slice;
    std::vector<std::size_t> idx(joint.rank(), 0);
    const auto& tensor = joint.tensor();
    double mass = 0.0;
    for (std::size_t f = 0; f < tensor.size(); ++f) {
        if (idx[a] == v) {
            slice.push_back(tensor[f]);
            mass += tensor[f];
        }
        for (std::size_t k = joint.rank(); k-- > 0;) {
            if (++idx[k] < joint.supports()[k].size()) {
                break;
            }
            idx[k] = 0;
        }
    }
    if (mass <= 0.0) {
        throw Error(ErrorCode::ZeroEvidence, "observed value has probability zero");
    }
    for (double& p : slice) {
        p /= mass;
    }
    return {std::move(axes), std::move(supports), std::move(slice)};
}

// ---------------------------------------------------------------------------

namespace {

double log_scale(LogBase base) {
    return base == LogBase::Bits ? 1.0 / std::log(2.0) : 1.0;
}

} // namespace

double entropy(std::span<const double> probs, LogBase base) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return std::max(0.0, h * log_scale(base));
}

double entropy(const FiniteDistribution& dist, LogBase base) {
    return entropy(dist.probs(), base);
}

double joint_entropy(const JointDistribution& joint, LogBase base) {
    return entropy(joint.tensor(), base);
}

double conditional_entropy(const JointDistribution& joint, std::string_view target, std::string_view given,
                           LogBase base) {
    return joint_entropy(marginal(joint, {given, target}), base) -
           joint_entropy(marginal(joint, {given}), base);
}

double kl_divergence(const FiniteDistribution& p, const FiniteDistribution& q, LogBase base) {
    if (p.support() != q.support()) {
        throw Error(ErrorCode::SupportMismatch, "KL divergence needs identical supports");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) {
            continue;
        }
        if (q[i] == 0.0) {
            throw Error(ErrorCode::AbsoluteContinuityViolated,
                        "q vanishes at '" + p.support()[i] + "' where p is positive");
        }
        d += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(0.0, d * log_scale(base));
}

double mutual_information(const JointDistribution& joint, std::string_view a, std::string_view b,
                          LogBase base) {
    if (a == b) {
        throw Error(ErrorCode::InvalidArgument, "mutual information needs two distinct axes");
    }
    const auto pair = marginal(joint, {a, b});
    const auto pa = marginal(pair, {pair.axes()[0]}).tensor();
    const auto pb = marginal(pair, {pair.axes()[1]}).tensor();
    const auto& t = pair.tensor();
    double mi = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pb.size(); ++j) {
            const double pij = t[i * pb.size() + j];
            if (pij > 0.0) {
                mi += pij * std::log(pij / (pa[i] * pb[j]));
            }
        }
    }
    return std::max(0.0, mi * log_scale(base));
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const JointDistribution& joint) {
    nlohmann::json doc;
    doc["axes"] = joint.axes();
    doc["supports"] = joint.supports();
    doc["tensor"] = joint.tensor();
    return doc;
}

nlohmann::json to_json(const FiniteDistribution& dist) {
    nlohmann::json doc;
    doc["axes"] = std::vector<std::string>{"value"};
    doc["supports"] = std::vector<Labels>{dist.support()};
    doc["tensor"] = dist.probs();
    return doc;
}

nlohmann::json to_json(const ConditionalTable& table) {
    nlohmann::json doc;
    doc["input"] = table.input();
    doc["output"] = table.output();
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < table.rows(); ++i) {
        rows.push_back(table.row(i));
    }
    doc["rows"] = std::move(rows);
    return doc;
}

JointDistribution joint_from_json(const nlohmann::json& doc) {
    try {
        return {doc.at("axes").get<std::vector<std::string>>(), doc.at("supports").get<std::vector<Labels>>(),
                doc.at("tensor").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed joint document: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

std::vector<double> random_simplex(Rng& rng, std::size_t n, double zero_fraction) {
    std::vector<double> w(n);
    for (;;) {
        double total = 0.0;
        for (auto& v : w) {
            v = exponential(rng, 1.0);
            if (zero_fraction > 0.0 && uniform01(rng) < zero_fraction) {
                v = 0.0;
            }
            total += v;
        }
        if (total > 0.0) {
            for (auto& v : w) {
                v /= total;
            }
            return w;
        }
    }
}

ConditionalTable random_table(Rng& rng, const Labels& input, const Labels& output, double zero_fraction) {
    std::vector<std::vector<double>> rows;
    rows.reserve(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
        rows.push_back(random_simplex(rng, output.size(), zero_fraction));
    }
    return {input, output, std::move(rows)};
}

PipelineChain random_chain(Rng& rng, const RandomChainShape& shape) {
    const auto pick = [&rng](std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
    };
    const Labels classes = index_labels(shape.classes);
    const Labels xs = index_labels(pick(shape.x_min, shape.x_max));
    const Labels ys = index_labels(pick(shape.y_min, shape.y_max));
    PipelineChain chain;
    chain.prior = FiniteDistribution(classes, random_simplex(rng, classes.size()));
    chain.family = random_table(rng, classes, xs, shape.zero_fraction);
    chain.channel = random_table(rng, xs, ys, shape.zero_fraction);
    if (shape.with_restorer) {
        const Labels hs = index_labels(pick(shape.xhat_min, shape.xhat_max));
        chain.restorer = random_table(rng, ys, hs, shape.zero_fraction);
    }
    return chain;
}

} // namespace estlab
