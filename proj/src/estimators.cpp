#include "estlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

#include "estlab/error.hpp"

namespace estlab {

std::string_view restorer_kind_name(RestorerKind kind) noexcept {
    switch (kind) {
    case RestorerKind::MmseMap: return "mmse";
    case RestorerKind::MapPoint: return "map";
    case RestorerKind::PosteriorSampler: return "posterior_sampler";
    case RestorerKind::PerfectPerception: return "perfect_perception";
    case RestorerKind::ConditionalPerfectPerception: return "conditional_perfect_perception";
    case RestorerKind::Deterministic: return "deterministic";
    case RestorerKind::Constant: return "constant";
    }
    return "unknown";
}

std::string_view stage_name(Stage stage) noexcept {
    switch (stage) {
    case Stage::X: return "X";
    case Stage::Y: return "Y";
    case Stage::Xhat: return "Xhat";
    }
    return "?";
}

const ConditionalTable& Restorer::table_for(std::size_t theta_index) const {
    if (class_tables.empty()) {
        return table;
    }
    return class_tables.at(theta_index);
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) {
            continue;
        }
        acc += probs[i];
        last = i;
        if (u < acc) {
            return i;
        }
    }
    return last; // rounding left u above the running total
}

std::size_t Restorer::draw(std::size_t y, Rng& rng, std::size_t theta_index) const {
    return sample_index(table_for(theta_index).row(y), rng);
}

nlohmann::json to_json(const Restorer& r) {
    nlohmann::json doc;
    doc["kind"] = restorer_kind_name(r.kind);
    if (r.class_tables.empty()) {
        doc["table"] = to_json(r.table);
    } else {
        auto tables = nlohmann::json::array();
        for (const auto& t : r.class_tables) {
            tables.push_back(to_json(t));
        }
        doc["class_tables"] = std::move(tables);
    }
    doc["ties"] = r.ties;
    return doc;
}

PipelineChain with_restorer(PipelineChain chain, const Restorer& restorer) {
    chain.restorer.reset();
    chain.class_restorers.clear();
    if (restorer.depends_on_theta()) {
        chain.class_restorers = restorer.class_tables;
    } else {
        chain.restorer = restorer.table;
    }
    return chain;
}

namespace {

ConditionalTable posterior_table(const JointDistribution& joint) {
    return joint.conditional(kYAxis, kXAxis);
}

// Deterministic table from y index to output index.
ConditionalTable point_table(const Labels& in, const Labels& out, const std::vector<std::size_t>& pick) {
    std::vector<std::vector<double>> rows(in.size(), std::vector<double>(out.size(), 0.0));
    for (std::size_t i = 0; i < in.size(); ++i) {
        rows[i][pick[i]] = 1.0;
    }
    return {in, out, std::move(rows)};
}

// Argmax per row with lowest-index tie breaking; records rows that tied.
std::vector<std::size_t> row_argmax(const std::vector<std::vector<double>>& rows, std::vector<std::size_t>& ties) {
    std::vector<std::size_t> pick(rows.size(), 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::size_t best = 0;
        bool tied = false;
        for (std::size_t j = 1; j < r.size(); ++j) {
            if (r[j] > r[best]) {
                best = j;
                tied = false;
            } else if (r[j] == r[best]) {
                tied = true;
            }
        }
        pick[i] = best;
        if (tied) {
            ties.push_back(i);
        }
    }
    return pick;
}

} // namespace

std::vector<double> mmse_values(const JointDistribution& joint) {
    const auto post = posterior_table(joint);
    const auto xs = parse_numeric_labels(post.output());
    std::vector<double> out(post.rows());
    for (std::size_t y = 0; y < post.rows(); ++y) {
        double m = 0.0;
        for (std::size_t x = 0; x < xs.size(); ++x) {
            m += post(y, x) * xs[x];
        }
        out[y] = m;
    }
    return out;
}

Restorer mmse_restorer(const JointDistribution& joint) {
    const auto values = mmse_values(joint);
    std::vector<double> distinct = values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::size_t> pick(values.size());
    for (std::size_t y = 0; y < values.size(); ++y) {
        pick[y] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), values[y]) -
                                           distinct.begin());
    }
    Restorer r;
    r.kind = RestorerKind::MmseMap;
    r.table = point_table(joint.support(kYAxis), numeric_labels(distinct), pick);
    return r;
}

Restorer map_restorer(const JointDistribution& joint) {
    const auto post = posterior_table(joint);
    std::vector<std::vector<double>> rows;
    for (std::size_t y = 0; y < post.rows(); ++y) {
        rows.push_back(post.row(y));
    }
    Restorer r;
    r.kind = RestorerKind::MapPoint;
    const auto pick = row_argmax(rows, r.ties);
    r.table = point_table(post.input(), post.output(), pick);
    return r;
}

Restorer likelihood_restorer(const JointDistribution& joint) {
    const auto lik = joint.conditional(kXAxis, kYAxis); // p(y | x)
    std::vector<std::vector<double>> rows(lik.cols(), std::vector<double>(lik.rows()));
    for (std::size_t x = 0; x < lik.rows(); ++x) {
        for (std::size_t y = 0; y < lik.cols(); ++y) {
            rows[y][x] = lik(x, y);
        }
    }
    Restorer r;
    r.kind = RestorerKind::Deterministic;
    const auto pick = row_argmax(rows, r.ties);
    r.table = point_table(lik.output(), lik.input(), pick);
    return r;
}

Restorer posterior_sampler(const JointDistribution& joint) {
    Restorer r;
    r.kind = RestorerKind::PosteriorSampler;
    r.table = posterior_table(joint);
    return r;
}

Restorer perfect_perception_restorer(const JointDistribution& joint, bool conditional,
                                     const std::optional<ThetaOracle>& oracle) {
    Restorer r;
    if (!conditional) {
        r.kind = RestorerKind::PerfectPerception;
        r.table = posterior_table(joint);
        return r;
    }
    if (!oracle) {
        throw Error(ErrorCode::MissingOracle, "conditional perfect perception needs a theta oracle");
    }
    r.kind = RestorerKind::ConditionalPerfectPerception;
    const auto& thetas = joint.support(kThetaAxis);
    const auto per_class = [&](std::size_t t) {
        const auto slice = condition(joint, kThetaAxis, thetas[t]);
        return slice.conditional(kYAxis, kXAxis);
    };
    if (oracle->theta) {
        const auto it = std::find(thetas.begin(), thetas.end(), *oracle->theta);
        if (it == thetas.end()) {
            throw Error(ErrorCode::InvalidArgument, "oracle class not in the theta support");
        }
        r.table = per_class(static_cast<std::size_t>(it - thetas.begin()));
        return r;
    }
    for (std::size_t t = 0; t < thetas.size(); ++t) {
        r.class_tables.push_back(per_class(t));
    }
    return r;
}

Restorer deterministic_restorer(const DeterministicMap& map) {
    Restorer r;
    r.kind = RestorerKind::Deterministic;
    r.table = map.to_table();
    return r;
}

Restorer constant_restorer(const Labels& y_support, const Labels& output, std::size_t index) {
    if (index >= output.size()) {
        throw Error(ErrorCode::InvalidArgument, "constant output index out of range");
    }
    Restorer r;
    r.kind = RestorerKind::Constant;
    r.table = point_table(y_support, output, std::vector<std::size_t>(y_support.size(), index));
    return r;
}

DiscreteTableFamily conditional_perfect_perception_family(const DiscreteTableFamily& family,
                                                          const ConditionalTable& channel) {
    if (channel.input() != family.support()) {
        throw Error(ErrorCode::SupportMismatch, "channel input differs from family support");
    }
    DiscreteTableFamily::Pmf pmf = [family, channel](double theta) {
        const auto px = family.pmf(theta);
        const auto py = channel.push_forward(px);
        std::vector<double> out(px.size(), 0.0);
        for (std::size_t y = 0; y < py.size(); ++y) {
            if (py[y] <= 0.0) {
                continue;
            }
            for (std::size_t x = 0; x < px.size(); ++x) {
                // p(y | theta) * p(x | y, theta)
                out[x] += px[x] * channel(x, y);
            }
        }
        return out;
    };
    return {family.support(), family.grid(), std::move(pmf), family.lower(), family.upper()};
}

DiscreteTableFamily perfect_perception_family(const DiscreteTableFamily& family, const ConditionalTable& channel,
                                              const FiniteDistribution& prior) {
    if (prior.size() != family.grid().size()) {
        throw Error(ErrorCode::SupportMismatch, "prior must weight every grid point");
    }
    const auto table = family.table();
    const auto mix_x = table.push_forward(prior.probs());
    const auto mix_y = channel.push_forward(mix_x);
    // theta-agnostic posterior p(x | y) under the mixture
    std::vector<std::vector<double>> post(channel.cols(), std::vector<double>(channel.rows(), 0.0));
    for (std::size_t y = 0; y < channel.cols(); ++y) {
        for (std::size_t x = 0; x < channel.rows(); ++x) {
            post[y][x] = mix_y[y] > 0.0 ? mix_x[x] * channel(x, y) / mix_y[y] : mix_x[x];
        }
    }
    DiscreteTableFamily::Pmf pmf = [family, channel, post](double theta) {
        const auto py = channel.push_forward(family.pmf(theta));
        std::vector<double> out(channel.rows(), 0.0);
        for (std::size_t y = 0; y < py.size(); ++y) {
            for (std::size_t x = 0; x < out.size(); ++x) {
                out[x] += py[y] * post[y][x];
            }
        }
        return out;
    };
    return {family.support(), family.grid(), std::move(pmf), family.lower(), family.upper()};
}

// ---------------------------------------------------------------------------

namespace {

double plain_mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double plugin_bayes(const ParamEstimator& e, std::span<const double> samples) {
    if (!e.plugin_family) {
        throw Error(ErrorCode::InvalidArgument, "plugin estimator needs a family table");
    }
    const auto& fam = *e.plugin_family;
    const auto thetas = parse_numeric_labels(fam.input());
    const auto prior = e.plugin_prior ? *e.plugin_prior : FiniteDistribution::uniform(fam.input());
    std::vector<double> logw(thetas.size());
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        logw[k] = prior[k] > 0.0 ? std::log(prior[k]) : -INFINITY;
        for (double s : samples) {
            const auto idx = static_cast<std::size_t>(s);
            if (s < 0.0 || idx >= fam.cols() || static_cast<double>(idx) != s) {
                throw Error(ErrorCode::InvalidArgument, "plugin samples must be outcome indices");
            }
            logw[k] += fam(k, idx) > 0.0 ? std::log(fam(k, idx)) : -INFINITY;
        }
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    if (!std::isfinite(top)) {
        throw Error(ErrorCode::ZeroEvidence, "samples impossible under every theta");
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const double w = std::exp(logw[k] - top);
        num += w * thetas[k];
        den += w;
    }
    return num / den;
}

} // namespace

double estimate_parameter(const ParamEstimator& e, std::span<const double> samples) {
    if (samples.empty()) {
        throw Error(ErrorCode::EmptySample, "no samples");
    }
    switch (e.kind) {
    case EstimatorKind::SampleMean:
    case EstimatorKind::MlGaussianMean:
        return plain_mean(samples);
    case EstimatorKind::MlLaplaceRate: {
        double total = 0.0;
        for (double s : samples) {
            total += std::abs(s);
        }
        if (total <= 0.0) {
            throw Error(ErrorCode::ZeroL1Norm, "all samples are zero");
        }
        return static_cast<double>(samples.size()) / total;
    }
    case EstimatorKind::PluginBayes:
        return plugin_bayes(e, samples);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown estimator");
}

double estimate_parameter(const ParamEstimator& e, const std::vector<std::vector<double>>& samples) {
    if (samples.empty()) {
        throw Error(ErrorCode::EmptySample, "no samples");
    }
    if (e.kind == EstimatorKind::MlLaplaceRate) {
        double total = 0.0;
        for (const auto& x : samples) {
            for (double v : x) {
                total += std::abs(v);
            }
        }
        if (total <= 0.0) {
            throw Error(ErrorCode::ZeroL1Norm, "all samples are zero");
        }
        return static_cast<double>(samples.size()) / total;
    }
    std::vector<double> flat;
    for (const auto& x : samples) {
        flat.insert(flat.end(), x.begin(), x.end());
    }
    return estimate_parameter(e, flat);
}

StageSamples simulate_pipeline(const ScalarPipeline& p, double theta_true, std::size_t m, Rng& rng, ThetaMode mode,
                               double spread) {
    StageSamples s;
    s.x.resize(m);
    s.y.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        double theta = theta_true;
        if (mode == ThetaMode::PerObservation) {
            theta = theta_true * (1.0 + spread * (2.0 * uniform01(rng) - 1.0));
        }
        if (p.source == SourceKind::GaussianMean) {
            s.x[i] = theta + p.sigma_x * standard_normal(rng);
        } else {
            const double mag = exponential(rng, theta);
            s.x[i] = uniform01(rng) < 0.5 ? -mag : mag;
        }
        s.y[i] = p.sigma_n > 0.0 ? s.x[i] + p.sigma_n * standard_normal(rng) : s.x[i];
    }
    switch (p.restorer) {
    case PipelineRestorer::Identity: s.xhat = s.y; break;
    case PipelineRestorer::SampleAverage: s.xhat = {plain_mean(s.y)}; break;
    case PipelineRestorer::NoiseOracle: s.xhat = s.x; break;
    }
    return s;
}

double stage_crb(const ScalarPipeline& p, Stage stage, double theta, std::size_t m) {
    if (m == 0) {
        throw Error(ErrorCode::InvalidArgument, "m must be positive");
    }
    const double md = static_cast<double>(m);
    if (p.source == SourceKind::LaplaceRate) {
        const bool clean = stage == Stage::X || p.sigma_n == 0.0 ||
                           (stage == Stage::Xhat && p.restorer == PipelineRestorer::NoiseOracle);
        if (!clean || (stage == Stage::Xhat && p.restorer == PipelineRestorer::SampleAverage)) {
            throw Error(ErrorCode::InvalidArgument, "no closed-form bound for this Laplace stage");
        }
        return theta * theta / md;
    }
    const double vx = p.sigma_x * p.sigma_x;
    const double vy = vx + p.sigma_n * p.sigma_n;
    switch (stage) {
    case Stage::X: return vx / md;
    case Stage::Y: return vy / md;
    case Stage::Xhat:
        switch (p.restorer) {
        case PipelineRestorer::Identity: return vy / md;
        case PipelineRestorer::SampleAverage: return vy / md; // one sample of variance vy/m
        case PipelineRestorer::NoiseOracle: return vx / md;
        }
    }
    return 0.0;
}

McResult estimator_variance_mc(const ScalarPipeline& pipeline, const ParamEstimator& estimator, double theta_true,
                               std::size_t m, const McOptions& opt) {
    if (opt.replicates < 2) {
        throw Error(ErrorCode::InvalidArgument, "need at least two replicates");
    }
    McResult res;
    res.rows.resize(opt.replicates);
    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            Rng rng = make_stream(opt.seed, r);
            const auto s = simulate_pipeline(pipeline, theta_true, m, rng, opt.theta_mode, opt.theta_spread);
            const auto& v = estimator.stage == Stage::X ? s.x : estimator.stage == Stage::Y ? s.y : s.xhat;
            const double hat = estimate_parameter(estimator, v);
            res.rows[r] = {r, theta_true, hat, (hat - theta_true) * (hat - theta_true)};
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(opt.replicates)));
    if (jobs == 1) {
        work(0, opt.replicates);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (opt.replicates + jobs - 1) / jobs;
        for (unsigned j = 0; j < jobs; ++j) {
            const std::size_t b = j * chunk, e = std::min(opt.replicates, b + chunk);
            if (b < e) {
                pool.emplace_back(work, b, e);
            }
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    // Reductions run in replicate order so results do not depend on jobs.
    const double n = static_cast<double>(opt.replicates);
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& row : res.rows) {
        sum += row.theta_hat;
        sum_sq += row.squared_error;
    }
    res.mean = sum / n;
    res.mse = sum_sq / n;
    double var = 0.0, m4 = 0.0, mse_var = 0.0;
    for (const auto& row : res.rows) {
        const double d = row.theta_hat - res.mean;
        var += d * d;
        m4 += d * d * d * d;
        mse_var += (row.squared_error - res.mse) * (row.squared_error - res.mse);
    }
    res.variance = var / (n - 1.0);
    // Var(s^2) ~ (mu4 - sigma^4) / n for large n.
    res.variance_stderr = std::sqrt(std::max(0.0, m4 / n - res.variance * res.variance) / n);
    res.mse_stderr = std::sqrt(mse_var / (n - 1.0) / n);
    res.crb = stage_crb(pipeline, estimator.stage, theta_true, m);
    res.crb_ratio = res.crb / res.mse;
    res.below_crb = res.mse < res.crb - 4.0 * res.mse_stderr;
    return res;
}

void write_replicates_csv(std::ostream& os, const McResult& result) {
    os << "replicate,theta_true,theta_hat,squared_error\n";
    char buf[128];
    for (const auto& r : result.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.replicate, r.theta_true, r.theta_hat,
                      r.squared_error);
        os << buf;
    }
}

} // namespace estlab
