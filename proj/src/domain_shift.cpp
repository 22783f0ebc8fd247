#include "estlab/domain_shift.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include "estlab/error.hpp"

namespace estlab {

namespace {

std::vector<double> normalized_weights(std::span<const double> weights, std::size_t m) {
    if (weights.empty()) {
        return std::vector<double>(m, 1.0 / static_cast<double>(m));
    }
    if (weights.size() != m) {
        throw Error(ErrorCode::DimensionMismatch, "one weight per target required");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) {
            throw Error(ErrorCode::NegativeWeight, "domain weights must be nonnegative");
        }
        total += w;
    }
    if (total <= 0.0) {
        throw Error(ErrorCode::AllZero, "domain weights are all zero");
    }
    std::vector<double> out(weights.begin(), weights.end());
    for (double& w : out) {
        w /= total;
    }
    return out;
}

void check_targets(const std::vector<Eigen::VectorXd>& targets) {
    if (targets.empty()) {
        throw Error(ErrorCode::InvalidArgument, "need at least one target");
    }
    for (const auto& t : targets) {
        if (t.size() != targets.front().size()) {
            throw Error(ErrorCode::DimensionMismatch, "targets differ in dimension");
        }
    }
}

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = standard_normal(rng);
    }
    return v;
}

constexpr std::uint64_t kTestStream = 0x7e57'0000'0000'0000ULL;

} // namespace

MinimizerResult double_meaning_minimizer(const std::vector<Eigen::VectorXd>& targets, std::span<const double> weights,
                                         Loss loss) {
    check_targets(targets);
    const auto w = normalized_weights(weights, targets.size());
    const Eigen::Index n = targets.front().size();
    MinimizerResult r;
    r.xhat = Eigen::VectorXd::Zero(n);
    if (loss == Loss::Mse) {
        for (std::size_t k = 0; k < targets.size(); ++k) {
            r.xhat += w[k] * targets[k];
        }
        return r;
    }
    std::vector<std::pair<double, double>> col(targets.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < targets.size(); ++k) {
            col[k] = {targets[k][i], w[k]};
        }
        std::sort(col.begin(), col.end());
        double cum = 0.0;
        for (std::size_t k = 0; k < col.size(); ++k) {
            cum += col[k].second;
            if (cum >= 0.5 - 1e-12) {
                r.xhat[i] = col[k].first;
                // Exactly half the weight below: every point up to the next value is optimal.
                if (std::abs(cum - 0.5) <= 1e-12 && k + 1 < col.size() && col[k + 1].first > col[k].first) {
                    r.ties.push_back(i);
                }
                break;
            }
        }
    }
    return r;
}

Eigen::VectorXd weighted_quadratic_gradient(const std::vector<Eigen::VectorXd>& targets,
                                            std::span<const double> weights, const Eigen::VectorXd& x) {
    check_targets(targets);
    const auto w = normalized_weights(weights, targets.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
        g += w[k] * (x - targets[k]);
    }
    return g;
}

DomainSpec single_domain(const DomainSpec& spec, std::size_t d) {
    if (d >= spec.domains()) {
        throw Error(ErrorCode::InvalidArgument, "domain index out of range");
    }
    DomainSpec s;
    s.name = spec.name + "/domain" + std::to_string(d);
    s.dim_y = spec.dim_y;
    s.dim_x = spec.dim_x;
    s.weights = {1.0};
    auto draw = spec.draw;
    s.draw = [draw, d](Rng& rng, std::size_t) {
        auto full = draw(rng, d);
        DomainDraw out;
        out.y = std::move(full.y);
        for (auto& [j, t] : full.targets) {
            if (j == d) {
                out.targets.emplace_back(0, std::move(t));
            }
        }
        return out;
    };
    return s;
}

nlohmann::json to_json(const LinearRestorer& r) {
    nlohmann::json doc;
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.W.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(r.W.cols()));
        for (Eigen::Index j = 0; j < r.W.cols(); ++j) {
            row[static_cast<std::size_t>(j)] = r.W(i, j);
        }
        rows.push_back(row);
    }
    doc["W"] = std::move(rows);
    doc["b"] = std::vector<double>(r.b.data(), r.b.data() + r.b.size());
    doc["epochs"] = r.loss_log.size();
    doc["converged"] = r.converged;
    return doc;
}

void write_loss_log_csv(std::ostream& os, const LinearRestorer& r) {
    os << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < r.loss_log.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, r.loss_log[e]);
        os << buf;
    }
}

namespace {

struct TrainingSet {
    Eigen::MatrixXd Y;                // N x p (p = dim_y + bias)
    std::vector<std::vector<std::pair<double, Eigen::VectorXd>>> targets; // per sample (weight, target)
};

TrainingSet build_training_set(const DomainSpec& spec, const TrainConfig& cfg) {
    if (spec.domains() == 0 || !spec.draw) {
        throw Error(ErrorCode::InvalidArgument, "domain spec has no domains");
    }
    const Eigen::Index p = spec.dim_y + (cfg.bias ? 1 : 0);
    TrainingSet ts;
    ts.Y.resize(static_cast<Eigen::Index>(cfg.samples), p);
    ts.targets.resize(cfg.samples);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
        Rng rng = make_stream(cfg.seed, i);
        auto d = spec.draw(rng, i % spec.domains());
        if (d.y.size() != spec.dim_y || d.targets.empty()) {
            throw Error(ErrorCode::DimensionMismatch, "draw does not match the declared dimensions");
        }
        const auto row = static_cast<Eigen::Index>(i);
        ts.Y.row(row).head(spec.dim_y) = d.y.transpose();
        if (cfg.bias) {
            ts.Y(row, p - 1) = 1.0;
        }
        double total = 0.0;
        for (const auto& [j, t] : d.targets) {
            total += spec.weights.at(j);
        }
        for (auto& [j, t] : d.targets) {
            if (t.size() != spec.dim_x) {
                throw Error(ErrorCode::DimensionMismatch, "target dimension differs from dim_x");
            }
            ts.targets[i].emplace_back(spec.weights[j] / total, std::move(t));
        }
    }
    return ts;
}

LinearRestorer finish(const Eigen::MatrixXd& Wt, const DomainSpec& spec, bool bias) {
    LinearRestorer r;
    r.W = Wt.leftCols(spec.dim_y);
    r.b = bias ? Eigen::VectorXd(Wt.col(Wt.cols() - 1)) : Eigen::VectorXd::Zero(spec.dim_x);
    return r;
}

double l1_loss(const TrainingSet& ts, const Eigen::MatrixXd& Wt, Eigen::MatrixXd* grad) {
    const auto n = static_cast<double>(ts.targets.size());
    double loss = 0.0;
    if (grad) {
        grad->setZero(Wt.rows(), Wt.cols());
    }
    for (std::size_t i = 0; i < ts.targets.size(); ++i) {
        const Eigen::VectorXd yi = ts.Y.row(static_cast<Eigen::Index>(i)).transpose();
        const Eigen::VectorXd pred = Wt * yi;
        for (const auto& [w, t] : ts.targets[i]) {
            const Eigen::VectorXd r = pred - t;
            loss += w * r.cwiseAbs().sum();
            if (grad) {
                const Eigen::VectorXd s = r.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
                *grad += w * s * yi.transpose();
            }
        }
    }
    if (grad) {
        *grad /= n;
    }
    return loss / n;
}

} // namespace

LinearRestorer train_mixed_restorer(const DomainSpec& spec, const TrainConfig& cfg) {
    if (cfg.samples == 0) {
        throw Error(ErrorCode::InvalidArgument, "need training samples");
    }
    const auto ts = build_training_set(spec, cfg);
    const Eigen::Index p = ts.Y.cols();
    const auto n = static_cast<double>(cfg.samples);

    if (cfg.solver == Solver::LeastSquares) {
        if (cfg.loss != Loss::Mse) {
            throw Error(ErrorCode::InvalidArgument, "least squares solver needs the MSE loss");
        }
        std::size_t rows = 0;
        for (const auto& t : ts.targets) {
            rows += t.size();
        }
        Eigen::MatrixXd A(static_cast<Eigen::Index>(rows), p);
        Eigen::MatrixXd B(static_cast<Eigen::Index>(rows), spec.dim_x);
        Eigen::Index k = 0;
        for (std::size_t i = 0; i < ts.targets.size(); ++i) {
            for (const auto& [w, t] : ts.targets[i]) {
                const double s = std::sqrt(w);
                A.row(k) = s * ts.Y.row(static_cast<Eigen::Index>(i));
                B.row(k) = s * t.transpose();
                ++k;
            }
        }
        const Eigen::MatrixXd Wt = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(A).solve(B).transpose();
        auto r = finish(Wt, spec, cfg.bias);
        const Eigen::MatrixXd res = A * Wt.transpose() - B;
        r.loss_log.push_back(res.squaredNorm() / n);
        r.converged = true;
        return r;
    }

    Eigen::MatrixXd Wt = Eigen::MatrixXd::Zero(spec.dim_x, p);
    double lr = cfg.lr;
    std::vector<double> log;
    int rises = 0;
    bool converged = false;

    if (cfg.loss == Loss::Mse) {
        // Sufficient statistics of the weighted quadratic loss.
        const Eigen::MatrixXd Syy = ts.Y.transpose() * ts.Y / n;
        Eigen::MatrixXd Sty = Eigen::MatrixXd::Zero(spec.dim_x, p);
        double Stt = 0.0;
        for (std::size_t i = 0; i < ts.targets.size(); ++i) {
            for (const auto& [w, t] : ts.targets[i]) {
                Sty += w * t * ts.Y.row(static_cast<Eigen::Index>(i));
                Stt += w * t.squaredNorm();
            }
        }
        Sty /= n;
        Stt /= n;
        const auto loss_at = [&](const Eigen::MatrixXd& M) {
            return (M * Syy * M.transpose()).trace() - 2.0 * (M * Sty.transpose()).trace() + Stt;
        };
        double prev = loss_at(Wt);
        log.push_back(prev);
        for (std::size_t e = 1; e <= cfg.max_epochs; ++e) {
            const Eigen::MatrixXd g = 2.0 * (Wt * Syy - Sty);
            if (g.cwiseAbs().maxCoeff() <= cfg.grad_tol) {
                converged = true;
                break;
            }
            Wt -= lr * g;
            const double cur = loss_at(Wt);
            log.push_back(cur);
            if (!std::isfinite(cur)) {
                throw Error(ErrorCode::Diverged, "training loss is not finite");
            }
            if (cur > prev + 1e-12 * std::abs(prev)) {
                lr *= 0.5;
                if (++rises >= 10) {
                    throw Error(ErrorCode::Diverged, "loss rose for 10 consecutive epochs");
                }
            } else {
                rises = 0;
            }
            prev = cur;
        }
    } else {
        Eigen::MatrixXd g;
        double prev = l1_loss(ts, Wt, &g);
        log.push_back(prev);
        for (std::size_t e = 1; e <= cfg.max_epochs; ++e) {
            if (lr < 1e-12) {
                converged = true;
                break;
            }
            Wt -= lr * g;
            const double cur = l1_loss(ts, Wt, &g);
            log.push_back(cur);
            if (!std::isfinite(cur)) {
                throw Error(ErrorCode::Diverged, "training loss is not finite");
            }
            if (cur > prev) {
                lr *= 0.5;
                if (++rises >= 10) {
                    throw Error(ErrorCode::Diverged, "loss rose for 10 consecutive epochs");
                }
            } else {
                rises = 0;
            }
            prev = cur;
        }
    }
    auto r = finish(Wt, spec, cfg.bias);
    r.loss_log = std::move(log);
    r.converged = converged;
    return r;
}

Eigen::VectorXd resolution_shift_prediction(const Eigen::VectorXd& x2, double sigma1, double sigma2) {
    const double s12 = blur_difference(sigma1, sigma2);
    const auto h = blur_matrix(static_cast<std::size_t>(x2.size()), s12);
    return 0.5 * (x2 + h.apply(x2));
}

MixedVsTargeted mixed_vs_targeted_report(const DomainSpec& spec, const TrainConfig& cfg, std::size_t test_samples) {
    MixedVsTargeted out;
    out.mixed = train_mixed_restorer(spec, cfg);
    for (std::size_t d = 0; d < spec.domains(); ++d) {
        TrainConfig c = cfg;
        c.seed = mix64(cfg.seed + d + 1);
        out.targeted.push_back(train_mixed_restorer(single_domain(spec, d), c));
    }
    for (std::size_t d = 0; d < spec.domains(); ++d) {
        DomainErrors e;
        e.domain = d;
        for (std::size_t i = 0; i < test_samples; ++i) {
            Rng rng = make_stream(cfg.seed ^ kTestStream, i * spec.domains() + d);
            const auto draw = spec.draw(rng, d);
            const Eigen::VectorXd* target = nullptr;
            for (const auto& [j, t] : draw.targets) {
                if (j == d) {
                    target = &t;
                }
            }
            if (!target) {
                throw Error(ErrorCode::InvalidArgument, "draw does not list its own domain target");
            }
            const double dim = static_cast<double>(target->size());
            e.mixed_mse += (out.mixed.predict(draw.y) - *target).squaredNorm() / dim;
            e.targeted_mse += (out.targeted[d].predict(draw.y) - *target).squaredNorm() / dim;
        }
        e.mixed_mse /= static_cast<double>(test_samples);
        e.targeted_mse /= static_cast<double>(test_samples);
        e.gap = e.mixed_mse - e.targeted_mse;
        out.per_domain.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------

DomainSpec linear_domains_instance(Eigen::Index n, std::vector<double> scales) {
    if (n <= 0 || scales.empty()) {
        throw Error(ErrorCode::InvalidArgument, "need a positive dimension and at least one domain");
    }
    DomainSpec s;
    s.name = "linear_domains";
    s.dim_y = s.dim_x = n;
    s.weights.assign(scales.size(), 1.0 / static_cast<double>(scales.size()));
    s.draw = [n, scales](Rng& rng, std::size_t) {
        DomainDraw d;
        d.y = standard_normal_vector(rng, n);
        for (std::size_t k = 0; k < scales.size(); ++k) {
            d.targets.emplace_back(k, scales[k] * d.y);
        }
        return d;
    };
    return s;
}

DomainSpec two_blur_instance(Eigen::Index n, double sigma1, double sigma2, double smooth, double noise) {
    const auto nn = static_cast<std::size_t>(n);
    const auto hs = std::make_shared<Eigen::MatrixXd>(blur_matrix(nn, smooth).matrix);
    const auto h2 = std::make_shared<Eigen::MatrixXd>(blur_matrix(nn, sigma2).matrix);
    const auto h12 = std::make_shared<Eigen::MatrixXd>(blur_matrix(nn, blur_difference(sigma1, sigma2)).matrix);
    DomainSpec s;
    s.name = "two_blur";
    s.dim_y = s.dim_x = n;
    s.weights = {0.5, 0.5};
    s.draw = [=](Rng& rng, std::size_t) {
        const Eigen::VectorXd x2 = *hs * standard_normal_vector(rng, n);
        DomainDraw d;
        d.y = *h2 * x2;
        if (noise > 0.0) {
            d.y += noise * standard_normal_vector(rng, n);
        }
        d.targets.emplace_back(0, *h12 * x2);
        d.targets.emplace_back(1, x2);
        return d;
    };
    return s;
}

DomainSpec disjoint_instance(Eigen::Index n, std::vector<double> scales) {
    const auto m = static_cast<Eigen::Index>(scales.size());
    if (m == 0 || n % m != 0) {
        throw Error(ErrorCode::DimensionMismatch, "dimension must split evenly across domains");
    }
    const Eigen::Index block = n / m;
    DomainSpec s;
    s.name = "disjoint";
    s.dim_y = s.dim_x = n;
    s.weights.assign(scales.size(), 1.0 / static_cast<double>(scales.size()));
    s.draw = [n, block, scales](Rng& rng, std::size_t dom) {
        DomainDraw d;
        d.y = Eigen::VectorXd::Zero(n);
        d.y.segment(static_cast<Eigen::Index>(dom) * block, block) = standard_normal_vector(rng, block);
        d.targets.emplace_back(dom, scales[dom] * d.y);
        return d;
    };
    return s;
}

Eigen::VectorXd decimate_interpolate(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i % 2 == 0) {
            y[i] = x[i];
        } else if (i + 1 < n) {
            y[i] = 0.5 * (x[i - 1] + x[i + 1]);
        } else {
            y[i] = x[i - 1];
        }
    }
    return y;
}

DomainSpec sampling_shift_instance(Eigen::Index n, double smooth) {
    const auto hs = std::make_shared<Eigen::MatrixXd>(blur_matrix(static_cast<std::size_t>(n), smooth).matrix);
    DomainSpec s;
    s.name = "sampling_shift";
    s.dim_y = s.dim_x = n;
    s.weights = {0.5, 0.5};
    s.draw = [=](Rng& rng, std::size_t dom) {
        const Eigen::VectorXd x = *hs * standard_normal_vector(rng, n);
        DomainDraw d;
        d.y = dom == 0 ? x : decimate_interpolate(x);
        d.targets.emplace_back(dom, x);
        return d;
    };
    return s;
}

} // namespace estlab
