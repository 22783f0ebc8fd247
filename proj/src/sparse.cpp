#include "estlab/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <thread>
#include <tuple>

#include "estlab/error.hpp"

namespace estlab {

SpikeSignal::SpikeSignal(std::size_t n_, std::vector<std::size_t> support_, std::vector<double> amplitudes_)
    : n(n_), support(std::move(support_)), amplitudes(std::move(amplitudes_)) {
    if (support.size() != amplitudes.size()) {
        throw Error(ErrorCode::DimensionMismatch, "one amplitude per support index");
    }
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (support[i] >= n || (i > 0 && support[i] <= support[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, "support must be strictly increasing inside [0, n)");
        }
        if (amplitudes[i] == 0.0 || !std::isfinite(amplitudes[i])) {
            throw Error(ErrorCode::InvalidArgument, "amplitudes on the support must be finite and nonzero");
        }
    }
}

Eigen::VectorXd SpikeSignal::dense() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < support.size(); ++i) {
        x[static_cast<Eigen::Index>(support[i])] = amplitudes[i];
    }
    return x;
}

double SpikeSignal::l1_norm() const {
    double s = 0.0;
    for (double a : amplitudes) {
        s += std::abs(a);
    }
    return s;
}

KernelOperator build_kernel_operator(double sigma, std::size_t n, double fs, std::optional<Admissibility> adm) {
    if (!(sigma > 0.0) || !(fs > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "kernel scale and sampling rate must be positive");
    }
    const double width = sigma * fs;
    if (static_cast<double>(n) < 8.0 * width) {
        throw Error(ErrorCode::InvalidArgument, "signal length must be at least 8 sigma Fs");
    }
    const auto len = static_cast<Eigen::Index>(n);
    KernelOperator op;
    op.G.resize(len, len);
    for (Eigen::Index k = 0; k < len; ++k) {
        for (Eigen::Index j = 0; j < len; ++j) {
            const double d = static_cast<double>(k - j);
            op.G(k, j) = std::exp(-d * d / (2.0 * width * width));
        }
    }
    op.sigma = sigma;
    op.fs = fs;
    op.alpha0 = 1.0;
    op.gamma0 = 1.0;
    op.admissibility = adm;
    if (adm && (!(adm->beta > 0.0) || !(adm->epsilon > 0.0))) {
        throw Error(ErrorCode::InvalidArgument, "admissibility constants must be positive");
    }
    return op;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
    return v.unaryExpr([t](double a) { return a > t ? a - t : (a < -t ? a + t : 0.0); });
}

double gram_norm(const Eigen::MatrixXd& G, int iterations) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(G.cols()) / std::sqrt(static_cast<double>(G.cols()));
    double lambda = 0.0;
    for (int i = 0; i < iterations; ++i) {
        const Eigen::VectorXd w = G.transpose() * (G * v);
        const double nrm = w.norm();
        if (nrm == 0.0) {
            return 0.0;
        }
        lambda = v.dot(w);
        v = w / nrm;
    }
    return lambda;
}

namespace {

double l1(const Eigen::VectorXd& v) {
    return v.cwiseAbs().sum();
}

double penalized_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& G, const Eigen::VectorXd& x, double tau) {
    return 0.5 * (y - G * x).squaredNorm() + tau * l1(x);
}

// Exact minimizer on the sign pattern of `x`, accepted only if it satisfies
// the optimality conditions of the full problem.
std::optional<Eigen::VectorXd> polish(const Eigen::MatrixXd& gram, const Eigen::VectorXd& gty, const Eigen::VectorXd& x,
                                      double tau) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (x[i] != 0.0) {
            active.push_back(i);
        }
    }
    const double slack = 1e-10 * std::max(1.0, tau);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    if (!active.empty()) {
        const auto k = static_cast<Eigen::Index>(active.size());
        const Eigen::MatrixXd ga = gram(active, active);
        Eigen::VectorXd rhs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index i = active[static_cast<std::size_t>(a)];
            rhs[a] = gty[i] - tau * (x[i] > 0.0 ? 1.0 : -1.0);
        }
        const Eigen::VectorXd za = ga.ldlt().solve(rhs);
        for (Eigen::Index a = 0; a < k; ++a) {
            const Eigen::Index i = active[static_cast<std::size_t>(a)];
            if (!std::isfinite(za[a]) || za[a] == 0.0 || (za[a] > 0.0) != (x[i] > 0.0)) {
                return std::nullopt;
            }
            z[i] = za[a];
        }
    }
    // KKT: G^T (y - G z) = tau sign(z) on the support, |.| <= tau off it
    const Eigen::VectorXd c = gty - gram * z;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (z[i] == 0.0 && std::abs(c[i]) > tau + slack) {
            return std::nullopt;
        }
        if (z[i] != 0.0 && std::abs(c[i] - tau * (z[i] > 0.0 ? 1.0 : -1.0)) > slack) {
            return std::nullopt;
        }
    }
    return z;
}

double residual_norm(const Eigen::VectorXd& r, Fidelity f) {
    return f == Fidelity::L1 ? l1(r) : r.norm();
}

} // namespace

SolveResult lasso_solve(const Eigen::VectorXd& y, const Eigen::MatrixXd& G, double tau, const SolverConfig& cfg,
                        const Eigen::VectorXd* warm, double lipschitz) {
    if (y.size() != G.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "y length differs from operator rows");
    }
    if (!(tau >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "penalty weight must be nonnegative");
    }
    const double L = lipschitz > 0.0 ? lipschitz : 1.01 * gram_norm(G);
    const Eigen::VectorXd gty = G.transpose() * y;
    const Eigen::MatrixXd gram = G.transpose() * G;
    SolveResult res;
    res.tau = tau;
    Eigen::VectorXd x = warm ? *warm : Eigen::VectorXd::Zero(G.cols());
    if (L <= 0.0) {
        res.x = Eigen::VectorXd::Zero(G.cols());
        res.converged = true;
        res.residual = y.norm();
        res.objective = 0.5 * y.squaredNorm();
        return res;
    }
    bool done = false;
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        if (cfg.polish && it % static_cast<std::size_t>(std::max(1, cfg.polish_every)) == 0) {
            if (auto z = polish(gram, gty, x, tau)) {
                x = *z;
                done = true;
                break;
            }
        }
        const Eigen::VectorXd next = soft_threshold(x - (gram * x - gty) / L, tau / L);
        const double step = (next - x).cwiseAbs().maxCoeff();
        x = next;
        res.iterations = it + 1;
        if (cfg.record_trace) {
            res.objective_trace.push_back(penalized_objective(y, G, x, tau));
        }
        if (step <= cfg.step_tol) {
            if (cfg.polish) {
                if (auto z = polish(gram, gty, x, tau)) {
                    x = *z;
                }
            }
            done = true;
            break;
        }
    }
    res.converged = done;
    res.x = std::move(x);
    res.objective = penalized_objective(y, G, res.x, tau);
    res.residual = (y - G * res.x).norm();
    return res;
}

std::vector<SolveResult> penalty_path(const Eigen::VectorXd& y, const Eigen::MatrixXd& G, std::span<const double> taus,
                                      const SolverConfig& cfg) {
    const double L = 1.01 * gram_norm(G);
    std::vector<SolveResult> out;
    for (double tau : taus) {
        const Eigen::VectorXd* warm = out.empty() ? nullptr : &out.back().x;
        out.push_back(lasso_solve(y, G, tau, cfg, warm, L));
    }
    return out;
}

SolveResult l1_map_solve(const Eigen::VectorXd& y, const KernelOperator& op, const SolveMode& mode,
                         const SolverConfig& cfg) {
    const Eigen::MatrixXd& G = op.G;
    if (y.size() != G.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "y length differs from operator rows");
    }
    if (const auto* p = std::get_if<Penalized>(&mode)) {
        if (!(p->lambda > 0.0) || !(p->sigma_z > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "penalized mode needs lambda > 0 and sigma_z > 0");
        }
        return lasso_solve(y, G, p->tau(), cfg);
    }
    const auto& c = std::get<Constrained>(mode);
    if (!(c.delta >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "noise budget must be nonnegative");
    }
    const double limit = c.delta + cfg.feasibility_tol;
    const auto feasible = [&](const SolveResult& r) { return residual_norm(y - G * r.x, c.fidelity) <= limit; };
    const auto finish = [&](SolveResult r) {
        r.residual = residual_norm(y - G * r.x, c.fidelity);
        return r;
    };

    const double tau_max = (G.transpose() * y).cwiseAbs().maxCoeff();
    if (residual_norm(y, c.fidelity) <= limit || tau_max == 0.0) {
        SolveResult r;
        r.x = Eigen::VectorXd::Zero(G.cols());
        r.converged = residual_norm(y, c.fidelity) <= limit;
        r.tau = tau_max;
        r.objective = 0.5 * y.squaredNorm();
        return finish(r);
    }
    const double L = 1.01 * gram_norm(G);
    SolveResult last;
    double tau_bad = tau_max;
    std::optional<SolveResult> good;
    for (double tau = tau_max * cfg.path_factor; tau >= tau_max * cfg.path_floor; tau *= cfg.path_factor) {
        last = lasso_solve(y, G, tau, cfg, last.x.size() ? &last.x : nullptr, L);
        if (feasible(last)) {
            good = last;
            break;
        }
        tau_bad = tau;
    }
    if (!good) {
        last.converged = false;
        return finish(last);
    }
    // Largest feasible tau gives the smallest l1 norm along the path.
    for (int b = 0; b < cfg.bisection_steps; ++b) {
        const double mid = std::sqrt(tau_bad * good->tau);
        if (mid <= good->tau * (1.0 + 1e-12) || mid >= tau_bad) {
            break;
        }
        auto trial = lasso_solve(y, G, mid, cfg, &good->x, L);
        if (feasible(trial)) {
            good = std::move(trial);
        } else {
            tau_bad = mid;
        }
    }
    return finish(*good);
}

RecoveryCertificate recovery_certificate(const Eigen::VectorXd& x_true, const Eigen::VectorXd& x_hat,
                                         const KernelOperator& op, double noise_budget, NormKind norm) {
    if (!op.admissibility) {
        throw Error(ErrorCode::MissingAdmissibilityConstants, "certificate needs beta and epsilon");
    }
    if (x_true.size() != x_hat.size() || x_true.size() != op.size()) {
        throw Error(ErrorCode::DimensionMismatch, "signals must match the operator size");
    }
    const auto& a = *op.admissibility;
    RecoveryCertificate c;
    c.norm = norm;
    c.noise_budget = noise_budget;
    const double w = op.fs * op.sigma;
    c.rho = std::max(op.gamma0 / (a.epsilon * a.epsilon), w * w * op.alpha0);
    if (norm == NormKind::L1) {
        c.bound = 4.0 * c.rho * noise_budget / (a.beta * op.gamma0);
        c.achieved = l1(x_hat - x_true);
    } else {
        const double nn = static_cast<double>(op.size());
        c.bound = 64.0 * nn * c.rho * c.rho * noise_budget / (a.beta * a.beta * op.gamma0 * op.gamma0);
        c.achieved = (x_hat - x_true).norm();
    }
    c.holds = c.achieved <= c.bound;
    return c;
}

nlohmann::json to_json(const RecoveryCertificate& c) {
    nlohmann::json doc;
    doc["norm"] = c.norm == NormKind::L1 ? "l1" : "l2";
    doc["noise_budget"] = c.noise_budget;
    doc["rho"] = c.rho;
    doc["bound"] = c.bound;
    doc["achieved"] = c.achieved;
    doc["holds"] = c.holds;
    return doc;
}

nlohmann::json sparse_problem_json(const KernelOperator& op, const SpikeSignal& x, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& x_hat, const std::optional<RecoveryCertificate>& cert) {
    nlohmann::json doc;
    doc["n"] = x.n;
    doc["Fs"] = op.fs;
    doc["sigma"] = op.sigma;
    doc["support"] = x.support;
    doc["amplitudes"] = x.amplitudes;
    doc["y"] = std::vector<double>(y.data(), y.data() + y.size());
    doc["x_hat"] = std::vector<double>(x_hat.data(), x_hat.data() + x_hat.size());
    doc["certificate"] = cert ? to_json(*cert) : nlohmann::json(nullptr);
    return doc;
}

std::size_t default_separation(double sigma, double fs) {
    return 2 * static_cast<std::size_t>(std::ceil(sigma * fs)) + 1;
}

std::vector<std::size_t> random_support(Rng& rng, std::size_t n, std::size_t k, std::size_t sep) {
    if (k == 0) {
        return {};
    }
    if ((k - 1) * sep >= n) {
        throw Error(ErrorCode::InvalidArgument, "too many spikes for the requested separation");
    }
    // Place k points in n - (k-1)(sep-1) slots, then spread them out.
    const std::size_t slots = n - (k - 1) * (sep - 1);
    std::vector<std::size_t> picks;
    while (picks.size() < k) {
        const auto v = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(slots));
        if (std::find(picks.begin(), picks.end(), v) == picks.end()) {
            picks.push_back(v);
        }
    }
    std::sort(picks.begin(), picks.end());
    for (std::size_t i = 0; i < k; ++i) {
        picks[i] += i * (sep - 1);
    }
    return picks;
}

SpikeSignal draw_laplace_spikes(Rng& rng, const LambdaPipelineConfig& cfg) {
    auto support = random_support(rng, cfg.n, cfg.spikes, default_separation(cfg.kernel_sigma, cfg.fs));
    const double total = exponential(rng, cfg.lambda);
    // Uniform split of the norm over the spikes (sorted uniform spacings).
    std::vector<double> cuts{0.0, 1.0};
    for (std::size_t i = 1; i < cfg.spikes; ++i) {
        cuts.push_back(uniform01(rng));
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> amps(cfg.spikes);
    for (std::size_t i = 0; i < cfg.spikes; ++i) {
        double a = total * (cuts[i + 1] - cuts[i]);
        if (a == 0.0) {
            a = total / static_cast<double>(cfg.spikes);
        }
        amps[i] = uniform01(rng) < 0.5 ? -a : a;
    }
    return {cfg.n, std::move(support), std::move(amps)};
}

LambdaPipelineReport lambda_pipeline_experiment(const LambdaPipelineConfig& cfg) {
    if (cfg.m == 0 || cfg.replicates < 2 || !(cfg.lambda > 0.0) || cfg.sigma_n < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "invalid lambda pipeline configuration");
    }
    const auto op = build_kernel_operator(cfg.kernel_sigma, cfg.n, cfg.fs);
    const double L = 1.01 * gram_norm(op.G);
    const bool noiseless = cfg.sigma_n == 0.0;
    LambdaPipelineReport rep;
    rep.rows.resize(cfg.replicates);

    const auto restore = [&](const Eigen::VectorXd& y, const SpikeSignal& x) -> Eigen::VectorXd {
        if (noiseless) {
            SolverConfig sc = cfg.solver;
            sc.feasibility_tol = 1e-12 * std::max(1.0, l1(y));
            Eigen::VectorXd xh = l1_map_solve(y, op, Constrained{0.0, Fidelity::L1}, sc).x;
            if (cfg.restorer == SparseRestorer::NormOracle && l1(xh) > 0.0) {
                xh *= x.l1_norm() / l1(xh);
            }
            return xh;
        }
        switch (cfg.restorer) {
        case SparseRestorer::L1MapConstrained: {
            const double delta = static_cast<double>(cfg.n) * cfg.sigma_n * std::sqrt(2.0 / std::numbers::pi);
            return l1_map_solve(y, op, Constrained{delta, Fidelity::L1}, cfg.solver).x;
        }
        case SparseRestorer::L1MapPenalized:
        case SparseRestorer::NormOracle: {
            Eigen::VectorXd xh = lasso_solve(y, op.G, cfg.lambda * cfg.sigma_n * cfg.sigma_n, cfg.solver, nullptr, L).x;
            if (cfg.restorer == SparseRestorer::NormOracle) {
                xh = l1(xh) > 0.0 ? Eigen::VectorXd(xh * (x.l1_norm() / l1(xh))) : x.dense();
            }
            return xh;
        }
        }
        return {};
    };

    const auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            Rng rng = make_stream(cfg.seed, r);
            double sum_x = 0.0, sum_h = 0.0;
            for (std::size_t i = 0; i < cfg.m; ++i) {
                const auto x = draw_laplace_spikes(rng, cfg);
                Eigen::VectorXd y = op.G * x.dense();
                for (Eigen::Index k = 0; k < y.size(); ++k) {
                    y[k] += cfg.sigma_n * standard_normal(rng);
                }
                sum_x += x.l1_norm();
                sum_h += l1(restore(y, x));
            }
            const double md = static_cast<double>(cfg.m);
            rep.rows[r] = {r, md / sum_x, sum_h > 0.0 ? md / sum_h : INFINITY};
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(cfg.replicates)));
    if (jobs == 1) {
        work(0, cfg.replicates);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (cfg.replicates + jobs - 1) / jobs;
        for (unsigned j = 0; j < jobs; ++j) {
            const std::size_t b = j * chunk, e = std::min(cfg.replicates, b + chunk);
            if (b < e) {
                pool.emplace_back(work, b, e);
            }
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    const double n = static_cast<double>(cfg.replicates);
    std::vector<double> ex(cfg.replicates), eh(cfg.replicates), d(cfg.replicates);
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
        ex[r] = (rep.rows[r].lambda_hat_x - cfg.lambda) * (rep.rows[r].lambda_hat_x - cfg.lambda);
        eh[r] = (rep.rows[r].lambda_hat_xhat - cfg.lambda) * (rep.rows[r].lambda_hat_xhat - cfg.lambda);
        d[r] = eh[r] - ex[r];
    }
    const auto mean_se = [n](const std::vector<double>& v) {
        double m = 0.0;
        for (double a : v) {
            m += a;
        }
        m /= n;
        double s = 0.0;
        for (double a : v) {
            s += (a - m) * (a - m);
        }
        return std::pair{m, std::sqrt(s / (n - 1.0) / n)};
    };
    std::tie(rep.mse_x, rep.se_x) = mean_se(ex);
    std::tie(rep.mse_xhat, rep.se_xhat) = mean_se(eh);
    double mean_d = 0.0;
    std::tie(mean_d, rep.se_diff) = mean_se(d);
    rep.crb = cfg.lambda * cfg.lambda / static_cast<double>(cfg.m);
    rep.restored_not_better = mean_d >= -4.0 * rep.se_diff;
    rep.clean_above_crb = rep.mse_x >= rep.crb - 4.0 * rep.se_x;
    return rep;
}

void write_lambda_csv(std::ostream& os, const LambdaPipelineReport& rep) {
    os << "replicate,lambda_hat_x,lambda_hat_xhat\n";
    char buf[96];
    for (const auto& r : rep.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.replicate, r.lambda_hat_x, r.lambda_hat_xhat);
        os << buf;
    }
}

} // namespace estlab
