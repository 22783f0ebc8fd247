// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "estlab/channels.hpp"
#include "estlab/class_bounds.hpp"
#include "estlab/domain_shift.hpp"
#include "estlab/error.hpp"
#include "estlab/estimators.hpp"
#include "estlab/experiments.hpp"
#include "estlab/info.hpp"
#include "estlab/prob.hpp"
#include "estlab/rng.hpp"
#include "estlab/sparse.hpp"

using namespace estlab;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + ("violated: " + what);
        }
    }
    void note(const char* fmt, double v) {
        char buf[96];
        std::snprintf(buf, sizeof buf, fmt, v);
        detail += (detail.empty() ? "" : "; ") + std::string(buf);
    }
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::size_t find_label(const Labels& labels, std::string_view l) {
    return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), l) - labels.begin());
}

double at2(const JointDistribution& j, std::size_t a, std::size_t b) {
    const std::size_t idx[] = {a, b};
    return j.at(idx);
}

RandomChainShape binary_shape() {
    RandomChainShape s;
    s.classes = 2;
    return s;
}

// Random family over X, then a channel giving each x its own block of y labels.
PipelineChain invertible_chain(Rng& rng) {
    const std::size_t nx = 2 + rng() % 4;
    PipelineChain c;
    c.prior = FiniteDistribution(Labels{"a", "b"}, random_simplex(rng, 2));
    const Labels xs = index_labels(nx);
    c.family = random_table(rng, c.prior.support(), xs, 0.2);
    Labels ys;
    std::vector<std::size_t> block_start;
    for (std::size_t x = 0; x < nx; ++x) {
        block_start.push_back(ys.size());
        const std::size_t k = 1 + rng() % 3;
        for (std::size_t j = 0; j < k; ++j) {
            ys.push_back("y" + std::to_string(ys.size()));
        }
    }
    block_start.push_back(ys.size());
    std::vector<std::vector<double>> rows(nx, std::vector<double>(ys.size(), 0.0));
    for (std::size_t x = 0; x < nx; ++x) {
        const auto w = random_simplex(rng, block_start[x + 1] - block_start[x]);
        std::copy(w.begin(), w.end(), rows[x].begin() + static_cast<std::ptrdiff_t>(block_start[x]));
    }
    c.channel = ConditionalTable(xs, ys, rows);
    return c;
}

// X refines a statistic T: each t splits into two x values. The split is
// shared across classes when `sufficient`, class-specific otherwise.
struct RefinedFamily {
    FiniteDistribution prior;
    ConditionalTable family;
    DeterministicMap statistic;
};

RefinedFamily refined_family(Rng& rng, bool sufficient) {
    const std::size_t nt = 2 + rng() % 3;
    const Labels classes{"a", "b"};
    std::vector<std::vector<double>> t_rows;
    for (std::size_t c = 0; c < 2; ++c) {
        t_rows.push_back(random_simplex(rng, nt));
    }
    std::vector<std::vector<double>> split(2, std::vector<double>(nt));
    for (std::size_t t = 0; t < nt; ++t) {
        split[0][t] = 0.1 + 0.8 * uniform01(rng);
        split[1][t] = sufficient ? split[0][t] : 0.1 + 0.8 * uniform01(rng);
    }
    const Labels xs = index_labels(2 * nt);
    std::vector<std::vector<double>> rows(2, std::vector<double>(2 * nt));
    DeterministicMap stat{xs, index_labels(nt), {}};
    for (std::size_t t = 0; t < nt; ++t) {
        stat.mapping.push_back(t);
        stat.mapping.push_back(t);
        for (std::size_t c = 0; c < 2; ++c) {
            rows[c][2 * t] = t_rows[c][t] * split[c][t];
            rows[c][2 * t + 1] = t_rows[c][t] * (1 - split[c][t]);
        }
    }
    return {FiniteDistribution(classes, random_simplex(rng, 2)), ConditionalTable(classes, xs, rows), stat};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig config(const std::string& id, std::uint64_t seed = kSeed) {
    ExperimentConfig c;
    c.id = id;
    c.seed = seed;
    c.seed_given = true;
    return c;
}

// ---------------------------------------------------------------------------

Outcome naive_tree() {
    Outcome o;
    const Stopwatch sw;
    const auto chain = naive_tree_chain();
    const auto joint = assemble_joint(chain);
    const auto xy = marginal(joint, {"X", "Y"});
    const std::size_t y15 = find_label(xy.support("Y"), "1.5");
    const double p11 = at2(xy, find_label(xy.support("X"), "1"), y15);
    const double p41 = at2(xy, find_label(xy.support("X"), "4"), y15);
    o.require(std::abs(p41 - 0.0667) <= 5e-4, "p(x=4,y=1.5) = 0.0667 +- 5e-4");
    o.require(std::abs(p11 - 0.1067) <= 5e-4, "p(x=1,y=1.5) = 0.1067 +- 5e-4");

    const auto post = marginal_distribution(condition(marginal(joint, {"theta", "Y"}), "Y", "1.5"), "theta");
    const std::size_t theta_hat = static_cast<std::size_t>(
        std::max_element(post.probs().begin(), post.probs().end()) - post.probs().begin());
    o.require(post.support()[theta_hat] == "theta1", "posterior argmax = theta1");

    // Likelihood argmax over x of p(y=1.5 | x), and the class-2 region B_X.
    const auto ml = likelihood_restorer(joint);
    Rng rng(0);
    const std::string x_ml = ml.table.output()[ml.draw(y15, rng)];
    const auto& b_row = chain.family.row(1);
    const std::size_t xi = find_label(chain.family.output(), x_ml);
    o.require(b_row[xi] > 0.0 && chain.family.row(0)[xi] == 0.0, "likelihood argmax in B_X");

    const auto run = run_experiment(config("naive_tree"));
    o.require(run.all_pass, "naive_tree experiment verdicts");
    const double t = sw.seconds();
    o.require(t < 1.0, "runtime < 1 s");
    o.note("p41=%.5f", p41);
    o.note("p11=%.5f", p11);
    o.note("P(theta1|y)=%.5f", post[0]);
    o.detail += "; x_ml=" + x_ml;
    o.note("%.2fs", t);
    return o;
}

Outcome pe_identity() {
    Outcome o;
    const Stopwatch sw;
    double worst = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
        Rng rng = make_stream(kSeed, i);
        const auto chain = random_chain(rng, binary_shape());
        const auto joint = assemble_joint(chain);
        for (const char* axis : {"X", "Y", "Xhat"}) {
            const auto t = stage_conditionals(joint, axis);
            const double pe = bayes_error(chain.prior, t);
            worst = std::max(worst, std::abs(pe - 0.5 * (1.0 - separability(chain.prior, t, 1.0))));
        }
    }
    const double t = sw.seconds();
    o.require(worst <= 1e-10, "|P_e - (1 - J1)/2| <= 1e-10");
    o.require(t < 10.0, "runtime < 10 s");
    o.note("max dev=%.2e", worst);
    o.note("%.2fs", t);
    return o;
}

Outcome stage_ordering() {
    Outcome o;
    const Stopwatch sw;
    double worst_order = 0.0, worst_eq = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
        Rng rng = make_stream(kSeed + 1, i);
        const auto chain = random_chain(rng, binary_shape());
        try {
            const auto a = theorem_ordering_audit(chain);
            worst_order = std::max({worst_order, a.pe_y - a.pe_xhat, a.pe_x - a.pe_y});
        } catch (const Error& e) {
            o.require(false, e.what());
        }

        Rng rng2 = make_stream(kSeed + 2, i);
        const auto inv = invertible_chain(rng2);
        const auto joint = assemble_joint(inv);
        const auto cond = with_restorer(inv, perfect_perception_restorer(joint, true, ThetaOracle{}));
        const auto b = theorem_ordering_audit(cond);
        worst_eq = std::max(worst_eq, std::abs(b.pe_xhat - b.pe_x));
    }
    const double t = sw.seconds();
    o.require(worst_order <= 1e-9, "P_e(xhat) >= P_e(y) >= P_e(x) within 1e-9");
    o.require(worst_eq <= 1e-9, "P_e(xhat) = P_e(x) within 1e-9 for conditional restorers");
    o.require(t < 30.0, "runtime < 30 s");
    o.note("max order violation=%.2e", worst_order);
    o.note("max equality dev=%.2e", worst_eq);
    o.note("%.2fs", t);
    return o;
}

Outcome dpi() {
    Outcome o;
    double worst = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
        Rng rng = make_stream(kSeed + 3, i);
        const auto a = dpi_audit(random_chain(rng));
        worst = std::max({worst, a.i_theta_y - a.i_theta_x, a.i_theta_xhat - a.i_theta_y});
    }
    o.require(worst <= 1e-9, "I(theta;X) >= I(theta;Y) >= I(theta;Xhat) within 1e-9");

    std::size_t agree = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        Rng rng = make_stream(kSeed + 4, i);
        const bool constructed = i % 2 == 0;
        const auto f = refined_family(rng, constructed);
        const PipelineChain chain{f.prior, f.family, f.statistic.to_table(), std::nullopt, {}};
        const auto a = dpi_audit(chain);
        const bool equal = std::abs(a.i_theta_x - a.i_theta_y) <= 1e-9;
        const bool check = sufficiency_check(f.prior, f.family, f.statistic);
        agree += (equal == check && check == constructed) ? 1 : 0;
    }
    o.require(agree == 100, "equality iff sufficiency on 100 instances");
    o.note("max violation=%.2e", worst);
    o.note("sufficiency agreement=%.0f/100", static_cast<double>(agree));
    return o;
}

Outcome fisher_forms() {
    Outcome o;
    double worst = 0.0;
    for (double sigma : {0.5, 1.0, 2.0}) {
        const std::size_t m = 10;
        const auto a = fisher_information(GaussianMean{sigma}, 0.0, m);
        o.require(std::abs(a.J - 1.0 / (sigma * sigma)) <= 1e-15 && std::abs(a.crb - sigma * sigma / m) <= 1e-15,
                  "Gaussian closed forms");
        const auto fd = fisher_information(quantized_gaussian_mean(sigma, 0.0), 0.0, m);
        worst = std::max({worst, std::abs(fd.J - a.J) / a.J, std::abs(fd.crb - a.crb) / a.crb});
    }
    for (double lambda : {0.5, 1.0, 2.0}) {
        const std::size_t m = 50;
        const auto a = fisher_information(LaplaceRate{}, lambda, m);
        o.require(std::abs(a.J_m - m / (lambda * lambda)) <= 1e-12 * a.J_m, "Laplace closed form");
        const auto fd =
            fisher_information(quantized_laplace_rate(0.5 * lambda, 1.5 * lambda, 40.0 / lambda, 8000), lambda, m);
        worst = std::max(worst, std::abs(fd.J_m - a.J_m) / a.J_m);
    }
    o.require(worst <= 0.01, "finite-difference path within 1%");
    o.note("max rel dev=%.2e", worst);
    return o;
}

Outcome crb_attainment() {
    Outcome o;
    const Stopwatch sw;
    const std::size_t m = 10;
    ScalarPipeline p;
    p.sigma_x = 1.0;
    p.sigma_n = std::sqrt(static_cast<double>(m - 1));
    p.restorer = PipelineRestorer::SampleAverage;
    McOptions opt;
    opt.replicates = 10000;
    opt.seed = kSeed;
    const auto mc = estimator_variance_mc(p, {EstimatorKind::SampleMean, Stage::Y, {}, {}}, 0.0, m, opt);
    o.require(std::abs(mc.variance - 1.0) <= 4.0 * mc.variance_stderr, "variance = sigma_x^2 within 4 stderr");

    std::size_t mismatched = 0;
    const ParamEstimator ey{EstimatorKind::SampleMean, Stage::Y, {}, {}};
    const ParamEstimator eh{EstimatorKind::SampleMean, Stage::Xhat, {}, {}};
    for (std::size_t r = 0; r < opt.replicates; ++r) {
        Rng rng = make_stream(kSeed, r);
        const auto s = simulate_pipeline(p, 0.0, m, rng);
        mismatched += estimate_parameter(ey, s.y) == estimate_parameter(eh, s.xhat) ? 0 : 1;
    }
    o.require(mismatched == 0, "theta_hat(Y) and theta_hat(Xhat) identical per replicate");
    const double t = sw.seconds();
    o.require(t < 30.0, "runtime < 30 s");
    o.note("var=%.4f", mc.variance);
    o.note("stderr=%.4f", mc.variance_stderr);
    o.note("mismatches=%.0f", static_cast<double>(mismatched));
    o.note("%.2fs", t);
    return o;
}

Outcome double_meaning() {
    Outcome o;
    Rng rng = make_stream(kSeed, 7);
    double mean_dev = 0.0;
    bool median_exact = true;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng() % 5;
        std::vector<Eigen::VectorXd> targets;
        std::vector<double> w = random_simplex(rng, k);
        for (std::size_t i = 0; i < k; ++i) {
            targets.push_back(Eigen::VectorXd::NullaryExpr(3, [&] { return standard_normal(rng); }));
        }
        const auto mse = double_meaning_minimizer(targets, w, Loss::Mse);
        const auto l1 = double_meaning_minimizer(targets, w, Loss::L1);
        for (Eigen::Index d = 0; d < 3; ++d) {
            double mean = 0.0;
            std::vector<std::pair<double, double>> vw;
            for (std::size_t i = 0; i < k; ++i) {
                mean += w[i] * targets[i][d];
                vw.emplace_back(targets[i][d], w[i]);
            }
            mean_dev = std::max(mean_dev, std::abs(mse.xhat[d] - mean));
            // Lower weighted median: first value whose cumulative weight reaches one half.
            std::sort(vw.begin(), vw.end());
            double cum = 0.0, med = vw.back().first;
            for (const auto& [v, wi] : vw) {
                cum += wi;
                if (cum >= 0.5 - 1e-15) {
                    med = v;
                    break;
                }
            }
            median_exact = median_exact && l1.xhat[d] == med;
        }
    }
    o.require(mean_dev <= 1e-14, "MSE minimizer = weighted mean");
    o.require(median_exact, "L1 minimizer = coordinatewise median");

    const auto spec = linear_domains_instance(4, {1.0, 2.0});
    TrainConfig cfg;
    cfg.seed = kSeed;
    const auto trained = train_mixed_restorer(spec, cfg);
    double pred_gap = 0.0;
    Rng test = make_stream(kSeed, 8);
    for (int i = 0; i < 200; ++i) {
        const auto d = spec.draw(test, static_cast<std::size_t>(i) % 2);
        std::vector<Eigen::VectorXd> ts;
        for (const auto& tg : d.targets) {
            ts.push_back(tg.second);
        }
        const auto closed = double_meaning_minimizer(ts, spec.weights, Loss::Mse);
        pred_gap = std::max(pred_gap, (trained.predict(d.y) - closed.xhat).cwiseAbs().maxCoeff());
    }
    o.require(pred_gap <= 1e-3, "trained restorer within 1e-3 of closed form");

    TrainConfig ls;
    ls.solver = Solver::LeastSquares;
    ls.samples = 512;
    ls.seed = kSeed;
    const auto blur = mixed_vs_targeted_report(two_blur_instance(32, 1.0, 2.0), ls, 500);
    double min_gap = 1e300, max_disjoint = 0.0;
    for (const auto& d : blur.per_domain) {
        min_gap = std::min(min_gap, d.gap);
    }
    const auto disjoint = mixed_vs_targeted_report(disjoint_instance(16, {1.0, 2.0}), ls, 500);
    for (const auto& d : disjoint.per_domain) {
        max_disjoint = std::max(max_disjoint, std::abs(d.gap));
    }
    o.require(min_gap > 0.0, "two-blur per-domain gap > 0");
    o.require(max_disjoint <= 1e-9, "disjoint-support gap = 0");
    o.note("mean dev=%.1e", mean_dev);
    o.note("trained gap=%.2e", pred_gap);
    o.note("two-blur min gap=%.4f", min_gap);
    o.note("disjoint max gap=%.1e", max_disjoint);
    return o;
}

Outcome resolution_shift() {
    Outcome o;
    const Eigen::Index n = 64, margin = 8;
    const auto spec = two_blur_instance(n, 1.0, 2.0);
    TrainConfig cfg;
    cfg.solver = Solver::LeastSquares;
    cfg.samples = 512;
    cfg.seed = kSeed;
    const auto mixed = train_mixed_restorer(spec, cfg);
    Rng rng = make_stream(kSeed, 9);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto d = spec.draw(rng, 1);
        Eigen::VectorXd x2;
        for (const auto& [dom, tg] : d.targets) {
            if (dom == 1) {
                x2 = tg;
            }
        }
        const Eigen::VectorXd diff = mixed.predict(d.y) - resolution_shift_prediction(x2, 1.0, 2.0);
        worst = std::max(worst, diff.segment(margin, n - 2 * margin).cwiseAbs().maxCoeff());
    }
    o.require(worst <= 1e-3, "mixed prediction = (I + H12) x2 / 2 within 1e-3 (interior)");

    const auto h1 = gaussian_kernel(1.0, 12);
    const auto h12 = gaussian_kernel(blur_difference(1.0, 2.0), 12);
    const auto h2 = gaussian_kernel(2.0, 24);
    const auto c = convolve(h1, h12);
    double comp = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        comp = std::max(comp, std::abs(c[i] - h2[i]));
    }
    o.require(comp <= 1e-3, "||h1 * h12 - h2||_inf <= 1e-3");
    o.note("interior gap=%.2e", worst);
    o.note("composition=%.2e", comp);
    return o;
}

Outcome sparse_recovery() {
    Outcome o;
    const Stopwatch sw;
    double worst = 0.0;
    for (std::size_t n : {32, 64, 128, 256}) {
        const auto op = build_kernel_operator(1.0, n, 1.0);
        for (std::size_t trial = 0; trial < 4; ++trial) {
            Rng rng = make_stream(kSeed + n, trial);
            const auto support = random_support(rng, n, 3, default_separation(1.0, 1.0) + 2);
            std::vector<double> amp;
            for (std::size_t k = 0; k < support.size(); ++k) {
                amp.push_back((uniform01(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + uniform01(rng)));
            }
            const SpikeSignal x(n, support, amp);
            const Eigen::VectorXd y = op.G * x.dense();
            SolverConfig sc;
            sc.feasibility_tol = 1e-12 * std::max(1.0, y.lpNorm<1>());
            const auto r = l1_map_solve(y, op, Constrained{0.0, Fidelity::L1}, sc);
            worst = std::max(worst, (r.x - x.dense()).cwiseAbs().maxCoeff());
        }
    }
    o.require(worst <= 1e-6, "noiseless recovery ||xhat - x||_inf <= 1e-6");

    const auto op = build_kernel_operator(1.0, 64, 1.0);
    std::size_t holds = 0;
    bool path_ok = true;
    for (std::size_t d = 0; d < 100; ++d) {
        Rng rng = make_stream(kSeed + 500, d);
        const auto support = random_support(rng, 64, 3, default_separation(1.0, 1.0));
        std::vector<double> amp;
        for (std::size_t k = 0; k < support.size(); ++k) {
            amp.push_back((uniform01(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + uniform01(rng)));
        }
        const SpikeSignal x(64, support, amp);
        Eigen::VectorXd w(64);
        for (Eigen::Index k = 0; k < 64; ++k) {
            w[k] = 0.05 * standard_normal(rng);
        }
        const Eigen::VectorXd y = op.G * x.dense() + w;
        const double delta = w.lpNorm<1>();
        const auto r = l1_map_solve(y, op, Constrained{delta, Fidelity::L1});
        holds += recovery_certificate(x.dense(), r.x, op, delta, NormKind::L1).holds ? 1 : 0;
        if (d < 10) {
            const std::vector<double> taus{1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
            const auto path = penalty_path(y, op.G, taus);
            for (std::size_t k = 1; k < path.size(); ++k) {
                path_ok = path_ok && path[k].x.lpNorm<1>() + 1e-9 >= path[k - 1].x.lpNorm<1>() &&
                          path[k].residual <= path[k - 1].residual + 1e-9;
            }
        }
    }
    o.require(holds == 100, "l1 certificate on 100 noisy draws");
    o.require(path_ok, "lambda path monotone");
    const double t = sw.seconds();
    o.require(t < 60.0, "runtime < 60 s");
    o.note("noiseless max err=%.2e", worst);
    o.note("certificates=%.0f/100", static_cast<double>(holds));
    o.note("%.2fs", t);
    return o;
}

Outcome lambda_pipeline() {
    Outcome o;
    const Stopwatch sw;
    LambdaPipelineConfig cfg;
    cfg.replicates = 1000;
    cfg.seed = kSeed;
    const auto pen = lambda_pipeline_experiment(cfg);
    o.require(pen.mse_xhat >= pen.mse_x - 4.0 * pen.se_diff, "MSE(from Xhat) >= MSE(from X)");
    o.require(pen.mse_x >= pen.crb - 4.0 * pen.se_x, "MSE(from X) >= lambda^2/m - 4 stderr");
    cfg.restorer = SparseRestorer::NormOracle;
    const auto oracle = lambda_pipeline_experiment(cfg);
    const double gap = std::abs(oracle.mse_xhat - oracle.mse_x);
    o.require(gap <= 1e-9 * oracle.mse_x, "norm-preserving oracle closes the gap");
    o.note("mse_x=%.5f", pen.mse_x);
    o.note("mse_xhat=%.5f", pen.mse_xhat);
    o.note("crb=%.5f", pen.crb);
    o.note("oracle gap=%.1e", gap);
    o.note("%.1fs", sw.seconds());
    return o;
}

Outcome auxiliary_bounds() {
    Outcome o;
    // Two tosses, estimator = first toss, statistic = number of heads.
    const std::vector<double> grid{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<std::vector<double>> rows;
    for (double t : grid) {
        rows.push_back({t * t, t * (1 - t), (1 - t) * t, (1 - t) * (1 - t)});
    }
    const Labels outcomes{"HH", "HT", "TH", "TT"};
    const ConditionalTable family(numeric_labels(grid), outcomes, rows);
    const std::vector<double> first{1, 1, 0, 0};
    const auto rb = rao_blackwellize(family, first, DeterministicMap{outcomes, {"0", "1", "2"}, {2, 1, 1, 0}});
    bool reduced = true;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        reduced = reduced && rb.variance_after[k] <= rb.variance_before[k] + 1e-15;
    }
    o.require(reduced, "Rao-Blackwell variance reduction at every grid point");

    // X-hat = E[X] with no observation: E(X - Xhat)^2 = Var X.
    const auto grid_density = [](const std::function<double(double)>& f, double half) {
        GridDensity g;
        const int points = 20001;
        g.bin_width = 2.0 * half / (points - 1);
        for (int i = 0; i < points; ++i) {
            g.density.push_back(f(-half + i * g.bin_width));
        }
        return g;
    };
    const double gauss = entropy_error_bound(grid_density(
        [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }, 10.0));
    o.require(std::abs(gauss - 1.0) <= 0.01, "Gaussian equality within 1%");
    const double uni = entropy_error_bound(grid_density([](double x) { return std::abs(x) < 0.5 ? 1.0 : 0.0; }, 1.0));
    const double lap = entropy_error_bound(grid_density([](double x) { return 0.5 * std::exp(-std::abs(x)); }, 40.0));
    o.require(uni <= 1.0 / 12.0, "uniform: bound <= variance");
    o.require(lap <= 2.0, "Laplace: bound <= variance");

    double worst_pr = 0.0;
    const auto check_pr = [&](const PipelineChain& base, const std::map<std::string, std::size_t>& part) {
        const auto chain = with_restorer(base, posterior_sampler(assemble_joint(base)));
        for (double g : pr_gap(chain, part, base.prior.size()).gap) {
            worst_pr = std::max(worst_pr, g);
        }
    };
    std::map<std::string, std::size_t> naive_part;
    for (std::size_t x = 0; x < 6; ++x) {
        naive_part[std::to_string(x)] = x < 3 ? 0 : 1;
    }
    check_pr(naive_tree_chain(), naive_part);
    o.require(worst_pr <= 1e-9, "PR gap = 0 for the posterior sampler");
    o.note("Gaussian bound/var=%.6f", gauss);
    o.note("uniform=%.4f", uni);
    o.note("Laplace=%.4f", lap);
    o.note("PR gap=%.1e", worst_pr);
    return o;
}

Outcome determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "estlab_acceptance";
    fs::remove_all(root);
    std::size_t identical = 0, total = 0;
    for (const auto& e : experiment_catalog()) {
        auto c = config(e.id, 12);
        if (e.id == "lambda_pipeline") {
            apply_override(c, "oracle_check", "false");
        }
        write_outputs(run_experiment(c), root / e.id / "a");
        write_outputs(run_experiment(c), root / e.id / "b");
        const auto a = slurp(root / e.id / "a" / "report.json");
        const bool same = !a.empty() && a == slurp(root / e.id / "b" / "report.json");
        identical += same ? 1 : 0;
        ++total;
        o.require(same, e.id + " report.json identical");
    }
    // Worker count must not change results.
    auto c = config("crb_gaussian_mean", 12);
    const auto one = run_experiment(c).report.dump();
    c.jobs = 4;
    o.require(run_experiment(c).report.dump() == one, "jobs=4 matches jobs=1");
    fs::remove_all(root);
    o.note("identical=%.0f", static_cast<double>(identical));
    o.note("of %.0f experiments", static_cast<double>(total));
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"naive tree joint, posterior and likelihood decisions", naive_tree},
        {"P_e = (1 - J1)/2 on 1000 binary chains", pe_identity},
        {"stage ordering of P_e and conditional equality", stage_ordering},
        {"DPI audit and sufficiency equality", dpi},
        {"Fisher/CRB closed forms vs finite differences", fisher_forms},
        {"CRB attainment through the coincidence construction", crb_attainment},
        {"double meaning minimizers and mixed-vs-targeted gaps", double_meaning},
        {"resolution shift prediction and blur composition", resolution_shift},
        {"sparse recovery, l1 certificate and lambda path", sparse_recovery},
        {"lambda pipeline MSE ordering and oracle restorer", lambda_pipeline},
        {"Rao-Blackwell, entropy bound and PR gap", auxiliary_bounds},
        {"byte-identical reports on re-run", determinism},
    };
    int failed = 0;
    int number = 0;
    for (const auto& [name, check] : criteria) {
        ++number;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", number, name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", number - failed, number);
    return failed == 0 ? 0 : 1;
}
