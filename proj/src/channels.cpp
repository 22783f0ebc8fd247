#include "estlab/channels.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>

#include "estlab/error.hpp"

namespace estlab {

std::vector<double> gaussian_kernel(double sigma, int halfwidth) {
    if (!(sigma > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "kernel sigma must be positive");
    }
    if (halfwidth < 0 || static_cast<double>(halfwidth) < 3.0 * sigma) {
        throw Error(ErrorCode::SupportTooSmall, "halfwidth must cover at least 3 sigma");
    }
    std::vector<double> taps(static_cast<std::size_t>(2 * halfwidth + 1));
    double total = 0.0;
    for (int k = -halfwidth; k <= halfwidth; ++k) {
        const double v = std::exp(-0.5 * (k / sigma) * (k / sigma));
        taps[static_cast<std::size_t>(k + halfwidth)] = v;
        total += v;
    }
    for (double& t : taps) {
        t /= total;
    }
    return taps;
}

int default_halfwidth(double sigma) {
    return std::max(1, static_cast<int>(std::ceil(5.0 * sigma)));
}

std::vector<double> gaussian_kernel(double sigma) {
    return gaussian_kernel(sigma, default_halfwidth(sigma));
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        return {};
    }
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

double compose_blurs(double sigma1, double sigma2) {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "blur widths must be positive");
    }
    return std::hypot(sigma1, sigma2);
}

double blur_difference(double sigma1, double sigma2) {
    if (!(sigma2 > sigma1) || !(sigma1 > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "need sigma2 > sigma1 > 0");
    }
    return std::sqrt((sigma2 - sigma1) * (sigma2 + sigma1));
}

BlurOperator blur_matrix(std::size_t n, double sigma, Boundary boundary, std::optional<int> halfwidth) {
    const int hw = halfwidth.value_or(default_halfwidth(sigma));
    const auto taps = gaussian_kernel(sigma, hw);
    if (n < static_cast<std::size_t>(2 * hw + 1)) {
        throw Error(ErrorCode::InvalidArgument, "signal shorter than the kernel support");
    }
    const auto len = static_cast<long>(n);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(len, len);
    for (long i = 0; i < len; ++i) {
        for (int k = -hw; k <= hw; ++k) {
            long j = i + k;
            if (j < 0 || j >= len) {
                if (boundary == Boundary::ZeroPad) {
                    continue;
                }
                j = j < 0 ? -j - 1 : 2 * len - j - 1;
            }
            h(i, j) += taps[static_cast<std::size_t>(k + hw)];
        }
    }
    return {sigma, hw, boundary, std::move(h)};
}

double normal_interval_mass(double a, double b, double mean, double sd) {
    const double s = sd * std::sqrt(2.0);
    const double za = (a - mean) / s;
    const double zb = (b - mean) / s;
    if (za >= 0.0) {
        return 0.5 * (std::erfc(za) - std::erfc(zb));
    }
    if (zb <= 0.0) {
        return 0.5 * (std::erfc(-zb) - std::erfc(-za));
    }
    return 1.0 - 0.5 * (std::erfc(-za) + std::erfc(zb));
}

ConditionalTable quantize_awgn(const AwgnChannel& channel, std::span<const double> x_grid,
                               std::span<const double> y_grid, double max_lost_mass) {
    if (!(channel.sigma_n > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "noise level must be positive");
    }
    if (y_grid.size() < 2 || x_grid.empty()) {
        throw Error(ErrorCode::GridTooNarrow, "grids need at least two y points and one x point");
    }
    std::vector<double> edges(y_grid.size() + 1);
    for (std::size_t k = 1; k < y_grid.size(); ++k) {
        if (!(y_grid[k] > y_grid[k - 1])) {
            throw Error(ErrorCode::InvalidArgument, "y grid must be strictly increasing");
        }
        edges[k] = 0.5 * (y_grid[k - 1] + y_grid[k]);
    }
    edges.front() = y_grid.front() - (edges[1] - y_grid.front());
    edges.back() = y_grid.back() + (y_grid.back() - edges[y_grid.size() - 1]);

    std::vector<std::vector<double>> rows;
    rows.reserve(x_grid.size());
    for (double x : x_grid) {
        std::vector<double> row(y_grid.size());
        double kept = 0.0;
        for (std::size_t k = 0; k < y_grid.size(); ++k) {
            row[k] = normal_interval_mass(edges[k], edges[k + 1], x, channel.sigma_n);
            kept += row[k];
        }
        if (1.0 - kept > max_lost_mass) {
            throw Error(ErrorCode::GridTooNarrow, "y grid truncates the noise distribution at x = " + format_label(x));
        }
        for (double& v : row) {
            v /= kept;
        }
        rows.push_back(std::move(row));
    }
    return {numeric_labels(x_grid), numeric_labels(y_grid), std::move(rows)};
}

ConditionalTable DeterministicMap::to_table() const {
    if (mapping.size() != input.size()) {
        throw Error(ErrorCode::InvalidArgument, "map is not total on its input");
    }
    std::vector<std::vector<double>> rows(input.size(), std::vector<double>(output.size(), 0.0));
    for (std::size_t i = 0; i < input.size(); ++i) {
        rows[i].at(mapping[i]) = 1.0;
    }
    return {input, output, std::move(rows)};
}

bool DeterministicMap::injective() const {
    std::set<std::size_t> seen(mapping.begin(), mapping.end());
    return seen.size() == mapping.size();
}

bool is_invertible(const ConditionalTable& channel, const FiniteDistribution& source) {
    if (channel.input() != source.support()) {
        throw Error(ErrorCode::SupportMismatch, "channel input differs from source support");
    }
    for (std::size_t y = 0; y < channel.cols(); ++y) {
        std::size_t preimages = 0;
        for (std::size_t x = 0; x < channel.rows(); ++x) {
            if (source[x] * channel(x, y) > 0.0) {
                ++preimages;
            }
        }
        if (preimages > 1) {
            return false;
        }
    }
    return true;
}

bool is_invertible(const DeterministicMap& map) {
    return map.injective();
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            os << (j ? "," : "") << buf;
        }
        os << '\n';
    }
}

nlohmann::json kernel_to_json(std::span<const double> taps) {
    return nlohmann::json(std::vector<double>(taps.begin(), taps.end()));
}

} // namespace estlab
