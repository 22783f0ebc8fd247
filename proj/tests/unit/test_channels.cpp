#include <cmath>
#include <vector>

#include "support.hpp"

#include "estlab/channels.hpp"
#include "estlab/prob.hpp"

using namespace estlab;

namespace {

double erfc_mass(double a, double b, double mean, double sd) {
    const double s = sd * std::sqrt(2.0);
    return 0.5 * (std::erfc((a - mean) / s) - std::erfc((b - mean) / s));
}

} // namespace

TEST_CASE("gaussian kernel taps") {
    const auto k = gaussian_kernel(1.0, 5);
    REQUIRE(k.size() == 11);
    double z = 0.0;
    for (int i = -5; i <= 5; ++i) {
        z += std::exp(-0.5 * i * i);
    }
    for (int i = -5; i <= 5; ++i) {
        CHECK(k[i + 5] == doctest::Approx(std::exp(-0.5 * i * i) / z).epsilon(1e-14));
    }
    CHECK_THROWS_CODE(gaussian_kernel(2.0, 5), ErrorCode::SupportTooSmall);
    CHECK(default_halfwidth(1.2) == 6);
}

TEST_CASE("blur composition") {
    CHECK(compose_blurs(3, 4) == doctest::Approx(5));
    CHECK(blur_difference(3, 5) == doctest::Approx(4));
    const auto h1 = gaussian_kernel(1.0, 10);
    const auto h12 = gaussian_kernel(std::sqrt(3.0), 10);
    const auto h2 = gaussian_kernel(2.0, 20);
    const auto c = convolve(h1, h12);
    REQUIRE(c.size() == h2.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        worst = std::max(worst, std::abs(c[i] - h2[i]));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("blur matrix boundaries") {
    const auto reflect = blur_matrix(20, 1.5);
    for (Eigen::Index r = 0; r < 20; ++r) {
        CHECK(reflect.matrix.row(r).sum() == doctest::Approx(1.0).epsilon(1e-14));
    }
    const auto zero = blur_matrix(20, 1.5, Boundary::ZeroPad);
    CHECK(zero.matrix.row(0).sum() < 1.0);
    CHECK(zero.matrix.row(10).sum() == doctest::Approx(1.0));
    // Interior rows agree.
    CHECK((reflect.matrix.row(10) - zero.matrix.row(10)).norm() < 1e-15);
}

TEST_CASE("awgn quantization matches erfc bins") {
    const std::vector<double> xg{-1, 0, 1};
    std::vector<double> yg;
    for (int i = 0; i <= 160; ++i) {
        yg.push_back(-8 + 0.1 * i);
    }
    const auto t = quantize_awgn(AwgnChannel{0.7}, xg, yg);
    for (std::size_t r = 0; r < xg.size(); ++r) {
        double total = 0.0;
        std::vector<double> raw(yg.size());
        for (std::size_t j = 0; j < yg.size(); ++j) {
            const double a = j == 0 ? yg[0] - 0.05 : 0.5 * (yg[j - 1] + yg[j]);
            const double b = j + 1 == yg.size() ? yg[j] + 0.05 : 0.5 * (yg[j] + yg[j + 1]);
            raw[j] = erfc_mass(a, b, xg[r], 0.7);
            total += raw[j];
        }
        for (std::size_t j = 0; j < yg.size(); ++j) {
            CHECK(t(r, j) == doctest::Approx(raw[j] / total).epsilon(1e-9));
        }
    }
    const std::vector<double> narrow{-0.5, 0.0, 0.5};
    CHECK_THROWS_CODE(quantize_awgn(AwgnChannel{1.0}, xg, narrow), ErrorCode::GridTooNarrow);
}

TEST_CASE("invertibility") {
    const DeterministicMap inj{{"a", "b"}, {"u", "v", "w"}, {2, 0}};
    const DeterministicMap merge{{"a", "b"}, {"u"}, {0, 0}};
    CHECK(is_invertible(inj));
    CHECK_FALSE(is_invertible(merge));
    const auto src = FiniteDistribution::uniform({"a", "b"});
    CHECK(is_invertible(inj.to_table(), src));
    CHECK_FALSE(is_invertible(merge.to_table(), src));
    // Overlapping rows are not invertible; disjoint rows are.
    const ConditionalTable overlap({"a", "b"}, {"u", "v"}, {{0.5, 0.5}, {0.0, 1.0}});
    CHECK_FALSE(is_invertible(overlap, src));
    const ConditionalTable disjoint({"a", "b"}, {"u", "v", "w"}, {{0.5, 0.5, 0.0}, {0.0, 0.0, 1.0}});
    CHECK(is_invertible(disjoint, src));
}
