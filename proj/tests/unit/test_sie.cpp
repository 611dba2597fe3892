#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "isoscatter/sie.hpp"

using namespace isoscatter;
using Catch::Approx;

namespace {

SieConfig basic_config(int n, double rho = 1.0) {
    SieConfig c;
    c.dimension = n;
    c.rho = rho;
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    REQUIRE_THROWS_AS(basic_config(0).validate(), std::invalid_argument);
    REQUIRE_THROWS_AS(basic_config(4, 0.0).validate(), std::invalid_argument);
    REQUIRE_THROWS_AS(basic_config(4, 1.2).validate(), std::invalid_argument);
    SieConfig frame = basic_config(4);
    frame.vector_mode = VectorMode::orthonormal_frame;
    frame.term_count = 6;
    REQUIRE_THROWS_AS(frame.validate(), std::invalid_argument);
    REQUIRE(basic_config(4).terms() == 4);
}

TEST_CASE("rank-one draw puts a single multiplier on one basis direction") {
    SieDraw draw;
    draw.vectors = Eigen::MatrixXcd::Zero(3, 1);
    draw.vectors(0, 0) = Complex{1.0, 0.0};
    draw.multipliers = Eigen::VectorXcd::Constant(1, Complex{0.3, -0.4});
    const ScatteringMatrix s = assemble_scattering(draw);
    REQUIRE(std::abs(s.entries(0, 0) - Complex{0.3, -0.4}) < 1e-15);
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
            if (k != 0 || l != 0) REQUIRE(s.entries(k, l) == Complex{0.0, 0.0});
}

TEST_CASE("sampled scattering matrices are exactly complex symmetric") {
    const SieConfig config = basic_config(12, 0.7);
    for (int i = 0; i < 20; ++i) {
        RngStream rng(301, static_cast<std::uint64_t>(i));
        const ScatteringMatrix s = sample_sie(config, rng);
        REQUIRE(s.max_symmetry_violation() == 0.0);
    }
}

TEST_CASE("factored entries agree with the assembled matrix") {
    for (VectorMode mode : {VectorMode::independent_isotropic, VectorMode::orthonormal_frame}) {
        SieConfig config = basic_config(9, 0.6);
        config.vector_mode = mode;
        RngStream rng(302, 5);
        const SieDraw draw = sample_sie_draw(config, rng);
        const ScatteringMatrix s = assemble_scattering(draw);
        for (int k = 0; k < 9; ++k)
            for (int l = 0; l < 9; ++l)
                REQUIRE(std::abs(draw.entry(k, l) - s.entries(k, l)) < 1e-12);
    }
}

TEST_CASE("orthonormal frame columns form an isometry") {
    SieConfig config = basic_config(8);
    config.vector_mode = VectorMode::orthonormal_frame;
    config.term_count = 5;
    RngStream rng(303, 0);
    const SieDraw draw = sample_sie_draw(config, rng);
    const Eigen::MatrixXcd gram = draw.vectors.adjoint() * draw.vectors;
    REQUIRE((gram - Eigen::MatrixXcd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("entry means vanish within 5 standard errors") {
    const SieConfig config = basic_config(16, 0.8);
    const MomentReport report = empirical_moments(config, 20000, {}, 304);
    for (int k = 0; k < 16; ++k)
        for (int l = 0; l < 16; ++l)
            REQUIRE(std::abs(report.mean(k, l)) < 5.0 * report.mean_std_error(k, l));
}

TEST_CASE("covariance quadruples follow the delta structure") {
    const SieConfig config = basic_config(32, 1.0);
    const double allowance = 2.0 / (32.0 * 32.0);
    const std::vector<QuadIndex> quads = {
        {1, 2, 1, 2},  // off-diagonal coincident: rho^2/N
        {1, 1, 1, 1},  // diagonal: 2 rho^2/N
        {1, 2, 3, 4},  // non-matching: 0
        {2, 5, 5, 2},  // transposed coincident: rho^2/N
    };
    const MomentReport report = empirical_moments(config, 20000, quads, 305);

    REQUIRE(report.quadruples[0].predicted == Approx(1.0 / 32.0));
    REQUIRE(std::abs(report.quadruples[0].empirical - Complex{report.quadruples[0].predicted, 0.0}) <
            5.0 * report.quadruples[0].std_error + allowance);

    REQUIRE(report.quadruples[1].predicted == Approx(2.0 / 32.0));
    REQUIRE(std::abs(report.quadruples[1].empirical - Complex{report.quadruples[1].predicted, 0.0}) <
            5.0 * report.quadruples[1].std_error + allowance);

    REQUIRE(report.quadruples[2].predicted == 0.0);
    REQUIRE(std::abs(report.quadruples[2].empirical) <
            5.0 * report.quadruples[2].std_error + allowance);

    REQUIRE(report.quadruples[3].predicted == Approx(1.0 / 32.0));
    REQUIRE(std::abs(report.quadruples[3].empirical - Complex{report.quadruples[3].predicted, 0.0}) <
            5.0 * report.quadruples[3].std_error + allowance);
}

TEST_CASE("entry variances land on the (1 + delta) rho^2/N structure") {
    const SieConfig config = basic_config(16, 0.5);
    const MomentReport report = empirical_moments(config, 20000, {}, 306);
    const double base = 0.25 / 16.0;
    const double allowance = 2.0 / (16.0 * 16.0) * 0.25;  // rho^2-scaled O(N^-2)
    // spot-check a few entries; 5-SE noise on a variance is ~ sqrt(2/M) relative
    const double noise = 5.0 * std::sqrt(2.0 / 20000.0);
    REQUIRE(std::abs(report.variance(0, 0) - 2.0 * base) < noise * 2.0 * base + allowance);
    REQUIRE(std::abs(report.variance(3, 7) - base) < noise * base + allowance);
    REQUIRE(std::abs(report.variance(15, 2) - base) < noise * base + allowance);
}

TEST_CASE("gaussian multiplier law keeps the same second-moment structure") {
    SieConfig config = basic_config(16, 0.9);
    config.eigenvalue_dist = EigenvalueDist::complex_gaussian;
    const std::vector<QuadIndex> quads = {{1, 2, 1, 2}};
    const MomentReport report = empirical_moments(config, 20000, quads, 307);
    const double allowance = 2.0 / (16.0 * 16.0) * 0.81;
    REQUIRE(std::abs(report.quadruples[0].empirical -
                     Complex{report.quadruples[0].predicted, 0.0}) <
            5.0 * report.quadruples[0].std_error + allowance);
}

TEST_CASE("scaling rho by two scales every second moment by four (paired seeds)") {
    const std::vector<QuadIndex> quads = {{1, 2, 1, 2}, {1, 1, 1, 1}};
    const MomentReport lo = empirical_moments(basic_config(8, 0.4), 2000, quads, 308);
    const MomentReport hi = empirical_moments(basic_config(8, 0.8), 2000, quads, 308);
    for (int j = 0; j < 2; ++j)
        REQUIRE(std::abs(hi.quadruples[j].empirical - 4.0 * lo.quadruples[j].empirical) <
                1e-13 * std::abs(lo.quadruples[j].empirical));
    REQUIRE(hi.variance(2, 5) == Approx(4.0 * lo.variance(2, 5)).epsilon(1e-13));
}

TEST_CASE("variance ratio approaches the diagonal-enhancement factor 2") {
    // The inclusion band 2 +- (10/N + noise) tightens with N; the exact
    // ensemble ratio is 2 at every N, so the point estimates are noise around
    // 2 rather than a monotone sequence.
    for (const auto& [n, m] : {std::pair{8, 20000}, std::pair{32, 20000}, std::pair{128, 10000}}) {
        const double ratio =
            variance_ratio(basic_config(n, 0.8), static_cast<std::uint64_t>(m), 309);
        REQUIRE(std::abs(ratio - 2.0) < 10.0 / n + 5.0 * std::sqrt(6.0 / m) * 2.0);
    }
}

TEST_CASE("variance ratio rejects dimensions without an off-diagonal entry") {
    REQUIRE_THROWS_AS(variance_ratio(basic_config(1), 1000, 310), std::invalid_argument);
}

TEST_CASE("degenerate ensembles are reported") {
    ComplexCovarianceAccumulator diag, off;
    for (int i = 0; i < 10; ++i) {
        diag.push({1.0, 0.0}, {1.0, 0.0});
        off.push({0.5, 0.0}, {0.5, 0.0});
    }
    REQUIRE_THROWS_AS(variance_ratio_of(diag, off), std::runtime_error);
}

TEST_CASE("empirical moments validate inputs") {
    const SieConfig config = basic_config(8);
    REQUIRE_THROWS_AS(empirical_moments(config, 50, {}, 311), std::invalid_argument);
    const std::vector<QuadIndex> bad = {{1, 2, 9, 1}};
    REQUIRE_THROWS_AS(empirical_moments(config, 1000, bad, 311), std::invalid_argument);
}

TEST_CASE("moment reports are identical across worker counts") {
    const SieConfig config = basic_config(8, 0.6);
    const std::vector<QuadIndex> quads = {{1, 2, 1, 2}};
    const MomentReport one = empirical_moments(config, 6000, quads, 312, 1);
    const MomentReport three = empirical_moments(config, 6000, quads, 312, 3);
    REQUIRE(one.quadruples[0].empirical == three.quadruples[0].empirical);
    REQUIRE(one.quadruples[0].std_error == three.quadruples[0].std_error);
    for (int k = 0; k < 8; ++k)
        for (int l = 0; l < 8; ++l) {
            REQUIRE(one.mean(k, l) == three.mean(k, l));
            REQUIRE(one.variance(k, l) == three.variance(k, l));
        }
}

TEST_CASE("frame mode keeps the diagonal enhancement") {
    SieConfig config = basic_config(16, 0.8);
    config.vector_mode = VectorMode::orthonormal_frame;
    const double ratio = variance_ratio(config, 10000, 313);
    REQUIRE(std::abs(ratio - 2.0) < 10.0 / 16.0 + 5.0 * std::sqrt(6.0 / 10000.0) * 2.0);
}
