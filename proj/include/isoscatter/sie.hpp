#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "isoscatter/parallel.hpp"
#include "isoscatter/rng.hpp"
#include "isoscatter/sphere.hpp"
#include "isoscatter/stats.hpp"

namespace isoscatter {

// Spectrally isotropic stochastic scattering matrices: sums of rank-one terms
// s_lambda * v_lambda v_lambda^T with independent isotropic unit vectors
// v_lambda and i.i.d. zero-mean multipliers with E|s|^2 = rho^2. The outer
// product uses the plain (non-conjugating) transpose, so every sample is
// complex symmetric.

enum class EigenvalueDist { fixed_modulus_uniform_phase, complex_gaussian };
enum class VectorMode { independent_isotropic, orthonormal_frame };

struct SieConfig {
    int dimension = 0;       // wave-space dimension N
    double rho = 1.0;        // effective reflection coefficient, E|s|^2 = rho^2
    EigenvalueDist eigenvalue_dist = EigenvalueDist::fixed_modulus_uniform_phase;
    int term_count = 0;      // number of rank-one terms; 0 = one per dimension
    VectorMode vector_mode = VectorMode::independent_isotropic;

    int terms() const { return term_count > 0 ? term_count : dimension; }

    void validate() const {
        if (dimension < 1) throw std::invalid_argument("SieConfig: dimension must be >= 1");
        if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("SieConfig: rho must be in (0, 1]");
        if (terms() < 1) throw std::invalid_argument("SieConfig: term_count must be >= 1");
        if (vector_mode == VectorMode::orthonormal_frame && terms() > dimension)
            throw std::invalid_argument("SieConfig: orthonormal frame needs term_count <= dimension");
    }
};

struct ScatteringMatrix {
    Eigen::MatrixXcd entries;
    int dimension() const { return static_cast<int>(entries.rows()); }

    double max_symmetry_violation() const {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < entries.rows(); ++i)
            for (Eigen::Index j = i + 1; j < entries.cols(); ++j)
                worst = std::max(worst, std::abs(entries(i, j) - entries(j, i)));
        return worst;
    }
};

// One ensemble draw in factored spectral form; column lambda of `vectors` is
// v_lambda. Keeping the factors lets port-level statistics run without
// materializing the N x N matrix.
struct SieDraw {
    Eigen::MatrixXcd vectors;      // N x K
    Eigen::VectorXcd multipliers;  // K

    // S_kl = sum_lambda s_lambda v_k v_l, 0-based indices.
    Complex entry(int k, int l) const {
        Complex acc{0.0, 0.0};
        for (Eigen::Index t = 0; t < multipliers.size(); ++t)
            acc += multipliers[t] * vectors(k, t) * vectors(l, t);
        return acc;
    }
};

inline Complex sample_multiplier(const SieConfig& config, RngStream& rng) {
    switch (config.eigenvalue_dist) {
        case EigenvalueDist::fixed_modulus_uniform_phase: {
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            return Complex(config.rho * std::cos(phi), config.rho * std::sin(phi));
        }
        case EigenvalueDist::complex_gaussian: {
            const double scale = config.rho * std::numbers::sqrt2 / 2.0;
            return Complex(scale * rng.normal(), scale * rng.normal());
        }
    }
    throw std::invalid_argument("SieConfig: unknown eigenvalue distribution");
}

// Haar-distributed orthonormal frame: QR of an i.i.d. complex Gaussian block
// with the R diagonal rephased to be positive.
inline Eigen::MatrixXcd sample_unitary_frame(int n, int k, RngStream& rng) {
    Eigen::MatrixXcd g(n, k);
    for (int c = 0; c < k; ++c)
        for (int r = 0; r < n; ++r) g(r, c) = Complex(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, k);
    const Eigen::MatrixXcd& qrm = qr.matrixQR();
    for (int c = 0; c < k; ++c) {
        const Complex r = qrm(c, c);
        const double mag = std::abs(r);
        if (mag > 0.0) q.col(c) *= r / mag;
    }
    return q;
}

inline SieDraw sample_sie_draw(const SieConfig& config, RngStream& rng) {
    config.validate();
    const int n = config.dimension;
    const int k = config.terms();
    SieDraw draw{Eigen::MatrixXcd(n, k), Eigen::VectorXcd(k)};
    if (config.vector_mode == VectorMode::independent_isotropic) {
        for (int t = 0; t < k; ++t) {
            draw.multipliers[t] = sample_multiplier(config, rng);
            draw.vectors.col(t) = sample_complex_unit_vector(n, rng).components;
        }
    } else {
        for (int t = 0; t < k; ++t) draw.multipliers[t] = sample_multiplier(config, rng);
        draw.vectors = sample_unitary_frame(n, k, rng);
    }
    return draw;
}

// S = sum_lambda s_lambda v v^T, assembled as W W^T with W = V diag(sqrt(s)).
// The upper triangle is mirrored onto the lower one so S_kl == S_lk holds
// exactly, not just up to rounding.
inline ScatteringMatrix assemble_scattering(const SieDraw& draw) {
    const Eigen::Index n = draw.vectors.rows();
    Eigen::MatrixXcd w = draw.vectors;
    for (Eigen::Index t = 0; t < draw.multipliers.size(); ++t)
        w.col(t) *= std::sqrt(draw.multipliers[t]);
    Eigen::MatrixXcd s(n, n);
    s.noalias() = w * w.transpose();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) s(j, i) = s(i, j);
    return {std::move(s)};
}

inline ScatteringMatrix sample_sie(const SieConfig& config, RngStream& rng) {
    return assemble_scattering(sample_sie_draw(config, rng));
}

// 1-based wave-space index quadruple (k, l, m, n) for E(S_kl conj(S_mn)).
struct QuadIndex {
    int k = 1, l = 1, m = 1, n = 1;

    bool coincident() const { return (k == m && l == n) || (k == n && l == m); }
};

struct QuadrupleMoment {
    QuadIndex index;
    Complex empirical{0.0, 0.0};
    double predicted = 0.0;
    double std_error = 0.0;
};

struct MomentReport {
    Eigen::MatrixXcd mean;
    Eigen::MatrixXd mean_std_error;
    Eigen::MatrixXd variance;
    std::vector<QuadrupleMoment> quadruples;
    std::uint64_t sample_count = 0;
};

// Predicted covariance (delta_{k-m} delta_{l-n} + delta_{k-n} delta_{l-m}) *
// rho^2 K / N^2; with the default K = N this is the rho^2/N delta structure.
inline double predicted_covariance(const SieConfig& config, const QuadIndex& q) {
    const double n = static_cast<double>(config.dimension);
    const double base = config.rho * config.rho * static_cast<double>(config.terms()) / (n * n);
    double value = 0.0;
    if (q.k == q.m && q.l == q.n) value += base;
    if (q.k == q.n && q.l == q.m) value += base;
    return value;
}

// Streaming entry means/variances plus centered covariances for the requested
// index quadruples, over `sample_count` independent draws. Sample i uses the
// substream (seed, i), so the report is identical for any worker count.
inline MomentReport empirical_moments(const SieConfig& config, std::uint64_t sample_count,
                                      std::span<const QuadIndex> quadruples, std::uint64_t seed,
                                      int workers = 1) {
    config.validate();
    if (sample_count < 100)
        throw std::invalid_argument("empirical_moments: sample_count must be >= 100");
    for (const QuadIndex& q : quadruples) {
        for (int idx : {q.k, q.l, q.m, q.n})
            if (idx < 1 || idx > config.dimension)
                throw std::invalid_argument("empirical_moments: quadruple index out of range");
    }

    struct State {
        MatrixWelford entries;
        std::vector<ComplexCovarianceAccumulator> quads;
    };
    auto states = run_chunked<State>(
        sample_count, resolve_workers(workers),
        [&] {
            return State{MatrixWelford(config.dimension, config.dimension),
                         std::vector<ComplexCovarianceAccumulator>(quadruples.size())};
        },
        [&](State& state, std::uint64_t i) {
            RngStream rng(seed, i);
            const ScatteringMatrix s = assemble_scattering(sample_sie_draw(config, rng));
            state.entries.push(s.entries);
            for (std::size_t j = 0; j < quadruples.size(); ++j) {
                const QuadIndex& q = quadruples[j];
                state.quads[j].push(s.entries(q.k - 1, q.l - 1), s.entries(q.m - 1, q.n - 1));
            }
        });

    State merged{MatrixWelford(config.dimension, config.dimension),
                 std::vector<ComplexCovarianceAccumulator>(quadruples.size())};
    for (State& s : states) {
        merged.entries.merge(s.entries);
        for (std::size_t j = 0; j < quadruples.size(); ++j) merged.quads[j].merge(s.quads[j]);
    }

    MomentReport report;
    report.mean = merged.entries.mean();
    report.mean_std_error = merged.entries.mean_std_error();
    report.variance = merged.entries.variance();
    report.sample_count = sample_count;
    report.quadruples.reserve(quadruples.size());
    for (std::size_t j = 0; j < quadruples.size(); ++j) {
        QuadrupleMoment qm;
        qm.index = quadruples[j];
        qm.empirical = merged.quads[j].covariance();
        qm.predicted = predicted_covariance(config, quadruples[j]);
        qm.std_error = merged.quads[j].std_error();
        report.quadruples.push_back(qm);
    }
    return report;
}

// var(S_11) / var(S_12) from accumulated entry statistics.
inline double variance_ratio_of(const ComplexCovarianceAccumulator& diag,
                                const ComplexCovarianceAccumulator& off_diag) {
    const double var_diag = diag.variance();
    const double var_off = off_diag.variance();
    if (var_off == 0.0 || var_diag == 0.0)
        throw std::runtime_error("variance_ratio: degenerate ensemble (zero variance)");
    return var_diag / var_off;
}

// Empirical var(S_11)/var(S_12) over `sample_count` draws. The entries are
// evaluated from the factored draw; a unit test pins them against the
// assembled matrix.
inline double variance_ratio(const SieConfig& config, std::uint64_t sample_count,
                             std::uint64_t seed, int workers = 1) {
    config.validate();
    if (config.dimension < 2)
        throw std::invalid_argument("variance_ratio: needs dimension >= 2 (no off-diagonal entry)");
    if (sample_count < 2) throw std::invalid_argument("variance_ratio: sample_count must be >= 2");

    struct State {
        ComplexCovarianceAccumulator s11;
        ComplexCovarianceAccumulator s12;
    };
    auto states = run_chunked<State>(
        sample_count, resolve_workers(workers), [] { return State{}; },
        [&](State& state, std::uint64_t i) {
            RngStream rng(seed, i);
            const SieDraw draw = sample_sie_draw(config, rng);
            const Complex s11 = draw.entry(0, 0);
            const Complex s12 = draw.entry(0, 1);
            state.s11.push(s11, s11);
            state.s12.push(s12, s12);
        });
    State merged;
    for (State& s : states) {
        merged.s11.merge(s.s11);
        merged.s12.merge(s.s12);
    }
    return variance_ratio_of(merged.s11, merged.s12);
}

}  // namespace isoscatter
