#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "isoscatter/parallel.hpp"
#include "isoscatter/rng.hpp"
#include "isoscatter/sie.hpp"
#include "isoscatter/stats.hpp"

namespace isoscatter {

// Port-bound linear forms and the perturbation map dA = L S L^T, plus the
// ensemble variance statistics behind the universal ratio
// var(A_pq) = sqrt(var(A_pp) var(A_qq)) / 2.

struct PortForms {
    Eigen::MatrixXcd rows;  // P x N
    bool rows_orthogonal = true;

    int port_count() const { return static_cast<int>(rows.rows()); }
    int wave_dim() const { return static_cast<int>(rows.cols()); }

    Eigen::VectorXd row_norms() const { return rows.rowwise().norm(); }

    double max_orthogonality_violation() const {
        double worst = 0.0;
        for (Eigen::Index p = 0; p < rows.rows(); ++p)
            for (Eigen::Index q = p + 1; q < rows.rows(); ++q) {
                const double overlap = std::abs(rows.row(q).dot(rows.row(p)));
                worst = std::max(worst, overlap / (rows.row(p).norm() * rows.row(q).norm()));
            }
        return worst;
    }

    // Validated constructor: rows must be Hermitian-orthogonal within
    // 1e-10 * |L_p| * |L_q| and have positive norms.
    static PortForms checked(Eigen::MatrixXcd m) {
        PortForms forms{std::move(m), true};
        const Eigen::VectorXd norms = forms.row_norms();
        for (Eigen::Index p = 0; p < norms.size(); ++p)
            if (!(norms[p] > 0.0))
                throw std::invalid_argument("PortForms: every row must have positive norm");
        if (forms.max_orthogonality_violation() > 1e-10)
            throw std::invalid_argument("PortForms: rows are not orthogonal");
        return forms;
    }

    // Escape hatch for control experiments with deliberately non-orthogonal
    // rows (e.g. duplicated ports).
    static PortForms unchecked(Eigen::MatrixXcd m) { return PortForms{std::move(m), false}; }
};

// Random port forms with mutually orthogonal rows scaled to the requested
// norms: Gram-Schmidt on i.i.d. complex Gaussian rows, run twice for
// numerical orthogonality. With real_part_only set, only the real part of the
// Hermitian inner product is removed (power additivity needs no more than
// that); the resulting rows are generally not fully orthogonal.
inline PortForms make_orthogonal_port_forms(int ports, int wave_dim,
                                            std::span<const double> norms, RngStream& rng,
                                            bool real_part_only = false) {
    if (ports < 1) throw std::invalid_argument("make_orthogonal_port_forms: ports must be >= 1");
    if (ports > wave_dim)
        throw std::invalid_argument(
            "make_orthogonal_port_forms: cannot orthogonalize more rows than the wave dimension");
    if (static_cast<int>(norms.size()) != ports)
        throw std::invalid_argument("make_orthogonal_port_forms: need one norm per port");
    for (double x : norms)
        if (!(x > 0.0)) throw std::invalid_argument("make_orthogonal_port_forms: norms must be positive");

    Eigen::MatrixXcd rows(ports, wave_dim);
    for (int p = 0; p < ports; ++p) {
        Eigen::RowVectorXcd v(wave_dim);
        for (;;) {
            for (int k = 0; k < wave_dim; ++k) v[k] = Complex(rng.normal(), rng.normal());
            for (int pass = 0; pass < 2; ++pass) {
                for (int q = 0; q < p; ++q) {
                    const double nq2 = rows.row(q).squaredNorm();
                    if (real_part_only) {
                        const double c = rows.row(q).dot(v).real() / nq2;
                        v -= c * rows.row(q);
                    } else {
                        const Complex c = rows.row(q).dot(v) / nq2;
                        v -= c * rows.row(q);
                    }
                }
            }
            const double norm = v.norm();
            if (norm > 1e-8) {
                rows.row(p) = v * (norms[p] / norm);
                break;
            }
        }
    }
    PortForms forms{std::move(rows), !real_part_only};
    return forms;
}

struct PerturbationMatrix {
    Eigen::MatrixXcd entries;
    int port_count() const { return static_cast<int>(entries.rows()); }
};

namespace detail {
inline void mirror_upper(Eigen::MatrixXcd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) m(j, i) = m(i, j);
}
}  // namespace detail

// dA_pq = sum_kl L_pk S_kl L_ql, i.e. dA = L S L^T with the plain transpose.
// S is symmetric by construction, so the upper triangle is mirrored to keep
// dA_pq == dA_qp exact.
inline PerturbationMatrix perturb(const PortForms& forms, const ScatteringMatrix& s) {
    if (forms.wave_dim() != s.dimension())
        throw std::invalid_argument("perturb: port forms and scattering matrix dimensions differ");
    Eigen::MatrixXcd a(forms.port_count(), forms.port_count());
    a.noalias() = forms.rows * s.entries * forms.rows.transpose();
    detail::mirror_upper(a);
    return {std::move(a)};
}

// Same map evaluated from the factored draw: dA = sum_lambda s_lambda
// (L v)(L v)^T. Agrees with perturb(assemble_scattering(draw)) up to
// rounding and avoids materializing the N x N matrix.
inline PerturbationMatrix project_perturbation(const PortForms& forms, const SieDraw& draw) {
    if (forms.wave_dim() != draw.vectors.rows())
        throw std::invalid_argument("project_perturbation: dimension mismatch");
    Eigen::MatrixXcd w(forms.port_count(), draw.multipliers.size());
    w.noalias() = forms.rows * draw.vectors;
    for (Eigen::Index t = 0; t < draw.multipliers.size(); ++t)
        w.col(t) *= std::sqrt(draw.multipliers[t]);
    Eigen::MatrixXcd a(forms.port_count(), forms.port_count());
    a.noalias() = w * w.transpose();
    detail::mirror_upper(a);
    return {std::move(a)};
}

struct VarianceTable {
    Eigen::MatrixXd empirical;
    Eigen::MatrixXd predicted;
    Eigen::MatrixXd std_error;
    std::uint64_t sample_count = 0;
    int port_count() const { return static_cast<int>(empirical.rows()); }
};

// Closed-form prediction var(A_pq) = (1 + delta_pq) |L_p|^2 |L_q|^2 rho^2 K/N^2
// (the rho^2/N structure at the default K = N).
inline Eigen::MatrixXd predicted_variance_table(const PortForms& forms, const SieConfig& config) {
    const Eigen::VectorXd norms = forms.row_norms();
    const double n = static_cast<double>(config.dimension);
    const double base = config.rho * config.rho * static_cast<double>(config.terms()) / (n * n);
    Eigen::MatrixXd predicted(forms.port_count(), forms.port_count());
    for (int p = 0; p < forms.port_count(); ++p)
        for (int q = 0; q < forms.port_count(); ++q) {
            const double np2 = norms[p] * norms[p];
            const double nq2 = norms[q] * norms[q];
            predicted(p, q) = (p == q ? 2.0 : 1.0) * np2 * nq2 * base;
        }
    return predicted;
}

// Streaming complex variances of every dA_pq over the SIE ensemble, with the
// closed-form predictions attached. Sample i uses substream (seed, i).
inline VarianceTable ensemble_variance(const PortForms& forms, const SieConfig& config,
                                       std::uint64_t sample_count, std::uint64_t seed,
                                       int workers = 1) {
    config.validate();
    if (forms.wave_dim() != config.dimension)
        throw std::invalid_argument("ensemble_variance: port forms and config dimensions differ");
    if (sample_count < 100)
        throw std::invalid_argument("ensemble_variance: sample_count must be >= 100");

    const int ports = forms.port_count();
    using State = std::vector<ComplexCovarianceAccumulator>;  // row-major p*P+q, p <= q
    auto states = run_chunked<State>(
        sample_count, resolve_workers(workers),
        [&] { return State(static_cast<std::size_t>(ports) * ports); },
        [&](State& state, std::uint64_t i) {
            RngStream rng(seed, i);
            const PerturbationMatrix da = project_perturbation(forms, sample_sie_draw(config, rng));
            for (int p = 0; p < ports; ++p)
                for (int q = p; q < ports; ++q) {
                    const Complex z = da.entries(p, q);
                    state[static_cast<std::size_t>(p) * ports + q].push(z, z);
                }
        });
    State merged(static_cast<std::size_t>(ports) * ports);
    for (State& s : states)
        for (std::size_t j = 0; j < merged.size(); ++j) merged[j].merge(s[j]);

    VarianceTable table;
    table.sample_count = sample_count;
    table.empirical.resize(ports, ports);
    table.std_error.resize(ports, ports);
    table.predicted = predicted_variance_table(forms, config);
    for (int p = 0; p < ports; ++p)
        for (int q = p; q < ports; ++q) {
            const auto& acc = merged[static_cast<std::size_t>(p) * ports + q];
            table.empirical(p, q) = table.empirical(q, p) = acc.variance();
            table.std_error(p, q) = table.std_error(q, p) = acc.std_error();
        }
    return table;
}

// Relative residual of the universal ratio for ports p != q (1-based):
// |var(A_pq) - sqrt(var(A_pp) var(A_qq))/2| / var(A_pq).
inline double universal_ratio_residual(const VarianceTable& table, int p, int q) {
    if (p == q) throw std::invalid_argument("universal_ratio_residual: ports must differ");
    if (p < 1 || q < 1 || p > table.port_count() || q > table.port_count())
        throw std::invalid_argument("universal_ratio_residual: port index out of range");
    const double var_pq = table.empirical(p - 1, q - 1);
    if (var_pq == 0.0)
        throw std::runtime_error("universal_ratio_residual: degenerate (zero) cross variance");
    const double predicted =
        0.5 * std::sqrt(table.empirical(p - 1, p - 1) * table.empirical(q - 1, q - 1));
    return std::abs(var_pq - predicted) / var_pq;
}

}  // namespace isoscatter
