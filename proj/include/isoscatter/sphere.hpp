#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "isoscatter/parallel.hpp"
#include "isoscatter/rng.hpp"

namespace isoscatter {

// Sampling and closed-form statistics of isotropic stochastic unit vectors on
// real and complex unit spheres.

struct RealUnitVector {
    Eigen::VectorXd components;
    int dimension() const { return static_cast<int>(components.size()); }
};

struct ComplexUnitVector {
    Eigen::VectorXcd components;
    int dimension() const { return static_cast<int>(components.size()); }
};

enum class Field { real, complex };

struct IsotropicSampleConfig {
    int dimension = 0;
    Field field = Field::real;
    std::uint64_t seed = 0;
    std::uint64_t sample_count = 1;

    void validate() const {
        if (dimension < 1) throw std::invalid_argument("IsotropicSampleConfig: dimension must be >= 1");
        if (sample_count < 1) throw std::invalid_argument("IsotropicSampleConfig: sample_count must be >= 1");
    }
};

// Uniform draw on S^{n-1}: n i.i.d. standard normals, normalized. Rotation
// invariance of the Gaussian makes the direction exactly uniform, with no
// rejection step.
inline RealUnitVector sample_real_unit_vector(int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_real_unit_vector: dimension must be >= 1");
    Eigen::VectorXd x(n);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < n; ++i) x[i] = rng.normal();
        norm2 = x.squaredNorm();
    } while (norm2 == 0.0);
    x /= std::sqrt(norm2);
    return {std::move(x)};
}

// Uniform draw on the Hermitian unit sphere of C^N: a draw on S^{2N-1}
// reinterpreted as N complex pairs.
inline ComplexUnitVector sample_complex_unit_vector(int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_complex_unit_vector: dimension must be >= 1");
    const RealUnitVector real = sample_real_unit_vector(2 * n, rng);
    Eigen::VectorXcd z(n);
    for (int i = 0; i < n; ++i)
        z[i] = std::complex<double>(real.components[2 * i], real.components[2 * i + 1]);
    return {std::move(z)};
}

// Marginal density of one cartesian component of a uniform vector on S^{n-1}:
//   p(z) = (1 - z^2)^{(n-3)/2} * Gamma(n/2) / (sqrt(pi) * Gamma((n-1)/2))
// The prefactor is evaluated through log-gamma differences so dimensions up
// to 1e6 and beyond stay finite. For n == 2 the density diverges at z = +-1;
// the evaluation returns +infinity there and quadrature has to stay on the
// open interval.
inline double marginal_pdf(double z, int n) {
    if (n < 2) throw std::invalid_argument("marginal_pdf: dimension must be >= 2");
    if (!(z >= -1.0 && z <= 1.0)) throw std::domain_error("marginal_pdf: z must lie in [-1, 1]");
    const double log_pref = std::lgamma(0.5 * n) - std::lgamma(0.5 * (n - 1)) -
                            0.5 * std::log(std::numbers::pi);
    const double half_exponent = 0.5 * (n - 3);
    const double one_minus_z2 = (1.0 - z) * (1.0 + z);
    if (one_minus_z2 == 0.0) {
        if (half_exponent < 0.0) return std::numeric_limits<double>::infinity();
        if (half_exponent == 0.0) return std::exp(log_pref);
        return 0.0;
    }
    return std::exp(log_pref + half_exponent * std::log(one_minus_z2));
}

// Moments of one cartesian component: 0 for odd orders, 1/n for order 2,
// 3/(n(n+2)) for order 4.
inline double moment(int n, int order) {
    if (n < 1) throw std::invalid_argument("moment: dimension must be >= 1");
    switch (order) {
        case 1:
        case 3:
            return 0.0;
        case 2:
            return 1.0 / static_cast<double>(n);
        case 4:
            return 3.0 / (static_cast<double>(n) * static_cast<double>(n + 2));
        default:
            throw std::invalid_argument("moment: unsupported order (expected 1..4)");
    }
}

// Exact E(x^2 y^2) for two distinct cartesian components: 1/(n(n+2)).
// Sanity: sum over all index pairs of E(x_i^2 x_j^2) then equals
// n*m4 + n(n-1)/(n(n+2)) = 1 = E((sum x^2)^2). On S^1 this gives 1/8.
inline double cross_square_moment(int n) {
    if (n < 2) throw std::invalid_argument("cross_square_moment: dimension must be >= 2");
    return 1.0 / (static_cast<double>(n) * static_cast<double>(n + 2));
}

// Joint density of m < n cartesian components, supported on the unit ball
// sum x_k^2 <= 1:
//   p(x_1..x_m) = |S^{n-m-1}| / |S^{n-1}| * (1 - sum x_k^2)^{(n-m-2)/2}
// with |S^{n-m-1}|/|S^{n-1}| = Gamma(n/2) / (pi^{m/2} Gamma((n-m)/2)).
// For m == 1 this is exactly marginal_pdf.
inline double joint_marginal_pdf(std::span<const double> values, int n) {
    const int m = static_cast<int>(values.size());
    if (m < 1) throw std::invalid_argument("joint_marginal_pdf: need at least one component");
    if (m >= n) throw std::invalid_argument("joint_marginal_pdf: marginal size must satisfy m < n");
    double sum_sq = 0.0;
    for (double v : values) {
        if (!(v >= -1.0 && v <= 1.0))
            throw std::domain_error("joint_marginal_pdf: components must lie in [-1, 1]");
        sum_sq += v * v;
    }
    if (sum_sq > 1.0 + 1e-12)
        throw std::domain_error("joint_marginal_pdf: sum of squares exceeds 1");
    sum_sq = std::min(sum_sq, 1.0);
    const double log_pref = std::lgamma(0.5 * n) - std::lgamma(0.5 * (n - m)) -
                            0.5 * m * std::log(std::numbers::pi);
    const double half_exponent = 0.5 * (n - m - 2);
    const double slack = 1.0 - sum_sq;
    if (slack == 0.0) {
        if (half_exponent < 0.0) return std::numeric_limits<double>::infinity();
        if (half_exponent == 0.0) return std::exp(log_pref);
        return 0.0;
    }
    return std::exp(log_pref + half_exponent * std::log(slack));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

// Kolmogorov-Smirnov distance between the empirical distribution of the first
// cartesian component over `sample_count` draws and N(0, 1/n). 1/n is the
// exact component variance at every n.
inline double gaussian_limit_distance(int n, std::uint64_t sample_count, std::uint64_t seed,
                                      int workers = 1) {
    if (n < 1) throw std::invalid_argument("gaussian_limit_distance: dimension must be >= 1");
    if (sample_count < 1)
        throw std::invalid_argument("gaussian_limit_distance: sample_count must be >= 1");
    std::vector<double> xs(sample_count);
    parallel_fill(xs, resolve_workers(workers), [&](std::uint64_t i) {
        RngStream rng(seed, i);
        return sample_real_unit_vector(n, rng).components[0];
    });
    std::sort(xs.begin(), xs.end());
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double inv_m = 1.0 / static_cast<double>(sample_count);
    double dist = 0.0;
    for (std::uint64_t i = 0; i < sample_count; ++i) {
        const double cdf = normal_cdf(xs[i] * sqrt_n);
        dist = std::max(dist, std::abs(cdf - static_cast<double>(i) * inv_m));
        dist = std::max(dist, std::abs(static_cast<double>(i + 1) * inv_m - cdf));
    }
    return dist;
}

}  // namespace isoscatter
