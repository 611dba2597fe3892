#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace isoscatter {

using Complex = std::complex<double>;

// Streaming mean/variance of complex samples. The variance convention is
// var(z) = E|z - Ez|^2 (variance of the real part plus variance of the
// imaginary part), unbiased (M-1) divisor. Accumulators are single-writer;
// cross-worker combination goes through merge(), which is associative up to
// floating-point rounding.
class ComplexAccumulator {
public:
    void push(Complex z) {
        ++count_;
        const Complex delta = z - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += (std::conj(delta) * (z - mean_)).real();
    }

    void merge(const ComplexAccumulator& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const std::uint64_t n = count_ + other.count_;
        const Complex delta = other.mean_ - mean_;
        mean_ += delta * (static_cast<double>(other.count_) / static_cast<double>(n));
        m2_ += other.m2_ + std::norm(delta) * static_cast<double>(count_) *
                               static_cast<double>(other.count_) / static_cast<double>(n);
        count_ = n;
    }

    std::uint64_t count() const { return count_; }
    Complex mean() const { return mean_; }

    double variance() const {
        return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
    }

    // Standard error of the mean in the complex sense: E|mean_hat - mean|^2
    // is variance/M, so the magnitude scale is sqrt(variance/M).
    double mean_std_error() const {
        return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
    }

private:
    std::uint64_t count_ = 0;
    Complex mean_{0.0, 0.0};
    double m2_ = 0.0;
};

// Streaming centered cross-moment E((u - u_bar) * conj(v - v_bar)) of complex
// pairs, plus an accumulator over the product stream u*conj(v) that yields the
// standard error of the cross-moment estimate.
class ComplexCovarianceAccumulator {
public:
    void push(Complex u, Complex v) {
        product_.push(u * std::conj(v));
        ++count_;
        const Complex du = u - mean_u_;
        mean_u_ += du / static_cast<double>(count_);
        const Complex dv_old = v - mean_v_;
        mean_v_ += dv_old / static_cast<double>(count_);
        comoment_ += (u - mean_u_) * std::conj(dv_old);
    }

    void merge(const ComplexCovarianceAccumulator& other) {
        product_.merge(other.product_);
        if (other.count_ == 0) return;
        if (count_ == 0) {
            count_ = other.count_;
            mean_u_ = other.mean_u_;
            mean_v_ = other.mean_v_;
            comoment_ = other.comoment_;
            return;
        }
        const std::uint64_t n = count_ + other.count_;
        const Complex du = other.mean_u_ - mean_u_;
        const Complex dv = other.mean_v_ - mean_v_;
        const double w = static_cast<double>(count_) * static_cast<double>(other.count_) /
                         static_cast<double>(n);
        comoment_ += other.comoment_ + du * std::conj(dv) * w;
        mean_u_ += du * (static_cast<double>(other.count_) / static_cast<double>(n));
        mean_v_ += dv * (static_cast<double>(other.count_) / static_cast<double>(n));
        count_ = n;
    }

    std::uint64_t count() const { return count_; }
    Complex mean_first() const { return mean_u_; }
    Complex mean_second() const { return mean_v_; }

    Complex covariance() const {
        if (count_ < 2) throw std::invalid_argument("covariance: need at least 2 samples");
        return comoment_ / static_cast<double>(count_ - 1);
    }

    // When pushed with u == v this is the complex variance.
    double variance() const { return covariance().real(); }

    double std_error() const {
        return count_ > 1 ? std::sqrt(product_.variance() / static_cast<double>(count_)) : 0.0;
    }

private:
    std::uint64_t count_ = 0;
    Complex mean_u_{0.0, 0.0};
    Complex mean_v_{0.0, 0.0};
    Complex comoment_{0.0, 0.0};
    ComplexAccumulator product_;
};

// Entry-wise streaming mean/variance over a matrix ensemble.
class MatrixWelford {
public:
    MatrixWelford(Eigen::Index rows, Eigen::Index cols)
        : mean_(Eigen::MatrixXcd::Zero(rows, cols)), m2_(Eigen::MatrixXd::Zero(rows, cols)) {}

    void push(const Eigen::MatrixXcd& x) {
        ++count_;
        const Eigen::MatrixXcd delta = x - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += (delta.conjugate().cwiseProduct(x - mean_)).real();
    }

    void merge(const MatrixWelford& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        const std::uint64_t n = count_ + other.count_;
        const Eigen::MatrixXcd delta = other.mean_ - mean_;
        mean_ += delta * (static_cast<double>(other.count_) / static_cast<double>(n));
        m2_ += other.m2_ + delta.cwiseAbs2() * (static_cast<double>(count_) *
                                                static_cast<double>(other.count_) /
                                                static_cast<double>(n));
        count_ = n;
    }

    std::uint64_t count() const { return count_; }
    const Eigen::MatrixXcd& mean() const { return mean_; }

    Eigen::MatrixXd variance() const {
        if (count_ < 2) return Eigen::MatrixXd::Zero(m2_.rows(), m2_.cols());
        return m2_ / static_cast<double>(count_ - 1);
    }

    Eigen::MatrixXd mean_std_error() const {
        return (variance() / static_cast<double>(count_)).cwiseSqrt();
    }

private:
    std::uint64_t count_ = 0;
    Eigen::MatrixXcd mean_;
    Eigen::MatrixXd m2_;
};

// Two-pass complex sample variance (unbiased), for stored samples.
inline double complex_variance(std::span<const Complex> samples) {
    if (samples.size() < 2) return 0.0;
    Complex mean{0.0, 0.0};
    for (Complex z : samples) mean += z;
    mean /= static_cast<double>(samples.size());
    double m2 = 0.0;
    for (Complex z : samples) m2 += std::norm(z - mean);
    return m2 / static_cast<double>(samples.size() - 1);
}

// Delete-one jackknife standard error of the complex sample variance.
inline double jackknife_variance_se(std::span<const Complex> samples) {
    const std::size_t m = samples.size();
    if (m < 3) throw std::invalid_argument("jackknife_variance_se: need at least 3 samples");
    Complex mean{0.0, 0.0};
    for (Complex z : samples) mean += z;
    mean /= static_cast<double>(m);
    double m2 = 0.0;
    for (Complex z : samples) m2 += std::norm(z - mean);

    // Leave-one-out M2: m2_(i) = m2 - |z_i - mean|^2 * m/(m-1).
    std::vector<double> loo(m);
    double loo_mean = 0.0;
    const double scale = static_cast<double>(m) / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
        const double m2_i = m2 - std::norm(samples[i] - mean) * scale;
        loo[i] = m2_i / static_cast<double>(m - 2);
        loo_mean += loo[i];
    }
    loo_mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
    return std::sqrt(ss * static_cast<double>(m - 1) / static_cast<double>(m));
}

}  // namespace isoscatter
