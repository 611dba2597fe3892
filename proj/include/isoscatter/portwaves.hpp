#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "isoscatter/stats.hpp"

namespace isoscatter {

// Low-frequency port-state algebra: voltage/current <-> wave decomposition,
// the projection operators onto forward/backward waves, and the Lorentz-type
// pairing. Port current is oriented into the system.

struct PortState {
    Eigen::VectorXcd voltage;  // volts
    Eigen::VectorXcd current;  // amperes

    int ports() const { return static_cast<int>(voltage.size()); }

    void check() const {
        if (voltage.size() != current.size())
            throw std::invalid_argument("PortState: voltage and current lengths differ");
        if (voltage.size() < 1) throw std::invalid_argument("PortState: needs at least one port");
    }
};

struct WaveState {
    Eigen::VectorXcd forward;   // phi+, sqrt(watts)
    Eigen::VectorXcd backward;  // phi-, sqrt(watts)
    double reference_resistance = 50.0;  // ohms

    int ports() const { return static_cast<int>(forward.size()); }
};

// Projection operators on stacked (V, I) vectors:
//   Pi_+- = 1/2 [ I, +-R I ; +-I/R, I ]
// Pi+ + Pi- = identity, both idempotent, and Pi+ Pi- = 0.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> projectors(double reference_resistance, int n) {
    if (!(reference_resistance > 0.0))
        throw std::invalid_argument("projectors: reference resistance must be positive");
    if (n < 1) throw std::invalid_argument("projectors: need at least one port");
    const double r = reference_resistance;
    Eigen::MatrixXd plus = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Eigen::MatrixXd minus = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        plus(i, i) = 0.5;
        plus(i, n + i) = 0.5 * r;
        plus(n + i, i) = 0.5 / r;
        plus(n + i, n + i) = 0.5;
        minus(i, i) = 0.5;
        minus(i, n + i) = -0.5 * r;
        minus(n + i, i) = -0.5 / r;
        minus(n + i, n + i) = 0.5;
    }
    return {std::move(plus), std::move(minus)};
}

// phi_+- = V_+- / sqrt(2R) = (V +- R I) / (2 sqrt(2R)), where V_+- is the
// voltage component of the Pi_+- projection.
inline WaveState to_waves(const PortState& state, double reference_resistance) {
    state.check();
    if (!(reference_resistance > 0.0))
        throw std::invalid_argument("to_waves: reference resistance must be positive");
    const double r = reference_resistance;
    const double scale = 1.0 / (2.0 * std::sqrt(2.0 * r));
    WaveState w;
    w.reference_resistance = r;
    w.forward = (state.voltage + r * state.current) * scale;
    w.backward = (state.voltage - r * state.current) * scale;
    return w;
}

// Inverse of to_waves: V = V+ + V-, I = (V+ - V-)/R.
inline PortState from_waves(const WaveState& w) {
    if (!(w.reference_resistance > 0.0))
        throw std::invalid_argument("from_waves: reference resistance must be positive");
    if (w.forward.size() != w.backward.size())
        throw std::invalid_argument("from_waves: wave vectors differ in length");
    const double s = std::sqrt(2.0 * w.reference_resistance);
    PortState state;
    state.voltage = (w.forward + w.backward) * s;
    state.current = (w.forward - w.backward) * (s / w.reference_resistance);
    return state;
}

// Bilinear dot product, no conjugation.
inline Complex bilinear_dot(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return a.cwiseProduct(b).sum();
}

// Lorentz-type pairing of two port states: -V^a.I^b + V^b.I^a (bilinear,
// no conjugation). Antisymmetric, and independent of any reference
// resistance used on the wave side.
inline Complex lorentz_pairing(const PortState& a, const PortState& b) {
    a.check();
    b.check();
    if (a.ports() != b.ports()) throw std::invalid_argument("lorentz_pairing: port counts differ");
    return -bilinear_dot(a.voltage, b.current) + bilinear_dot(b.voltage, a.current);
}

// Wave-side pairing phi^{a+}.phi^{b-} - phi^{b+}.phi^{a-}.
inline Complex wave_pairing(const WaveState& a, const WaveState& b) {
    if (a.ports() != b.ports()) throw std::invalid_argument("wave_pairing: port counts differ");
    return bilinear_dot(a.forward, b.backward) - bilinear_dot(b.forward, a.backward);
}

// With V_+- = (V +- R I)/2 and phi_+- = V_+-/sqrt(2R), expanding the products
// gives -V^a.I^b + V^b.I^a = 2 (V^{a+}.V^{b-} - V^{b+}.V^{a-}) / R, which is
// 4x the wave-side pairing. The factor is R-independent and exact.
inline constexpr double kLorentzWavePairingScale = 4.0;

}  // namespace isoscatter
