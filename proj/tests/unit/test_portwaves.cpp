#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "isoscatter/portwaves.hpp"
#include "isoscatter/rng.hpp"

using namespace isoscatter;
using Catch::Approx;

namespace {

PortState random_state(int n, std::uint64_t seed, std::uint64_t index) {
    RngStream rng(seed, index);
    PortState state;
    state.voltage.resize(n);
    state.current.resize(n);
    for (int i = 0; i < n; ++i) {
        state.voltage[i] = Complex{rng.normal(), rng.normal()};
        state.current[i] = Complex{rng.normal(), rng.normal()};
    }
    return state;
}

constexpr double kRefs[] = {1.0, 50.0, 377.0};

}  // namespace

TEST_CASE("projector pair sums to the identity exactly") {
    for (double r : kRefs)
        for (int n : {1, 3}) {
            const auto [plus, minus] = projectors(r, n);
            const Eigen::MatrixXd sum = plus + minus;
            REQUIRE((sum - Eigen::MatrixXd::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff() == 0.0);
        }
}

TEST_CASE("projectors are idempotent and mutually annihilating") {
    for (double r : kRefs)
        for (int n : {1, 3}) {
            const auto [plus, minus] = projectors(r, n);
            REQUIRE((plus * plus - plus).cwiseAbs().maxCoeff() < 1e-14);
            REQUIRE((minus * minus - minus).cwiseAbs().maxCoeff() < 1e-14);
            REQUIRE((plus * minus).cwiseAbs().maxCoeff() < 1e-14);
            REQUIRE((minus * plus).cwiseAbs().maxCoeff() < 1e-14);
        }
}

TEST_CASE("the backward projector annihilates matched forward states") {
    // (V, I) = (R I0, I0) is a pure forward wave
    for (double r : kRefs) {
        const int n = 3;
        const auto [plus, minus] = projectors(r, n);
        Eigen::VectorXd stacked(2 * n);
        stacked << r * 1.0, r * (-2.0), r * 0.5, 1.0, -2.0, 0.5;
        REQUIRE((minus * stacked).cwiseAbs().maxCoeff() < 1e-14 * r);
        REQUIRE((plus * stacked - stacked).cwiseAbs().maxCoeff() < 1e-14 * r);
    }
}

TEST_CASE("zero state maps to zero waves") {
    PortState zero;
    zero.voltage = Eigen::VectorXcd::Zero(2);
    zero.current = Eigen::VectorXcd::Zero(2);
    const WaveState w = to_waves(zero, 50.0);
    REQUIRE(w.forward.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(w.backward.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unit forward excitation: V = sqrt(2R), I = V/R gives phi+ = 1, phi- = 0") {
    for (double r : kRefs) {
        PortState state;
        state.voltage = Eigen::VectorXcd::Zero(2);
        state.current = Eigen::VectorXcd::Zero(2);
        state.voltage[0] = std::sqrt(2.0 * r);
        state.current[0] = state.voltage[0] / r;
        const WaveState w = to_waves(state, r);
        REQUIRE(std::abs(w.forward[0] - Complex{1.0, 0.0}) < 1e-12);
        REQUIRE(std::abs(w.backward[0]) < 1e-12);
        REQUIRE(std::abs(w.forward[1]) == 0.0);
    }
}

TEST_CASE("wave decomposition round trips") {
    for (double r : kRefs)
        for (int i = 0; i < 20; ++i) {
            const PortState state = random_state(3, 501, static_cast<std::uint64_t>(i));
            const PortState back = from_waves(to_waves(state, r));
            REQUIRE((back.voltage - state.voltage).cwiseAbs().maxCoeff() < 1e-12);
            REQUIRE((back.current - state.current).cwiseAbs().maxCoeff() < 1e-12);

            WaveState w;
            w.reference_resistance = r;
            RngStream rng(502, static_cast<std::uint64_t>(i));
            w.forward.resize(2);
            w.backward.resize(2);
            for (int k = 0; k < 2; ++k) {
                w.forward[k] = Complex{rng.normal(), rng.normal()};
                w.backward[k] = Complex{rng.normal(), rng.normal()};
            }
            const WaveState again = to_waves(from_waves(w), r);
            REQUIRE((again.forward - w.forward).cwiseAbs().maxCoeff() < 1e-12);
            REQUIRE((again.backward - w.backward).cwiseAbs().maxCoeff() < 1e-12);
        }
}

TEST_CASE("equal forward and backward waves carry no current") {
    WaveState w;
    w.reference_resistance = 75.0;
    w.forward = Eigen::VectorXcd::Zero(2);
    w.backward = Eigen::VectorXcd::Zero(2);
    w.forward[0] = w.backward[0] = Complex{0.3, -0.7};
    w.forward[1] = w.backward[1] = Complex{-1.2, 0.1};
    const PortState state = from_waves(w);
    REQUIRE(state.current.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lorentz pairing is antisymmetric and vanishes on equal states") {
    const PortState a = random_state(4, 503, 0);
    const PortState b = random_state(4, 503, 1);
    REQUIRE(lorentz_pairing(a, a) == Complex{0.0, 0.0});
    REQUIRE(std::abs(lorentz_pairing(a, b) + lorentz_pairing(b, a)) < 1e-14);
}

TEST_CASE("two-sided pairing identity: port side equals 4x the wave side, any R") {
    for (int i = 0; i < 1000; ++i) {
        const PortState a = random_state(3, 504, 2 * static_cast<std::uint64_t>(i));
        const PortState b = random_state(3, 504, 2 * static_cast<std::uint64_t>(i) + 1);
        const Complex port_side = lorentz_pairing(a, b);
        for (double r : kRefs) {
            const Complex wave_side = wave_pairing(to_waves(a, r), to_waves(b, r));
            REQUIRE(std::abs(port_side - kLorentzWavePairingScale * wave_side) < 1e-12);
        }
    }
}

TEST_CASE("the wave-side pairing value does not depend on R") {
    const PortState a = random_state(5, 505, 0);
    const PortState b = random_state(5, 505, 1);
    const Complex at_unity = wave_pairing(to_waves(a, 1.0), to_waves(b, 1.0));
    for (double r : {50.0, 377.0, 2.5}) {
        const Complex at_r = wave_pairing(to_waves(a, r), to_waves(b, r));
        REQUIRE(std::abs(at_r - at_unity) < 1e-12);
    }
}

TEST_CASE("pairing is bilinear") {
    const PortState a = random_state(3, 506, 0);
    const PortState b = random_state(3, 506, 1);
    const PortState c = random_state(3, 506, 2);
    PortState scaled;
    scaled.voltage = 2.0 * a.voltage;
    scaled.current = 2.0 * a.current;
    REQUIRE(std::abs(lorentz_pairing(scaled, b) - 2.0 * lorentz_pairing(a, b)) < 1e-13);
    PortState sum;
    sum.voltage = b.voltage + c.voltage;
    sum.current = b.current + c.current;
    REQUIRE(std::abs(lorentz_pairing(a, sum) - lorentz_pairing(a, b) - lorentz_pairing(a, c)) <
            1e-13);
}

TEST_CASE("frozen sign convention: unit forward against unit backward pairs to +4") {
    // port side = -Va.Ib + Vb.Ia = 4, wave side = phi_a+ phi_b- - phi_b+ phi_a- = 1
    const double r = 50.0;
    WaveState fwd, bwd;
    fwd.reference_resistance = bwd.reference_resistance = r;
    fwd.forward = Eigen::VectorXcd::Zero(1);
    fwd.backward = Eigen::VectorXcd::Zero(1);
    bwd.forward = Eigen::VectorXcd::Zero(1);
    bwd.backward = Eigen::VectorXcd::Zero(1);
    fwd.forward[0] = 1.0;
    bwd.backward[0] = 1.0;
    const PortState a = from_waves(fwd);
    const PortState b = from_waves(bwd);
    REQUIRE(lorentz_pairing(a, b).real() == Approx(4.0).epsilon(1e-12));
    REQUIRE(lorentz_pairing(a, b).imag() == Approx(0.0).margin(1e-14));
    REQUIRE(wave_pairing(fwd, bwd).real() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("symmetric multi-port models satisfy port-level reciprocity") {
    // for y = A x with A symmetric: x_b . y_a - x_a . y_b = 0
    RngStream rng(507, 0);
    const int n = 4;
    Eigen::MatrixXcd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) a(i, j) = a(j, i) = Complex{rng.normal(), rng.normal()};
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXcd xa(n), xb(n);
        for (int i = 0; i < n; ++i) {
            xa[i] = Complex{rng.normal(), rng.normal()};
            xb[i] = Complex{rng.normal(), rng.normal()};
        }
        const Eigen::VectorXcd ya = a * xa;
        const Eigen::VectorXcd yb = a * xb;
        const Complex residual = bilinear_dot(xb, ya) - bilinear_dot(xa, yb);
        REQUIRE(std::abs(residual) < 1e-12);
    }
}

TEST_CASE("port-wave operations validate inputs") {
    REQUIRE_THROWS_AS(projectors(0.0, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(projectors(50.0, 0), std::invalid_argument);
    PortState mismatched;
    mismatched.voltage = Eigen::VectorXcd::Zero(2);
    mismatched.current = Eigen::VectorXcd::Zero(3);
    REQUIRE_THROWS_AS(to_waves(mismatched, 50.0), std::invalid_argument);
    const PortState a = random_state(2, 508, 0);
    const PortState b = random_state(3, 508, 1);
    REQUIRE_THROWS_AS(lorentz_pairing(a, b), std::invalid_argument);
    PortState ok = random_state(2, 508, 2);
    REQUIRE_THROWS_AS(to_waves(ok, -1.0), std::invalid_argument);
}
