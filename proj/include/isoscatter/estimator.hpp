#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>

#include "isoscatter/stats.hpp"

namespace isoscatter {

// Estimation of the environment's effective reflection coefficient and port
// norms from reflection/transmission statistics of a reference two-port.

struct PortNormModel {
    enum class Type { thevenin, norton, scattering };

    Type type = Type::scattering;
    double radiation_resistance = 0.0;   // ohms (Thevenin)
    double radiation_conductance = 0.0;  // siemens (Norton)
    double reflection_magnitude = 0.0;   // |S_pp| (scattering)
    double efficiency = 1.0;             // C in (0, 1] (scattering)

    static PortNormModel thevenin(double r_rad) {
        PortNormModel m;
        m.type = Type::thevenin;
        m.radiation_resistance = r_rad;
        return m;
    }
    static PortNormModel norton(double g_rad) {
        PortNormModel m;
        m.type = Type::norton;
        m.radiation_conductance = g_rad;
        return m;
    }
    static PortNormModel scattering(double s_pp_magnitude, double efficiency = 1.0) {
        PortNormModel m;
        m.type = Type::scattering;
        m.reflection_magnitude = s_pp_magnitude;
        m.efficiency = efficiency;
        return m;
    }
};

// |L_p|^2 per model type: the radiation resistance, the radiation
// conductance, or (1 - |S_pp|^2) C.
inline double port_norm(const PortNormModel& model) {
    switch (model.type) {
        case PortNormModel::Type::thevenin:
            if (!(model.radiation_resistance > 0.0))
                throw std::invalid_argument("port_norm: radiation resistance must be positive");
            return model.radiation_resistance;
        case PortNormModel::Type::norton:
            if (!(model.radiation_conductance > 0.0))
                throw std::invalid_argument("port_norm: radiation conductance must be positive");
            return model.radiation_conductance;
        case PortNormModel::Type::scattering: {
            const double mag = model.reflection_magnitude;
            if (!(mag >= 0.0 && mag <= 1.0))
                throw std::invalid_argument("port_norm: |S_pp| must lie in [0, 1]");
            if (!(model.efficiency > 0.0 && model.efficiency <= 1.0))
                throw std::invalid_argument("port_norm: efficiency must lie in (0, 1]");
            return (1.0 - mag * mag) * model.efficiency;
        }
    }
    throw std::invalid_argument("port_norm: unknown model type");
}

// rho_hat = sqrt(var(S_12)) under the reference-setup assumption of perfectly
// adapted lossless antennas (|L_1| = |L_2| = 1). The raw estimate absorbs the
// unknown 1/N factor; multiply by sqrt(N) when the wave-space dimension is
// known.
inline double estimate_rho(std::span<const Complex> reference_s12_samples) {
    if (reference_s12_samples.size() < 2)
        throw std::invalid_argument("estimate_rho: need at least 2 samples");
    return std::sqrt(complex_variance(reference_s12_samples));
}

// Predicted cross-coupling variance sqrt(var(S_pp) var(S_qq)) / 2.
inline double predict_cross_variance(double var_pp, double var_qq) {
    if (var_pp < 0.0 || var_qq < 0.0)
        throw std::domain_error("predict_cross_variance: variances must be nonnegative");
    return 0.5 * std::sqrt(var_pp * var_qq);
}

struct CouplingEstimate {
    double rho_hat = 0.0;
    double rho_hat_halfwidth = 0.0;  // ~95% jackknife half-width
    double predicted_var_pq = 0.0;
    double empirical_var_pq = 0.0;
    double relative_residual = 0.0;
};

// Full estimate from per-stir-state samples of S_pp, S_qq and S_pq. The
// half-width comes from the delete-one jackknife on var(S_pq), propagated
// through the square root.
inline CouplingEstimate estimate_coupling(std::span<const Complex> s_pp,
                                          std::span<const Complex> s_qq,
                                          std::span<const Complex> s_pq) {
    if (s_pq.size() < 2) throw std::invalid_argument("estimate_coupling: need at least 2 samples");
    CouplingEstimate est;
    est.empirical_var_pq = complex_variance(s_pq);
    est.rho_hat = std::sqrt(est.empirical_var_pq);
    if (s_pq.size() >= 3 && est.rho_hat > 0.0) {
        const double se = jackknife_variance_se(s_pq);
        est.rho_hat_halfwidth = 1.96 * se / (2.0 * est.rho_hat);
    }
    est.predicted_var_pq = predict_cross_variance(complex_variance(s_pp), complex_variance(s_qq));
    est.relative_residual = est.empirical_var_pq > 0.0
                                ? std::abs(est.empirical_var_pq - est.predicted_var_pq) /
                                      est.empirical_var_pq
                                : 0.0;
    return est;
}

}  // namespace isoscatter
