#pragma once

#include "delayvib/model.hpp"
#include "delayvib/spectrum.hpp"
#include "delayvib/zeros.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace delayvib::testing_support {

inline PlantModel rig_plant() { return build_plant(PlantParams::laboratory_rig()); }

inline std::vector<double> rig_delays() { return {0.05, 0.1, 0.15, 0.2}; }

inline DisturbanceSpec rig_disturbance() {
    DisturbanceSpec d;
    d.amplitude = 3.0;
    d.frequencies_hz = {4.0, 8.0, 12.0, 16.0};
    return d;
}

inline std::vector<double> rig_omegas() { return rig_disturbance().angular_frequencies(); }

inline DdaeSystem rig_system(int n_c = 0) { return assemble_ddae(rig_plant(), FeedbackConfig{rig_delays(), n_c}); }

// Position feedbacks free, velocity feedbacks dependent, on the actuator row.
inline GainPartition rig_velocity_partition(const DdaeSystem& sys) {
    DependentSelection sel;
    sel.indices = std::vector<int>{1, 3, 5, 7, 9, 11, 13, 15};
    return select_dependent_params(sys, rig_omegas(), sel);
}

// A well-optimized static (n_c = 0) design found with an independent prototype;
// free values on the position feedbacks of rig_velocity_partition.
inline Eigen::VectorXd rig_reference_free_gains() {
    Eigen::VectorXd v(8);
    v << 1234.50762, 1471.27096, 8090.49698, 6493.19132, -5682.44361, -2873.88822, -7828.09386, -4685.53776;
    return v;
}

// Scalar plant x' = u, y = x, z = x with no input delay.
inline PlantModel scalar_plant(double a = 0.0) {
    PlantModel p;
    p.A = Eigen::MatrixXd::Constant(1, 1, a);
    p.B1 = Eigen::MatrixXd::Ones(1, 1);
    p.B2 = Eigen::MatrixXd::Ones(1, 1);
    p.C1 = Eigen::MatrixXd::Ones(1, 1);
    p.C2 = Eigen::MatrixXd::Ones(1, 1);
    p.tau_u = 0.0;
    return p;
}

// Newton on lambda + exp(-lambda) = 0 started near the principal branch.
inline std::complex<double> scalar_dde_root(std::complex<double> guess = {-0.3, 1.3}) {
    std::complex<double> l = guess;
    for (int i = 0; i < 100; ++i) {
        const auto f = l + std::exp(-l);
        const auto df = 1.0 - std::exp(-l);
        const auto step = f / df;
        l -= step;
        if (std::abs(step) < 1e-16) {
            break;
        }
    }
    return l;
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = dist(rng);
    }
    return v;
}

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = dist(rng);
        }
    }
    return m;
}

} // namespace delayvib::testing_support
