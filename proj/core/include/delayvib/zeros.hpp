#pragma once

#include "delayvib/model.hpp"
#include "delayvib/spectrum.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace delayvib {

enum class DependentOrientation { Row, Column };

struct GainIndex {
    int row = 0;
    int col = 0;
    bool operator==(const GainIndex&) const = default;
};

// Split K = K_L + (g placed at the dependent entries). All dependent entries
// share one row (or one column) of K, so their contribution to B1 K C1 is the
// rank-one term b g^T C_g (resp. B_g g c^T).
struct GainPartition {
    GainDims dims;
    DependentOrientation orientation = DependentOrientation::Row;
    int line = 0;               // the shared row (or column) index
    std::vector<int> dependent; // column (or row) indices along that line, 2m entries
    Eigen::MatrixXd b_dep;      // dim x 2m; B1 column feeding each dependent gain
    Eigen::MatrixXd c_dep;      // 2m x dim; C1 row read by each dependent gain

    int dependent_count() const { return static_cast<int>(dependent.size()); }
    int free_count() const { return dims.parameter_count() - dependent_count(); }

    GainIndex dependent_entry(int l) const;
    bool is_dependent(int row, int col) const;
    // Row-major order of the free entries.
    std::vector<GainIndex> free_entries() const;

    Eigen::VectorXd pack(const GainMatrix& free_gain) const;
    GainMatrix unpack(const Eigen::VectorXd& free_values) const;
    // Copy of K with the dependent entries zeroed.
    GainMatrix free_part(const GainMatrix& gain) const;
    Eigen::VectorXd dependent_part(const GainMatrix& gain) const;
};

struct EliminationSystem {
    Eigen::MatrixXd P;          // rows interleave Re/Im of z(omega_k)
    Eigen::VectorXd Q;          // (1, 0, 1, 0, ...)
    double condition = 0.0;     // 2-norm condition number of P
    std::vector<Eigen::VectorXcd> z;
};

// [j w E - A0 - sum A_j e^{-j w h_j} - B1 K_L C1,  -B2;  C2,  0]
Eigen::MatrixXcd build_R(const DdaeSystem& sys, const Eigen::MatrixXd& free_gain, double omega);

// Bordered determinant of the zero condition at j*omega for the full gain K,
// divided by |det R(omega, K_L)| where K_L is K with the dependent entries of
// `partition` zeroed. Computed by direct LU determinants.
Complex constraint_residual(const DdaeSystem& sys, const GainMatrix& gain, double omega,
                            const GainPartition& partition);

// Same determinant scaled by |det R(omega, 0)| (open-loop border).
Complex constraint_residual(const DdaeSystem& sys, const GainMatrix& gain, double omega);

// G(s) = C2 M(s)^{-1} B2
Complex transfer_value(const DdaeSystem& sys, const GainMatrix& gain, Complex s);

struct DependentSelection {
    DependentOrientation orientation = DependentOrientation::Row;
    // Defaults to the actuator row (last row) or the last column.
    std::optional<int> line;
    // Fix the dependent indices instead of choosing them greedily.
    std::optional<std::vector<int>> indices;
    // K_L at which the conditioning score is evaluated (default: zero).
    std::optional<Eigen::MatrixXd> initial_free_gain;
};

GainPartition select_dependent_params(const DdaeSystem& sys, const std::vector<double>& omegas,
                                      const DependentSelection& selection = {});

// z = [C_g 0] R^{-1} [b; 0], one entry per dependent gain.
Eigen::VectorXcd eval_z(const DdaeSystem& sys, const GainPartition& partition,
                        const GainMatrix& free_gain, double omega);

EliminationSystem build_elimination(const DdaeSystem& sys, const GainPartition& partition,
                                    const GainMatrix& free_gain, const std::vector<double>& omegas);

constexpr double kDefaultMaxCondition = 1e10;

// g(K_L) = P(K_L)^{-1} Q. Throws PSingular / PIllConditioned / RSingular.
Eigen::VectorXd solve_dependent_gains(const DdaeSystem& sys, const GainPartition& partition,
                                      const GainMatrix& free_gain, const std::vector<double>& omegas,
                                      double max_condition = kDefaultMaxCondition);

GainMatrix compose_full_gain(const GainPartition& partition, const GainMatrix& free_gain,
                             const Eigen::VectorXd& dependent_gains);

// For a weight vector w over the dependent gains, the K-shaped matrix whose
// (i, j) entry is sum_l w_l * d g_l / d K_L(i, j). Dependent positions are 0.
Eigen::MatrixXcd dependent_gain_sensitivity(const DdaeSystem& sys, const GainPartition& partition,
                                            const GainMatrix& free_gain,
                                            const std::vector<double>& omegas,
                                            const Eigen::VectorXd& dependent_gains,
                                            const Eigen::VectorXcd& weights);

} // namespace delayvib
