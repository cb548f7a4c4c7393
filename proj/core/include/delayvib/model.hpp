#pragma once

#include <Eigen/Dense>

#include <vector>

namespace delayvib {

// Physical parameters of the four-mass rig: absorber mass m_a coupled to the
// actuated mass m_0, which carries the target m_1 and the excited mass m_2.
// SI units throughout.
struct PlantParams {
    double m_a = 0.0, m_0 = 0.0, m_1 = 0.0, m_2 = 0.0;
    double k_a = 0.0, k_0 = 0.0, k_1 = 0.0, k_2 = 0.0, k_3 = 0.0, k_4 = 0.0;
    double c_a = 0.0, c_0 = 0.0, c_1 = 0.0, c_2 = 0.0, c_3 = 0.0, c_4 = 0.0;
    double tau_u = 0.0;

    // Measured laboratory values (input delay 2 ms).
    static PlantParams laboratory_rig();

    // Throws InvalidArgument naming the offending field.
    void validate() const;
};

// x' = A x + B1 u(t - tau_u) + B2 f_d,  y = C1 x,  z = C2 x
struct PlantModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B1;
    Eigen::MatrixXd B2;
    Eigen::MatrixXd C1;
    Eigen::MatrixXd C2;
    double tau_u = 0.0;

    int states() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(B1.cols()); }
    int outputs() const { return static_cast<int>(C1.rows()); }

    void validate() const;
};

// f_d(t) = sum_k F_d cos(2 pi f_k t + phi_k)
struct DisturbanceSpec {
    double amplitude = 0.0;
    std::vector<double> frequencies_hz;
    std::vector<double> phases; // empty means all zero

    int harmonics() const { return static_cast<int>(frequencies_hz.size()); }
    std::vector<double> angular_frequencies() const;
    double phase(int k) const;
    double force(double t) const;

    void validate() const;
};

struct FeedbackConfig {
    std::vector<double> delays; // tau_1 < ... < tau_N
    int controller_order = 0;

    int delay_count() const { return static_cast<int>(delays.size()); }
    void validate() const;
};

// Shape bookkeeping for the gain K of the static-feedback form u~ = K y~.
struct GainDims {
    int n_c = 0;
    int n_u = 0;
    int n_y = 0;
    int n_delays = 0;

    int rows() const { return n_c + n_u; }
    int cols() const { return n_c + n_y * n_delays; }
    int parameter_count() const { return rows() * cols(); }

    bool operator==(const GainDims&) const = default;
};

struct GainMatrix {
    Eigen::MatrixXd K;
    GainDims dims;

    static GainMatrix zero(const GainDims& dims);
    void validate() const;
};

// Blocks of K = [A_c B_c; C_c D_c].
struct ControllerRealization {
    Eigen::MatrixXd A_c;
    Eigen::MatrixXd B_c;
    Eigen::MatrixXd C_c;
    Eigen::MatrixXd D_c;
};

struct DelayTerm {
    double delay = 0.0;
    Eigen::MatrixXd matrix;
};

// Offsets of the x, zeta_u, x_c and zeta_y blocks inside the augmented state.
struct BlockIndex {
    int x = 0;
    int zeta_u = 0;
    int x_c = 0;
    int zeta_y = 0;
};

// E x~' = A0 x~ + sum_j A_j x~(t - h_j) + B2 w + B1 u~,  y~ = C1 x~,  z = C2 x~
//
// delay_terms[0] is the input-delay term (tau_u); delay_terms[i] for
// i = 1..N carries the i-th output delay.
struct DdaeSystem {
    int dim = 0;
    Eigen::MatrixXd E;
    Eigen::MatrixXd A0;
    std::vector<DelayTerm> delay_terms;
    Eigen::MatrixXd B1;
    Eigen::MatrixXd B2;
    Eigen::MatrixXd C1;
    Eigen::MatrixXd C2;
    BlockIndex index;
    GainDims dims;
    int plant_states = 0;

    double max_delay() const;
};

PlantModel build_plant(const PlantParams& params);

DdaeSystem assemble_ddae(const PlantModel& plant, const FeedbackConfig& feedback);

ControllerRealization realize_controller(const GainMatrix& gain);
GainMatrix embed_controller(const ControllerRealization& realization, const GainDims& dims);

// Order n_c -> n_c + 1: zero row/column for the new controller state, which is
// given the decoupled dynamics x_new' = new_pole * x_new.
GainMatrix extend_controller_order(const GainMatrix& gain, double new_pole = -1.0);

} // namespace delayvib
