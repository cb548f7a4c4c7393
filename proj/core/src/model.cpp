#include "delayvib/model.hpp"

#include "delayvib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace delayvib {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw InvalidArgument(message);
    }
}

void require_positive(double value, const char* name) {
    require(std::isfinite(value) && value > 0.0, std::string(name) + " must be > 0");
}

void require_nonnegative(double value, const char* name) {
    require(std::isfinite(value) && value >= 0.0, std::string(name) + " must be >= 0");
}

} // namespace

PlantParams PlantParams::laboratory_rig() {
    PlantParams p;
    p.m_a = 0.52;
    p.m_0 = 1.1750;
    p.m_1 = 0.5050;
    p.m_2 = 0.7290;
    p.k_a = 407.0;
    p.k_0 = 1001.0;
    p.k_1 = 749.0;
    p.k_2 = 711.0;
    p.k_3 = 950.0;
    p.k_4 = 377.0;
    p.c_a = 1.8;
    p.c_0 = 4.35;
    p.c_1 = 0.85;
    p.c_2 = 1.85;
    p.c_3 = 4.95;
    p.c_4 = 0.0;
    p.tau_u = 0.002;
    return p;
}

void PlantParams::validate() const {
    require_positive(m_a, "m_a");
    require_positive(m_0, "m_0");
    require_positive(m_1, "m_1");
    require_positive(m_2, "m_2");
    require_nonnegative(k_a, "k_a");
    require_nonnegative(k_0, "k_0");
    require_nonnegative(k_1, "k_1");
    require_nonnegative(k_2, "k_2");
    require_nonnegative(k_3, "k_3");
    require_nonnegative(k_4, "k_4");
    require_nonnegative(c_a, "c_a");
    require_nonnegative(c_0, "c_0");
    require_nonnegative(c_1, "c_1");
    require_nonnegative(c_2, "c_2");
    require_nonnegative(c_3, "c_3");
    require_nonnegative(c_4, "c_4");
    require_nonnegative(tau_u, "tau_u");
}

void PlantModel::validate() const {
    const auto n = A.rows();
    require(n > 0 && A.cols() == n, "A must be square and non-empty");
    require(B1.rows() == n && B1.cols() >= 1, "B1 must have n rows");
    require(B2.rows() == n && B2.cols() == 1, "B2 must be n x 1");
    require(C1.cols() == n && C1.rows() >= 1, "C1 must have n columns");
    require(C2.cols() == n && C2.rows() == 1, "C2 must be 1 x n");
    require(A.allFinite() && B1.allFinite() && B2.allFinite() && C1.allFinite() && C2.allFinite(),
            "plant matrices must be finite");
    require_nonnegative(tau_u, "tau_u");
}

std::vector<double> DisturbanceSpec::angular_frequencies() const {
    std::vector<double> omegas;
    omegas.reserve(frequencies_hz.size());
    for (double f : frequencies_hz) {
        omegas.push_back(2.0 * std::numbers::pi * f);
    }
    return omegas;
}

double DisturbanceSpec::phase(int k) const {
    return phases.empty() ? 0.0 : phases.at(static_cast<std::size_t>(k));
}

double DisturbanceSpec::force(double t) const {
    double f = 0.0;
    for (int k = 0; k < harmonics(); ++k) {
        f += amplitude * std::cos(2.0 * std::numbers::pi * frequencies_hz[k] * t + phase(k));
    }
    return f;
}

void DisturbanceSpec::validate() const {
    require(std::isfinite(amplitude), "F_d must be finite");
    require(!frequencies_hz.empty(), "at least one disturbance frequency is required");
    for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
        require_positive(frequencies_hz[i], "frequencies");
        for (std::size_t j = 0; j < i; ++j) {
            require(frequencies_hz[i] != frequencies_hz[j], "frequencies must be pairwise distinct");
        }
    }
    require(phases.empty() || phases.size() == frequencies_hz.size(),
            "phases must be empty or match the number of frequencies");
}

void FeedbackConfig::validate() const {
    require(!delays.empty(), "at least one feedback delay is required");
    require(controller_order >= 0, "n_c must be >= 0");
    for (std::size_t i = 0; i < delays.size(); ++i) {
        require_nonnegative(delays[i], "delays");
        if (i > 0) {
            require(delays[i] > delays[i - 1], "delays must be strictly increasing");
        }
    }
}

GainMatrix GainMatrix::zero(const GainDims& dims) {
    return GainMatrix{Eigen::MatrixXd::Zero(dims.rows(), dims.cols()), dims};
}

void GainMatrix::validate() const {
    require(dims.n_c >= 0 && dims.n_u >= 1 && dims.n_y >= 1 && dims.n_delays >= 1,
            "gain dims record is invalid");
    require(K.rows() == dims.rows() && K.cols() == dims.cols(),
            "gain matrix shape does not match its dims record");
    require(K.allFinite(), "gain matrix must be finite");
}

double DdaeSystem::max_delay() const {
    double h = 0.0;
    for (const auto& term : delay_terms) {
        h = std::max(h, term.delay);
    }
    return h;
}

PlantModel build_plant(const PlantParams& p) {
    p.validate();

    // state: [x_0, x_0', x_1, x_1', x_2, x_2', x_a, x_a']
    PlantModel plant;
    Eigen::MatrixXd& A = plant.A;
    A = Eigen::MatrixXd::Zero(8, 8);
    A(0, 1) = 1.0;
    A(1, 0) = -(p.k_0 + p.k_1 + p.k_a + p.k_4) / p.m_0;
    A(1, 1) = -(p.c_0 + p.c_1 + p.c_a + p.c_4) / p.m_0;
    A(1, 2) = p.k_1 / p.m_0;
    A(1, 3) = p.c_1 / p.m_0;
    A(1, 4) = p.k_4 / p.m_0;
    A(1, 5) = p.c_4 / p.m_0;
    A(1, 6) = p.k_a / p.m_0;
    A(1, 7) = p.c_a / p.m_0;

    A(2, 3) = 1.0;
    A(3, 0) = p.k_1 / p.m_1;
    A(3, 1) = p.c_1 / p.m_1;
    A(3, 2) = -(p.k_1 + p.k_2) / p.m_1;
    A(3, 3) = -(p.c_1 + p.c_2) / p.m_1;
    A(3, 4) = p.k_2 / p.m_1;
    A(3, 5) = p.c_2 / p.m_1;

    A(4, 5) = 1.0;
    A(5, 0) = p.k_4 / p.m_2;
    A(5, 1) = p.c_4 / p.m_2;
    A(5, 2) = p.k_2 / p.m_2;
    A(5, 3) = p.c_2 / p.m_2;
    A(5, 4) = -(p.k_2 + p.k_3 + p.k_4) / p.m_2;
    A(5, 5) = -(p.c_2 + p.c_3 + p.c_4) / p.m_2;

    A(6, 7) = 1.0;
    A(7, 0) = p.k_a / p.m_a;
    A(7, 1) = p.c_a / p.m_a;
    A(7, 6) = -p.k_a / p.m_a;
    A(7, 7) = -p.c_a / p.m_a;

    plant.B1 = Eigen::MatrixXd::Zero(8, 1);
    plant.B1(1, 0) = -1.0 / p.m_0;
    plant.B1(7, 0) = 1.0 / p.m_a;

    plant.B2 = Eigen::MatrixXd::Zero(8, 1);
    plant.B2(5, 0) = 1.0 / p.m_2;

    plant.C1 = Eigen::MatrixXd::Zero(4, 8);
    plant.C1(0, 0) = 1.0;
    plant.C1(1, 1) = 1.0;
    plant.C1(2, 6) = 1.0;
    plant.C1(3, 7) = 1.0;

    plant.C2 = Eigen::MatrixXd::Zero(1, 8);
    plant.C2(0, 2) = 1.0;

    plant.tau_u = p.tau_u;
    return plant;
}

DdaeSystem assemble_ddae(const PlantModel& plant, const FeedbackConfig& feedback) {
    plant.validate();
    feedback.validate();

    const int n = plant.states();
    const int n_u = plant.inputs();
    const int n_y = plant.outputs();
    const int n_c = feedback.controller_order;
    const int N = feedback.delay_count();

    DdaeSystem sys;
    sys.dims = GainDims{n_c, n_u, n_y, N};
    sys.plant_states = n;
    sys.index = BlockIndex{0, n, n + n_u, n + n_u + n_c};
    sys.dim = n + n_u + n_c + n_y * N;
    const auto& ix = sys.index;
    const int dim = sys.dim;

    sys.E = Eigen::MatrixXd::Zero(dim, dim);
    sys.E.block(ix.x, ix.x, n, n).setIdentity();
    sys.E.block(ix.x_c, ix.x_c, n_c, n_c).setIdentity();

    // x' = A x;  0 = -zeta_u + u;  x_c' = (from K);  0 = -zeta_y + ...
    sys.A0 = Eigen::MatrixXd::Zero(dim, dim);
    sys.A0.block(ix.x, ix.x, n, n) = plant.A;
    sys.A0.block(ix.zeta_u, ix.zeta_u, n_u, n_u) = -Eigen::MatrixXd::Identity(n_u, n_u);
    sys.A0.block(ix.zeta_y, ix.zeta_y, n_y * N, n_y * N) = -Eigen::MatrixXd::Identity(n_y * N, n_y * N);

    DelayTerm input_term{plant.tau_u, Eigen::MatrixXd::Zero(dim, dim)};
    input_term.matrix.block(ix.x, ix.zeta_u, n, n_u) = plant.B1;
    sys.delay_terms.push_back(std::move(input_term));

    for (int i = 0; i < N; ++i) {
        DelayTerm term{feedback.delays[i], Eigen::MatrixXd::Zero(dim, dim)};
        term.matrix.block(ix.zeta_y + i * n_y, ix.x, n_y, n) = plant.C1;
        sys.delay_terms.push_back(std::move(term));
    }

    // u~ = [x_c' drive; u] enters the x_c rows and the zeta_u rows.
    sys.B1 = Eigen::MatrixXd::Zero(dim, n_c + n_u);
    sys.B1.block(ix.x_c, 0, n_c, n_c).setIdentity();
    sys.B1.block(ix.zeta_u, n_c, n_u, n_u).setIdentity();

    sys.B2 = Eigen::MatrixXd::Zero(dim, 1);
    sys.B2.block(ix.x, 0, n, 1) = plant.B2;

    // y~ = [x_c; zeta_y]
    sys.C1 = Eigen::MatrixXd::Zero(n_c + n_y * N, dim);
    sys.C1.block(0, ix.x_c, n_c, n_c).setIdentity();
    sys.C1.block(n_c, ix.zeta_y, n_y * N, n_y * N).setIdentity();

    sys.C2 = Eigen::MatrixXd::Zero(1, dim);
    sys.C2.block(0, ix.x, 1, n) = plant.C2;
    return sys;
}

ControllerRealization realize_controller(const GainMatrix& gain) {
    gain.validate();
    const int n_c = gain.dims.n_c;
    const int n_u = gain.dims.n_u;
    const int n_in = gain.dims.n_y * gain.dims.n_delays;
    return ControllerRealization{
        gain.K.topLeftCorner(n_c, n_c),
        gain.K.topRightCorner(n_c, n_in),
        gain.K.bottomLeftCorner(n_u, n_c),
        gain.K.bottomRightCorner(n_u, n_in),
    };
}

GainMatrix embed_controller(const ControllerRealization& r, const GainDims& dims) {
    const int n_c = dims.n_c;
    const int n_u = dims.n_u;
    const int n_in = dims.n_y * dims.n_delays;
    require(r.A_c.rows() == n_c && r.A_c.cols() == n_c, "A_c shape mismatch");
    require(r.B_c.rows() == n_c && r.B_c.cols() == n_in, "B_c shape mismatch");
    require(r.C_c.rows() == n_u && r.C_c.cols() == n_c, "C_c shape mismatch");
    require(r.D_c.rows() == n_u && r.D_c.cols() == n_in, "D_c shape mismatch");

    GainMatrix gain = GainMatrix::zero(dims);
    gain.K.topLeftCorner(n_c, n_c) = r.A_c;
    gain.K.topRightCorner(n_c, n_in) = r.B_c;
    gain.K.bottomLeftCorner(n_u, n_c) = r.C_c;
    gain.K.bottomRightCorner(n_u, n_in) = r.D_c;
    return gain;
}

GainMatrix extend_controller_order(const GainMatrix& gain, double new_pole) {
    gain.validate();
    ControllerRealization old = realize_controller(gain);
    GainDims dims = gain.dims;
    dims.n_c += 1;
    const int n_c = dims.n_c;
    const int n_in = dims.n_y * dims.n_delays;

    ControllerRealization r;
    r.A_c = Eigen::MatrixXd::Zero(n_c, n_c);
    r.A_c.topLeftCorner(n_c - 1, n_c - 1) = old.A_c;
    r.A_c(n_c - 1, n_c - 1) = new_pole;
    r.B_c = Eigen::MatrixXd::Zero(n_c, n_in);
    r.B_c.topRows(n_c - 1) = old.B_c;
    r.C_c = Eigen::MatrixXd::Zero(dims.n_u, n_c);
    r.C_c.leftCols(n_c - 1) = old.C_c;
    r.D_c = old.D_c;
    return embed_controller(r, dims);
}

} // namespace delayvib
