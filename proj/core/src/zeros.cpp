#include "delayvib/zeros.hpp"

#include "delayvib/errors.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace delayvib {

namespace {

constexpr double kSingularRcond = 1e-15;

int line_length(const GainDims& dims, DependentOrientation orientation) {
    return orientation == DependentOrientation::Row ? dims.cols() : dims.rows();
}

int line_count(const GainDims& dims, DependentOrientation orientation) {
    return orientation == DependentOrientation::Row ? dims.rows() : dims.cols();
}

GainIndex entry_on_line(DependentOrientation orientation, int line, int position) {
    return orientation == DependentOrientation::Row ? GainIndex{line, position} : GainIndex{position, line};
}

Eigen::PartialPivLU<Eigen::MatrixXcd> factor_R(const Eigen::MatrixXcd& R, double omega) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(R);
    if (!(lu.rcond() > kSingularRcond)) {
        throw RSingular("bordered matrix R is singular at omega = " + std::to_string(omega));
    }
    return lu;
}

Eigen::MatrixXcd padded(const Eigen::MatrixXd& block, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows, cols);
    out.topLeftCorner(block.rows(), block.cols()) = block.cast<Complex>();
    return out;
}

// Columns of the 2m x (line length) matrix of z values for every entry of a line.
Eigen::MatrixXd line_scores(const DdaeSystem& sys, const GainPartition& probe, const GainMatrix& free_gain,
                            const std::vector<double>& omegas) {
    const int m = static_cast<int>(omegas.size());
    Eigen::MatrixXd scores(2 * m, probe.dependent_count());
    for (int k = 0; k < m; ++k) {
        const Eigen::VectorXcd z = eval_z(sys, probe, free_gain, omegas[k]);
        scores.row(2 * k) = z.real().transpose();
        scores.row(2 * k + 1) = z.imag().transpose();
    }
    return scores;
}

GainPartition make_partition(const DdaeSystem& sys, DependentOrientation orientation, int line,
                             std::vector<int> indices) {
    GainPartition part;
    part.dims = sys.dims;
    part.orientation = orientation;
    part.line = line;
    part.dependent = std::move(indices);
    const int count = part.dependent_count();
    part.b_dep.resize(sys.dim, count);
    part.c_dep.resize(count, sys.dim);
    for (int l = 0; l < count; ++l) {
        const GainIndex e = part.dependent_entry(l);
        part.b_dep.col(l) = sys.B1.col(e.row);
        part.c_dep.row(l) = sys.C1.row(e.col);
    }
    return part;
}

} // namespace

GainIndex GainPartition::dependent_entry(int l) const {
    return entry_on_line(orientation, line, dependent.at(static_cast<std::size_t>(l)));
}

bool GainPartition::is_dependent(int row, int col) const {
    const int on_line = orientation == DependentOrientation::Row ? row : col;
    const int position = orientation == DependentOrientation::Row ? col : row;
    return on_line == line && std::find(dependent.begin(), dependent.end(), position) != dependent.end();
}

std::vector<GainIndex> GainPartition::free_entries() const {
    std::vector<GainIndex> entries;
    entries.reserve(static_cast<std::size_t>(free_count()));
    for (int i = 0; i < dims.rows(); ++i) {
        for (int j = 0; j < dims.cols(); ++j) {
            if (!is_dependent(i, j)) {
                entries.push_back({i, j});
            }
        }
    }
    return entries;
}

Eigen::VectorXd GainPartition::pack(const GainMatrix& free_gain) const {
    const auto entries = free_entries();
    Eigen::VectorXd values(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t q = 0; q < entries.size(); ++q) {
        values(static_cast<Eigen::Index>(q)) = free_gain.K(entries[q].row, entries[q].col);
    }
    return values;
}

GainMatrix GainPartition::unpack(const Eigen::VectorXd& free_values) const {
    const auto entries = free_entries();
    if (free_values.size() != static_cast<Eigen::Index>(entries.size())) {
        throw InvalidArgument("free parameter vector has the wrong length");
    }
    GainMatrix gain = GainMatrix::zero(dims);
    for (std::size_t q = 0; q < entries.size(); ++q) {
        gain.K(entries[q].row, entries[q].col) = free_values(static_cast<Eigen::Index>(q));
    }
    return gain;
}

GainMatrix GainPartition::free_part(const GainMatrix& gain) const {
    GainMatrix out = gain;
    for (int l = 0; l < dependent_count(); ++l) {
        const GainIndex e = dependent_entry(l);
        out.K(e.row, e.col) = 0.0;
    }
    return out;
}

Eigen::VectorXd GainPartition::dependent_part(const GainMatrix& gain) const {
    Eigen::VectorXd g(dependent_count());
    for (int l = 0; l < dependent_count(); ++l) {
        const GainIndex e = dependent_entry(l);
        g(l) = gain.K(e.row, e.col);
    }
    return g;
}

Eigen::MatrixXcd build_R(const DdaeSystem& sys, const Eigen::MatrixXd& free_gain, double omega) {
    const int n = sys.dim;
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(n + 1, n + 1);
    R.topLeftCorner(n, n) = characteristic_matrix(sys, free_gain, Complex(0.0, omega));
    R.topRightCorner(n, 1) = -sys.B2.cast<Complex>();
    R.bottomLeftCorner(1, n) = sys.C2.cast<Complex>();
    return R;
}

Complex constraint_residual(const DdaeSystem& sys, const GainMatrix& gain, double omega,
                            const GainPartition& partition) {
    gain.validate();
    const Complex h = build_R(sys, gain.K, omega).partialPivLu().determinant();
    const Complex reference = build_R(sys, partition.free_part(gain).K, omega).partialPivLu().determinant();
    return h / std::abs(reference);
}

Complex constraint_residual(const DdaeSystem& sys, const GainMatrix& gain, double omega) {
    gain.validate();
    const Complex h = build_R(sys, gain.K, omega).partialPivLu().determinant();
    const Eigen::MatrixXd open_loop = Eigen::MatrixXd::Zero(gain.K.rows(), gain.K.cols());
    const Complex reference = build_R(sys, open_loop, omega).partialPivLu().determinant();
    return h / std::abs(reference);
}

Complex transfer_value(const DdaeSystem& sys, const GainMatrix& gain, Complex s) {
    gain.validate();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(characteristic_matrix(sys, gain.K, s));
    if (!(lu.rcond() > kSingularRcond)) {
        throw SingularAtS("M(s) is singular: s is a characteristic root");
    }
    const Eigen::VectorXcd x = lu.solve(sys.B2.cast<Complex>());
    return (sys.C2.cast<Complex>() * x)(0, 0);
}

GainPartition select_dependent_params(const DdaeSystem& sys, const std::vector<double>& omegas,
                                      const DependentSelection& selection) {
    const int m = static_cast<int>(omegas.size());
    if (m < 1) {
        throw InvalidArgument("at least one target frequency is required");
    }
    const auto orientation = selection.orientation;
    const int length = line_length(sys.dims, orientation);
    if (length < 2 * m) {
        throw InsufficientParameters("only " + std::to_string(length) + " gains available along the "
                                     "dependent line, but " + std::to_string(2 * m) +
                                     " are needed to place " + std::to_string(m) + " zero pairs");
    }
    const int line = selection.line.value_or(line_count(sys.dims, orientation) - 1);
    if (line < 0 || line >= line_count(sys.dims, orientation)) {
        throw InvalidArgument("dependent line index out of range");
    }

    if (selection.indices) {
        std::vector<int> indices = *selection.indices;
        std::sort(indices.begin(), indices.end());
        const bool distinct = std::adjacent_find(indices.begin(), indices.end()) == indices.end();
        if (static_cast<int>(indices.size()) != 2 * m || !distinct || indices.front() < 0 ||
            indices.back() >= length) {
            throw InvalidArgument("fixed dependent indices must be 2m distinct positions on the line");
        }
        return make_partition(sys, orientation, line, std::move(indices));
    }

    std::vector<int> all(static_cast<std::size_t>(length));
    for (int j = 0; j < length; ++j) {
        all[static_cast<std::size_t>(j)] = j;
    }
    const GainPartition probe = make_partition(sys, orientation, line, all);
    GainMatrix start = GainMatrix::zero(sys.dims);
    if (selection.initial_free_gain) {
        start.K = *selection.initial_free_gain;
        start.validate();
    }
    const Eigen::MatrixXd scores = line_scores(sys, probe, start, omegas);

    // Greedy column subset selection maximizing the smallest singular value.
    std::vector<int> chosen;
    for (int step = 0; step < 2 * m; ++step) {
        int best = -1;
        double best_score = -1.0;
        for (int j = 0; j < length; ++j) {
            if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) {
                continue;
            }
            Eigen::MatrixXd sub(2 * m, step + 1);
            for (int c = 0; c < step; ++c) {
                sub.col(c) = scores.col(chosen[static_cast<std::size_t>(c)]);
            }
            sub.col(step) = scores.col(j);
            const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(sub).singularValues();
            const double score = sv(sv.size() - 1);
            if (score > best_score) {
                best_score = score;
                best = j;
            }
        }
        chosen.push_back(best);
    }
    std::sort(chosen.begin(), chosen.end());
    return make_partition(sys, orientation, line, std::move(chosen));
}

Eigen::VectorXcd eval_z(const DdaeSystem& sys, const GainPartition& partition, const GainMatrix& free_gain,
                        double omega) {
    const int n = sys.dim;
    const auto lu = factor_R(build_R(sys, free_gain.K, omega), omega);
    const Eigen::MatrixXcd X = lu.solve(padded(partition.b_dep, n + 1, partition.dependent_count()));
    const Eigen::MatrixXcd C = partition.c_dep.cast<Complex>();
    Eigen::VectorXcd z(partition.dependent_count());
    for (int l = 0; l < partition.dependent_count(); ++l) {
        z(l) = (C.row(l) * X.col(l).head(n))(0, 0);
    }
    return z;
}

EliminationSystem build_elimination(const DdaeSystem& sys, const GainPartition& partition,
                                    const GainMatrix& free_gain, const std::vector<double>& omegas) {
    const int m = static_cast<int>(omegas.size());
    if (partition.dependent_count() != 2 * m) {
        throw InvalidArgument("partition must hold exactly 2m dependent gains");
    }
    EliminationSystem es;
    es.P.resize(2 * m, 2 * m);
    es.Q = Eigen::VectorXd::Zero(2 * m);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXcd z = eval_z(sys, partition, free_gain, omegas[k]);
        es.P.row(2 * k) = z.real().transpose();
        es.P.row(2 * k + 1) = z.imag().transpose();
        es.Q(2 * k) = 1.0;
        es.z.push_back(std::move(z));
    }
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(es.P).singularValues();
    const double smallest = sv(sv.size() - 1);
    es.condition = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
    return es;
}

Eigen::VectorXd solve_dependent_gains(const DdaeSystem& sys, const GainPartition& partition,
                                      const GainMatrix& free_gain, const std::vector<double>& omegas,
                                      double max_condition) {
    const EliminationSystem es = build_elimination(sys, partition, free_gain, omegas);
    if (!es.P.allFinite() || !std::isfinite(es.condition)) {
        throw PSingular("elimination matrix P is singular");
    }
    if (es.condition > max_condition) {
        throw PIllConditioned("elimination matrix P is ill-conditioned (cond = " +
                                  std::to_string(es.condition) + ")",
                              es.condition);
    }
    Eigen::VectorXd g = es.P.fullPivLu().solve(es.Q);
    // One step of iterative refinement.
    g += es.P.fullPivLu().solve(es.Q - es.P * g);
    return g;
}

GainMatrix compose_full_gain(const GainPartition& partition, const GainMatrix& free_gain,
                             const Eigen::VectorXd& dependent_gains) {
    free_gain.validate();
    if (!(free_gain.dims == partition.dims) || dependent_gains.size() != partition.dependent_count()) {
        throw InvalidArgument("compose_full_gain: inconsistent shapes");
    }
    GainMatrix gain = free_gain;
    for (int l = 0; l < partition.dependent_count(); ++l) {
        const GainIndex e = partition.dependent_entry(l);
        gain.K(e.row, e.col) += dependent_gains(l);
    }
    return gain;
}

Eigen::MatrixXcd dependent_gain_sensitivity(const DdaeSystem& sys, const GainPartition& partition,
                                            const GainMatrix& free_gain, const std::vector<double>& omegas,
                                            const Eigen::VectorXd& dependent_gains,
                                            const Eigen::VectorXcd& weights) {
    const int n = sys.dim;
    const int m = static_cast<int>(omegas.size());
    const int count = partition.dependent_count();
    const EliminationSystem es = build_elimination(sys, partition, free_gain, omegas);

    // mu = P^{-T} w
    const Eigen::VectorXcd mu = es.P.transpose().cast<Complex>().fullPivLu().solve(weights);

    const Eigen::MatrixXcd B1 = sys.B1.cast<Complex>();
    const Eigen::MatrixXcd C1 = sys.C1.cast<Complex>();
    const Eigen::VectorXcd g = dependent_gains.cast<Complex>();

    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(sys.dims.rows(), sys.dims.cols());
    for (int k = 0; k < m; ++k) {
        const Eigen::MatrixXcd R = build_R(sys, free_gain.K, omegas[k]);
        const auto lu = factor_R(R, omegas[k]);
        const Eigen::PartialPivLU<Eigen::MatrixXcd> lu_t(R.transpose());
        // Right solves R X = [b; 0]; left solves R^T Y = [c^T; 0].
        const Eigen::MatrixXcd X = lu.solve(padded(partition.b_dep, n + 1, count)).topRows(n);
        const Eigen::MatrixXcd Y =
            lu_t.solve(padded(partition.c_dep.transpose(), n + 1, count)).topRows(n);

        // dz_l / dK(i, j) = (c_l R^-1 B1)_i (C1 R^-1 b_l)_j
        const Eigen::MatrixXcd left = Y.transpose() * B1;  // count x rows
        const Eigen::MatrixXcd right = C1 * X;             // cols x count
        const Eigen::MatrixXcd T = left.transpose() * g.asDiagonal() * right.transpose();

        S -= mu(2 * k) * T.real().cast<Complex>() + mu(2 * k + 1) * T.imag().cast<Complex>();
    }
    for (int l = 0; l < count; ++l) {
        const GainIndex e = partition.dependent_entry(l);
        S(e.row, e.col) = 0.0;
    }
    return S;
}

} // namespace delayvib
