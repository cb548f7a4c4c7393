#include "delayvib/errors.hpp"
#include "delayvib/spectrum.hpp"
#include "delayvib/zeros.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace delayvib {

namespace {

// Left/right null vectors of M(lambda): v has unit norm and u is rotated so
// that u^H M'(lambda) v is real and positive.
struct NullPair {
    Eigen::VectorXcd u;
    Eigen::VectorXcd v;
    Complex denominator;
};

NullPair null_vectors(const DdaeSystem& sys, const Eigen::MatrixXd& K, Complex lambda) {
    const Eigen::MatrixXcd M = characteristic_matrix(sys, K, lambda);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Index last = M.rows() - 1;
    NullPair pair;
    pair.v = svd.matrixV().col(last);
    pair.u = svd.matrixU().col(last);
    const Complex den = pair.u.dot(characteristic_matrix_derivative(sys, lambda) * pair.v);
    if (std::abs(den) == 0.0) {
        throw NonSmoothPoint("root is not simple: u^H M'(lambda) v vanishes");
    }
    pair.u *= std::polar(1.0, std::arg(den));
    pair.denominator = std::abs(den);
    return pair;
}

} // namespace

Eigen::MatrixXd root_real_part_gradient(const DdaeSystem& sys, const Eigen::MatrixXd& K, Complex lambda) {
    const NullPair np = null_vectors(sys, K, lambda);
    const Eigen::RowVectorXcd uB = np.u.adjoint() * sys.B1.cast<Complex>();
    const Eigen::VectorXcd Cv = sys.C1.cast<Complex>() * np.v;
    // M_p = -B1 dK C1, so d lambda = u^H B1 dK C1 v / u^H M' v.
    return ((uB.transpose() * Cv.transpose()) / np.denominator).real();
}

Eigen::VectorXd root_gradient_free(const DdaeSystem& sys, const GainMatrix& free_gain,
                                   const GainPartition& partition, const std::vector<double>& omegas,
                                   Complex lambda) {
    const Eigen::VectorXd g = solve_dependent_gains(sys, partition, free_gain, omegas);
    const GainMatrix gain = compose_full_gain(partition, free_gain, g);
    const NullPair np = null_vectors(sys, gain.K, lambda);

    const Eigen::RowVectorXcd uB = np.u.adjoint() * sys.B1.cast<Complex>();
    const Eigen::VectorXcd Cv = sys.C1.cast<Complex>() * np.v;
    Eigen::MatrixXcd numerator = uB.transpose() * Cv.transpose();

    // Dependent gains enter M through b_l g_l c_l.
    Eigen::VectorXcd weights(partition.dependent_count());
    for (int l = 0; l < partition.dependent_count(); ++l) {
        const Complex ub = np.u.dot(partition.b_dep.col(l).cast<Complex>());
        const Complex cv = (partition.c_dep.row(l).cast<Complex>() * np.v)(0, 0);
        weights(l) = ub * cv;
    }
    numerator += dependent_gain_sensitivity(sys, partition, free_gain, omegas, g, weights);

    const Eigen::MatrixXd full = (numerator / np.denominator).real();
    const auto entries = partition.free_entries();
    Eigen::VectorXd grad(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t q = 0; q < entries.size(); ++q) {
        grad(static_cast<Eigen::Index>(q)) = full(entries[q].row, entries[q].col);
    }
    return grad;
}

Eigen::VectorXd abscissa_gradient(const DdaeSystem& sys, const GainMatrix& free_gain,
                                  const GainPartition& partition, const std::vector<double>& omegas,
                                  const Spectrum& spectrum, double tie_tol) {
    const AbscissaInfo info = spectral_abscissa(spectrum, tie_tol);
    if (info.near_tie) {
        throw NonSmoothPoint("rightmost characteristic root is not unique");
    }
    return root_gradient_free(sys, free_gain, partition, omegas, spectrum.roots[info.rightmost].value);
}

} // namespace delayvib
