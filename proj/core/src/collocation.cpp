#include "delayvib/spectrum.hpp"

#include "delayvib/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <vector>

namespace delayvib {

namespace {

Eigen::VectorXcd dense_eigenvalues(const Eigen::MatrixXd& A) {
    if (A.rows() == 0) {
        return {};
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(A, false);
    if (solver.info() != Eigen::Success) {
        throw DiscretizationTooCoarse("dense eigenvalue solver did not converge");
    }
    return solver.eigenvalues();
}

// Chebyshev extrema x_i = cos(i pi / N) and the differentiation matrix on [-1, 1].
void chebyshev(int N, Eigen::VectorXd& x, Eigen::MatrixXd& D) {
    x.resize(N + 1);
    for (int i = 0; i <= N; ++i) {
        x(i) = std::cos(std::numbers::pi * i / N);
    }
    Eigen::VectorXd c = Eigen::VectorXd::Ones(N + 1);
    c(0) = 2.0;
    c(N) = 2.0;
    for (int i = 1; i <= N; i += 2) {
        c(i) = -c(i);
    }
    D = Eigen::MatrixXd::Zero(N + 1, N + 1);
    for (int i = 0; i <= N; ++i) {
        for (int j = 0; j <= N; ++j) {
            if (i != j) {
                D(i, j) = (c(i) / c(j)) / (x(i) - x(j));
            }
        }
    }
    for (int i = 0; i <= N; ++i) {
        D(i, i) = -D.row(i).sum();
    }
}

// Lagrange basis at t for the Chebyshev extrema, barycentric form.
Eigen::VectorXd lagrange_basis(const Eigen::VectorXd& nodes, double t) {
    const Eigen::Index n = nodes.size();
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(t - nodes(i)) <= 1e-14 * std::max(1.0, std::abs(t))) {
            ell(i) = 1.0;
            return ell;
        }
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double w = (i % 2 == 0) ? 1.0 : -1.0;
        if (i == 0 || i == n - 1) {
            w *= 0.5;
        }
        ell(i) = w / (t - nodes(i));
        total += ell(i);
    }
    return ell / total;
}

} // namespace

Eigen::VectorXcd collocation_eigenvalues(const RetardedSystem& sys, int grid_points) {
    const int n = sys.dim;
    const double h_max = sys.max_delay();

    Eigen::MatrixXd undelayed = Eigen::MatrixXd::Zero(n, n);
    std::vector<const DelayTerm*> delayed;
    for (const auto& term : sys.terms) {
        if (term.delay == 0.0) {
            undelayed += term.matrix;
        } else {
            delayed.push_back(&term);
        }
    }
    if (delayed.empty()) {
        return dense_eigenvalues(undelayed);
    }
    if (grid_points < 2) {
        throw InvalidArgument("collocation needs at least 2 grid intervals");
    }

    // Only state components that enter some delayed term need a history.
    std::vector<int> support;
    for (int j = 0; j < n; ++j) {
        for (const DelayTerm* term : delayed) {
            if (!term->matrix.col(j).isZero(0.0)) {
                support.push_back(j);
                break;
            }
        }
    }
    const int p = static_cast<int>(support.size());
    const int N = grid_points;

    Eigen::VectorXd x;
    Eigen::MatrixXd D;
    chebyshev(N, x, D);
    D *= 2.0 / h_max;
    const Eigen::VectorXd theta = 0.5 * h_max * (x.array() - 1.0);

    // Unknowns: xi(0) (n entries), then w(theta_i) for i = 1..N (p entries each),
    // with w(0) = F xi(0) and F selecting `support`.
    const int dim = n + N * p;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim, dim);
    G.topLeftCorner(n, n) = undelayed;

    for (const DelayTerm* term : delayed) {
        const Eigen::VectorXd ell = lagrange_basis(theta, -term->delay);
        for (int s = 0; s < p; ++s) {
            const Eigen::VectorXd column = term->matrix.col(support[s]);
            G.col(support[s]).head(n) += ell(0) * column;
            for (int i = 1; i <= N; ++i) {
                if (ell(i) != 0.0) {
                    G.col(n + (i - 1) * p + s).head(n) += ell(i) * column;
                }
            }
        }
    }

    for (int i = 1; i <= N; ++i) {
        const int row = n + (i - 1) * p;
        for (int s = 0; s < p; ++s) {
            G(row + s, support[s]) += D(i, 0);
            for (int k = 1; k <= N; ++k) {
                G(row + s, n + (k - 1) * p + s) += D(i, k);
            }
        }
    }
    return dense_eigenvalues(G);
}

} // namespace delayvib
