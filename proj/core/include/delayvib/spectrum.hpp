#pragma once

#include "delayvib/model.hpp"

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <optional>
#include <vector>

namespace delayvib {

using Complex = std::complex<double>;

struct GainPartition;

struct CharMatrixEval {
    Complex lambda;
    Eigen::MatrixXcd M;
    double sigma_min = 0.0;
};

// M(lambda; K) = lambda E - A0 - sum_j A_j exp(-lambda h_j) - B1 K C1
Eigen::MatrixXcd characteristic_matrix(const DdaeSystem& sys, const Eigen::MatrixXd& K, Complex lambda);

// dM/dlambda = E + sum_j h_j A_j exp(-lambda h_j)
Eigen::MatrixXcd characteristic_matrix_derivative(const DdaeSystem& sys, Complex lambda);

CharMatrixEval char_matrix(const DdaeSystem& sys, const GainMatrix& gain, Complex lambda);

// xi' = sum_j A_j xi(t - h_j) on xi = [x; x_c]. Terms are sorted by delay and
// delay 0 is always the first term; equal delays are merged.
struct RetardedSystem {
    int dim = 0;
    std::vector<DelayTerm> terms;

    double max_delay() const;
    Eigen::MatrixXcd characteristic_matrix(Complex lambda) const;
    Eigen::MatrixXcd characteristic_matrix_derivative(Complex lambda) const;
};

RetardedSystem reduce_to_retarded(const DdaeSystem& sys, const GainMatrix& gain);

struct SpectrumOptions {
    // Chebyshev points on [-h_max, 0]; 0 selects 20 + 10 * ceil(h_max * f_max).
    int grid_points = 0;
    // f_max of the automatic grid rule, in Hz.
    double frequency_hz = 0.0;
    // Refined roots are kept when Re >= region; with no explicit region the
    // bound is (rightmost discretized eigenvalue) - region_width.
    double region_width = 1.0;
    // Candidates slightly left of the region are still refined.
    double candidate_margin = 0.25;
    double root_tol = 1e-10;
    double tie_tol = 1e-6;
    int newton_max_iterations = 40;
    // Grid doublings attempted before DiscretizationTooCoarse is raised.
    int max_grid_refinements = 2;
};

int default_grid_points(double max_delay, double frequency_hz);

struct Root {
    Complex value;
    // sigma_min(M(lambda)) / ||M(0)||_F on the descriptor characteristic matrix.
    double residual = 0.0;
    bool multiple = false;
};

struct Spectrum {
    std::vector<Root> roots; // sorted by decreasing real part, then imag
    double abscissa = 0.0;
    double region = 0.0;
    int grid_points = 0;
};

// Eigenvalues of the spectral discretization of the retarded system. Only the
// delayed components of the state are collocated on the history interval.
Eigen::VectorXcd collocation_eigenvalues(const RetardedSystem& sys, int grid_points);

// Newton iteration on M(lambda) v = 0, c^H v = 1. Returns nullopt on divergence.
std::optional<Complex> refine_root(const RetardedSystem& sys, Complex guess, int max_iterations = 40);

Spectrum compute_spectrum(const DdaeSystem& sys, const GainMatrix& gain,
                          std::optional<double> region = std::nullopt,
                          const SpectrumOptions& options = {});

struct AbscissaInfo {
    double value = 0.0;
    std::size_t rightmost = 0; // index into Spectrum::roots, Im >= 0 member of a pair
    bool near_tie = false;
};

AbscissaInfo spectral_abscissa(const Spectrum& spectrum, double tie_tol = 1e-6);

// d Re(lambda) / dK for a simple root lambda of the closed loop with gain K.
Eigen::MatrixXd root_real_part_gradient(const DdaeSystem& sys, const Eigen::MatrixXd& K, Complex lambda);

// Gradient of alpha(compose(K_L, g(K_L))) with respect to the free entries of
// K_L (ordering of GainPartition::free_indices). Throws NonSmoothPoint when
// the rightmost root is not unique up to conjugation.
Eigen::VectorXd abscissa_gradient(const DdaeSystem& sys, const GainMatrix& free_gain,
                                  const GainPartition& partition,
                                  const std::vector<double>& omegas, const Spectrum& spectrum,
                                  double tie_tol = 1e-6);

// Same chain rule, applied to one specific simple root.
Eigen::VectorXd root_gradient_free(const DdaeSystem& sys, const GainMatrix& free_gain,
                                   const GainPartition& partition,
                                   const std::vector<double>& omegas, Complex lambda);

// Columns: re,im,residual
void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum);

} // namespace delayvib
