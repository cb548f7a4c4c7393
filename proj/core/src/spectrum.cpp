#include "delayvib/spectrum.hpp"

#include "delayvib/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace delayvib {

namespace {

double smallest_singular_value(const Eigen::MatrixXcd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

bool same_delay(double a, double b) {
    return std::abs(a - b) <= 1e-14 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

void add_term(std::vector<DelayTerm>& terms, double delay, const Eigen::MatrixXd& matrix) {
    if (delay != 0.0 && matrix.isZero(0.0)) {
        return;
    }
    for (auto& term : terms) {
        if (same_delay(term.delay, delay)) {
            term.matrix += matrix;
            return;
        }
    }
    terms.push_back(DelayTerm{delay, matrix});
}

bool root_less(const Root& a, const Root& b) {
    if (a.value.real() != b.value.real()) {
        return a.value.real() > b.value.real();
    }
    return a.value.imag() > b.value.imag();
}

} // namespace

Eigen::MatrixXcd characteristic_matrix(const DdaeSystem& sys, const Eigen::MatrixXd& K, Complex lambda) {
    Eigen::MatrixXcd M = lambda * sys.E.cast<Complex>();
    M -= sys.A0.cast<Complex>();
    for (const auto& term : sys.delay_terms) {
        M -= std::exp(-lambda * term.delay) * term.matrix.cast<Complex>();
    }
    M -= (sys.B1 * K * sys.C1).cast<Complex>();
    return M;
}

Eigen::MatrixXcd characteristic_matrix_derivative(const DdaeSystem& sys, Complex lambda) {
    Eigen::MatrixXcd dM = sys.E.cast<Complex>();
    for (const auto& term : sys.delay_terms) {
        dM += (term.delay * std::exp(-lambda * term.delay)) * term.matrix.cast<Complex>();
    }
    return dM;
}

CharMatrixEval char_matrix(const DdaeSystem& sys, const GainMatrix& gain, Complex lambda) {
    if (!std::isfinite(lambda.real()) || !std::isfinite(lambda.imag())) {
        throw InvalidArgument("char_matrix: lambda must be finite");
    }
    gain.validate();
    CharMatrixEval eval;
    eval.lambda = lambda;
    eval.M = characteristic_matrix(sys, gain.K, lambda);
    eval.sigma_min = smallest_singular_value(eval.M);
    return eval;
}

double RetardedSystem::max_delay() const {
    double h = 0.0;
    for (const auto& term : terms) {
        h = std::max(h, term.delay);
    }
    return h;
}

Eigen::MatrixXcd RetardedSystem::characteristic_matrix(Complex lambda) const {
    Eigen::MatrixXcd M = lambda * Eigen::MatrixXcd::Identity(dim, dim);
    for (const auto& term : terms) {
        M -= std::exp(-lambda * term.delay) * term.matrix.cast<Complex>();
    }
    return M;
}

Eigen::MatrixXcd RetardedSystem::characteristic_matrix_derivative(Complex lambda) const {
    Eigen::MatrixXcd dM = Eigen::MatrixXcd::Identity(dim, dim);
    for (const auto& term : terms) {
        dM += (term.delay * std::exp(-lambda * term.delay)) * term.matrix.cast<Complex>();
    }
    return dM;
}

RetardedSystem reduce_to_retarded(const DdaeSystem& sys, const GainMatrix& gain) {
    gain.validate();
    if (!(gain.dims == sys.dims)) {
        throw InvalidArgument("reduce_to_retarded: gain dims do not match the system");
    }
    const int n = sys.plant_states;
    const int n_c = sys.dims.n_c;
    const int n_u = sys.dims.n_u;
    const int n_y = sys.dims.n_y;
    const int N = sys.dims.n_delays;
    const auto& ix = sys.index;
    const ControllerRealization ctrl = realize_controller(gain);

    // Blocks are read back from the descriptor form.
    const Eigen::MatrixXd A = sys.A0.block(ix.x, ix.x, n, n);
    const DelayTerm& input = sys.delay_terms.front();
    const Eigen::MatrixXd B1 = input.matrix.block(ix.x, ix.zeta_u, n, n_u);

    RetardedSystem ret;
    ret.dim = n + n_c;
    Eigen::MatrixXd M0 = Eigen::MatrixXd::Zero(ret.dim, ret.dim);
    M0.topLeftCorner(n, n) = A;
    M0.bottomRightCorner(n_c, n_c) = ctrl.A_c;
    ret.terms.push_back(DelayTerm{0.0, M0});

    // x' += B1 C_c x_c(t - tau_u)
    Eigen::MatrixXd Mu = Eigen::MatrixXd::Zero(ret.dim, ret.dim);
    Mu.topRightCorner(n, n_c) = B1 * ctrl.C_c;
    add_term(ret.terms, input.delay, Mu);

    for (int i = 0; i < N; ++i) {
        const DelayTerm& out = sys.delay_terms[static_cast<std::size_t>(i) + 1];
        const Eigen::MatrixXd C1 = out.matrix.block(ix.zeta_y + i * n_y, ix.x, n_y, n);

        // x_c' += B_c,i C1 x(t - tau_i)
        Eigen::MatrixXd Mc = Eigen::MatrixXd::Zero(ret.dim, ret.dim);
        Mc.bottomLeftCorner(n_c, n) = ctrl.B_c.middleCols(i * n_y, n_y) * C1;
        add_term(ret.terms, out.delay, Mc);

        // x' += B1 D_c,i C1 x(t - tau_u - tau_i)
        Eigen::MatrixXd Mx = Eigen::MatrixXd::Zero(ret.dim, ret.dim);
        Mx.topLeftCorner(n, n) = B1 * ctrl.D_c.middleCols(i * n_y, n_y) * C1;
        add_term(ret.terms, input.delay + out.delay, Mx);
    }

    std::stable_sort(ret.terms.begin(), ret.terms.end(),
                     [](const DelayTerm& a, const DelayTerm& b) { return a.delay < b.delay; });
    return ret;
}

int default_grid_points(double max_delay, double frequency_hz) {
    const double cycles = std::max(0.0, max_delay * frequency_hz);
    return 20 + 10 * static_cast<int>(std::ceil(cycles - 1e-12));
}

std::optional<Complex> refine_root(const RetardedSystem& sys, Complex guess, int max_iterations) {
    const int n = sys.dim;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    Complex lambda = guess;

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sys.characteristic_matrix(lambda), Eigen::ComputeFullV);
    Eigen::VectorXcd v = svd.matrixV().col(n - 1);
    const Eigen::VectorXcd c = v; // c^H v = 1 at the start

    Eigen::MatrixXcd J(n + 1, n + 1);
    Eigen::VectorXcd F(n + 1);
    double last_step = std::numeric_limits<double>::infinity();
    // Ill-conditioned roots stall with lambda jittering well above 1e-15 while
    // M v is already at rounding level; the smallest backward error wins.
    Complex best = lambda;
    double best_error = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::MatrixXcd M = sys.characteristic_matrix(lambda);
        const Eigen::MatrixXcd dM = sys.characteristic_matrix_derivative(lambda);
        F.head(n) = M * v;
        F(n) = c.dot(v) - 1.0;
        const double backward = F.head(n).norm() / (M.norm() * v.norm());
        if (backward < best_error) {
            best_error = backward;
            best = lambda;
        }
        if (it > 0 && backward <= 4.0 * n * eps && last_step <= 1e-6 * std::max(1.0, std::abs(lambda))) {
            return lambda;
        }
        J.topLeftCorner(n, n) = M;
        J.topRightCorner(n, 1) = dM * v;
        J.bottomLeftCorner(1, n) = c.adjoint();
        J(n, n) = 0.0;

        const Eigen::VectorXcd step = J.partialPivLu().solve(-F);
        if (!step.allFinite()) {
            break;
        }
        v += step.head(n);
        lambda += step(n);
        if (!std::isfinite(lambda.real()) || !std::isfinite(lambda.imag())) {
            break;
        }

        const double scale = std::max(1.0, std::abs(lambda));
        const double size = std::abs(step(n));
        if (size <= 1e-15 * scale) {
            return lambda;
        }
        // Stagnation at rounding level.
        if (size <= 1e-12 * scale && size >= 0.5 * last_step) {
            return lambda;
        }
        last_step = size;
    }
    if (last_step <= 1e-10 * std::max(1.0, std::abs(lambda))) {
        return lambda;
    }
    if (best_error <= 1e3 * eps) {
        return best;
    }
    return std::nullopt;
}

Spectrum compute_spectrum(const DdaeSystem& sys, const GainMatrix& gain, std::optional<double> region,
                          const SpectrumOptions& options) {
    const RetardedSystem ret = reduce_to_retarded(sys, gain);
    const double scale = characteristic_matrix(sys, gain.K, 0.0).norm();
    const double h_max = ret.max_delay();

    int grid = options.grid_points > 0 ? options.grid_points
                                       : default_grid_points(h_max, options.frequency_hz);

    for (int attempt = 0; attempt <= options.max_grid_refinements; ++attempt, grid *= 2) {
        const Eigen::VectorXcd eigs = collocation_eigenvalues(ret, grid);
        double estimate = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < eigs.size(); ++i) {
            estimate = std::max(estimate, eigs(i).real());
        }
        const double r = region ? *region : estimate - options.region_width;

        std::vector<Complex> candidates;
        for (Eigen::Index i = 0; i < eigs.size(); ++i) {
            const Complex mu = eigs(i);
            if (mu.real() >= r - options.candidate_margin && mu.imag() >= 0.0) {
                candidates.push_back(mu);
            }
        }
        std::sort(candidates.begin(), candidates.end(),
                  [](Complex a, Complex b) { return a.real() > b.real(); });

        bool ok = true;
        std::vector<Root> upper;
        std::vector<Complex> origin;
        for (const Complex mu : candidates) {
            const auto refined = refine_root(ret, mu, options.newton_max_iterations);
            if (!refined) {
                ok = false;
                break;
            }
            Complex lambda = *refined;
            if (std::abs(lambda.imag()) <= 1e-9 * std::max(1.0, std::abs(lambda))) {
                lambda = Complex(lambda.real(), 0.0);
            } else if (lambda.imag() < 0.0) {
                lambda = std::conj(lambda);
            }
            if (lambda.real() < r) {
                continue;
            }

            bool duplicate = false;
            for (std::size_t k = 0; k < upper.size(); ++k) {
                if (std::abs(upper[k].value - lambda) <= 1e-7 * std::max(1.0, std::abs(lambda))) {
                    duplicate = true;
                    if (std::abs(origin[k] - mu) > 1e-6 * std::max(1.0, std::abs(mu))) {
                        upper[k].multiple = true;
                    }
                    break;
                }
            }
            if (duplicate) {
                continue;
            }

            const double residual =
                smallest_singular_value(characteristic_matrix(sys, gain.K, lambda)) / scale;
            if (!(residual <= options.root_tol)) {
                ok = false;
                break;
            }
            upper.push_back(Root{lambda, residual, false});
            origin.push_back(mu);
        }
        if (!ok) {
            continue;
        }

        Spectrum spectrum;
        spectrum.region = r;
        spectrum.grid_points = grid;
        for (const Root& root : upper) {
            spectrum.roots.push_back(root);
            if (root.value.imag() != 0.0) {
                spectrum.roots.push_back(Root{std::conj(root.value), root.residual, root.multiple});
            }
        }
        std::sort(spectrum.roots.begin(), spectrum.roots.end(), root_less);
        spectrum.abscissa = spectrum.roots.empty() ? -std::numeric_limits<double>::infinity()
                                                   : spectrum.roots.front().value.real();
        return spectrum;
    }
    throw DiscretizationTooCoarse("Newton refinement failed for a discretized root candidate; "
                                  "increase the grid size");
}

AbscissaInfo spectral_abscissa(const Spectrum& spectrum, double tie_tol) {
    if (spectrum.roots.empty()) {
        throw EmptyRegion("no characteristic roots to the right of the search region");
    }
    AbscissaInfo info;
    info.value = spectrum.roots.front().value.real();
    info.rightmost = 0;
    // Pick the Im >= 0 member of the rightmost pair.
    for (std::size_t i = 0; i < spectrum.roots.size(); ++i) {
        const Complex z = spectrum.roots[i].value;
        if (z.real() < info.value) {
            break;
        }
        if (z.imag() >= 0.0) {
            info.rightmost = i;
            break;
        }
    }
    const Complex top = spectrum.roots[info.rightmost].value;
    for (std::size_t i = 0; i < spectrum.roots.size(); ++i) {
        if (i == info.rightmost) {
            continue;
        }
        const Complex z = spectrum.roots[i].value;
        if (z.real() < info.value - tie_tol) {
            break;
        }
        const bool conjugate = std::abs(z - std::conj(top)) <= 1e-9 * std::max(1.0, std::abs(z));
        if (!conjugate) {
            info.near_tie = true;
        }
    }
    if (spectrum.roots[info.rightmost].multiple) {
        info.near_tie = true;
    }
    return info;
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum) {
    const auto precision = out.precision(17);
    out << "re,im,residual\n";
    for (const Root& root : spectrum.roots) {
        out << root.value.real() << ',' << root.value.imag() << ',' << root.residual << '\n';
    }
    out.precision(precision);
}

} // namespace delayvib
