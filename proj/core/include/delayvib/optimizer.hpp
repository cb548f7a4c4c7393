#pragma once

#include "delayvib/model.hpp"
#include "delayvib/spectrum.hpp"
#include "delayvib/zeros.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace delayvib {

struct OptimizerOptions {
    int max_iterations = 400;
    // Take a step along the minimum-norm element of recent gradients when the
    // weak Wolfe search fails, before giving up.
    bool gradient_sampling = true;
    double c1 = 1e-4;
    double c2 = 0.5;
    int multistart = 5;
    std::uint64_t seed = 0;
    // Relative step size and gradient-norm stopping tolerances.
    double step_tol = 1e-12;
    double grad_tol = 1e-10;
    int max_bisections = 50;
    int max_expansions = 50;
    int sampling_memory = 10;
    double sampling_radius = 1e-4;

    void validate() const;
};

struct ObjectiveValue {
    double value = 0.0;
    Eigen::VectorXd gradient; // empty when value is not finite
    bool smooth = true;
};

using Objective = std::function<ObjectiveValue(const Eigen::VectorXd&)>;

struct TraceEntry {
    int iteration = 0;
    double value = 0.0;
    double step = 0.0; // line-search step length t
    double gradient_norm = 0.0;
};

enum class Termination {
    GradientTolerance,
    StepTolerance,
    StationaryHull,
    IterationLimit,
    LineSearchFailure,
    NoFreeParameters,
};

std::string to_string(Termination t);

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    int evaluations = 0;
    Termination termination = Termination::IterationLimit;
    std::string diagnostic;
    std::vector<TraceEntry> trace;
};

// BFGS with a weak Wolfe bracketing line search, suitable for objectives that
// are only differentiable almost everywhere. Accepted values never increase.
BfgsResult bfgs_weak_wolfe(const Objective& f, const Eigen::VectorXd& x0, const OptimizerOptions& options);

// Minimum-norm point of the convex hull of the columns of G.
Eigen::VectorXd min_norm_convex_combination(const Eigen::MatrixXd& G);

// alpha_hat(K_L): spectral abscissa after eliminating the dependent gains.
class EliminatedObjective {
public:
    struct Evaluation {
        double alpha = 0.0;
        GainMatrix gain;
        Eigen::VectorXd dependent;
        Spectrum spectrum;
        AbscissaInfo info;
    };

    EliminatedObjective(DdaeSystem sys, GainPartition partition, std::vector<double> omegas,
                        SpectrumOptions spectrum = {}, double max_condition = kDefaultMaxCondition);

    // Infeasible or failed evaluations return +inf with an empty gradient.
    ObjectiveValue operator()(const Eigen::VectorXd& free_values) const;

    // Throws on elimination or spectrum failure.
    Evaluation evaluate(const Eigen::VectorXd& free_values) const;

    const DdaeSystem& system() const { return sys_; }
    const GainPartition& partition() const { return partition_; }
    const std::vector<double>& omegas() const { return omegas_; }

private:
    DdaeSystem sys_;
    GainPartition partition_;
    std::vector<double> omegas_;
    SpectrumOptions spectrum_;
    double max_condition_;
};

struct ZeroCheck {
    double omega = 0.0;
    double residual = 0.0;        // |h_k| / |det R|
    double transfer = 0.0;        // |G(j omega)| closed loop
    double open_loop_transfer = 0.0;
};

std::vector<ZeroCheck> check_zeros(const DdaeSystem& sys, const GainMatrix& gain,
                                   const GainPartition& partition, const std::vector<double>& omegas);

struct DesignOptions {
    OptimizerOptions optimizer;
    // Spectrum settings used at every optimizer iterate.
    SpectrumOptions search_spectrum{.grid_points = 30};
    // Final certification of each design (automatic grid rule).
    SpectrumOptions verify_spectrum{};
    double init_noise = 1e-3;
    int max_init_attempts = 100;
    double max_condition = kDefaultMaxCondition;
    DependentSelection selection{};
};

struct DesignResult {
    int n_c = 0;
    std::vector<double> delays;
    GainMatrix gain;
    GainPartition partition;
    double alpha = 0.0;        // certified with DesignOptions::verify_spectrum
    double alpha_search = 0.0; // value reported by the optimizer
    double max_constraint_residual = 0.0;
    double max_transfer_ratio = 0.0;
    std::vector<ZeroCheck> zeros;
    int free_parameters = 0;
    int iterations = 0;
    int evaluations = 0;
    int best_start = 0;
    bool warm_start_kept = false; // the new order could not improve on the embedding
    Termination termination = Termination::IterationLimit;
    double wall_time_s = 0.0;
    std::vector<TraceEntry> trace;
    Spectrum spectrum;
};

// Designs controllers for each order in `orders` (non-decreasing, starting at
// 0); order n_c + 1 is warm-started from the order-n_c result.
std::vector<DesignResult> staged_design(const PlantModel& plant, const std::vector<double>& delays,
                                        const std::vector<int>& orders, const DisturbanceSpec& disturbance,
                                        const DesignOptions& options = {});

// Columns: iteration,alpha,step,grad_norm
void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace);

} // namespace delayvib
