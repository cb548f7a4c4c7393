#include "delayvib/errors.hpp"
#include "delayvib/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <string>

namespace delayvib {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

SpectrumOptions with_frequency(SpectrumOptions opts, const DisturbanceSpec& disturbance) {
    if (opts.frequency_hz <= 0.0) {
        opts.frequency_hz = *std::max_element(disturbance.frequencies_hz.begin(), disturbance.frequencies_hz.end());
    }
    return opts;
}

struct Candidate {
    BfgsResult run;
    EliminatedObjective::Evaluation verified;
    std::vector<ZeroCheck> zeros;
    bool ok = false;
    int start = 0;
};

double max_residual(const std::vector<ZeroCheck>& zeros) {
    double worst = 0.0;
    for (const auto& z : zeros) {
        worst = std::max(worst, z.residual);
    }
    return worst;
}

double max_transfer_ratio(const std::vector<ZeroCheck>& zeros) {
    double worst = 0.0;
    for (const auto& z : zeros) {
        worst = std::max(worst, z.transfer / z.open_loop_transfer);
    }
    return worst;
}

Candidate certify(const EliminatedObjective& verifier, BfgsResult run, int start) {
    Candidate c;
    c.start = start;
    c.verified = verifier.evaluate(run.x);
    c.zeros = check_zeros(verifier.system(), c.verified.gain, verifier.partition(), verifier.omegas());
    c.run = std::move(run);
    c.ok = true;
    return c;
}

// Index shift caused by inserting a controller state at position `inserted`.
int shifted(int index, int inserted) {
    return index >= inserted ? index + 1 : index;
}

DesignResult to_result(const Candidate& c, const DdaeSystem& sys, const GainPartition& partition,
                       const std::vector<double>& delays) {
    DesignResult r;
    r.n_c = sys.dims.n_c;
    r.delays = delays;
    r.gain = c.verified.gain;
    r.partition = partition;
    r.alpha = c.verified.alpha;
    r.alpha_search = c.run.value;
    r.zeros = c.zeros;
    r.max_constraint_residual = max_residual(c.zeros);
    r.max_transfer_ratio = max_transfer_ratio(c.zeros);
    r.free_parameters = partition.free_count();
    r.iterations = c.run.iterations;
    r.evaluations = c.run.evaluations;
    r.best_start = c.start;
    r.termination = c.run.termination;
    r.trace = c.run.trace;
    r.spectrum = c.verified.spectrum;
    return r;
}

} // namespace

EliminatedObjective::EliminatedObjective(DdaeSystem sys, GainPartition partition, std::vector<double> omegas,
                                         SpectrumOptions spectrum, double max_condition)
    : sys_(std::move(sys)),
      partition_(std::move(partition)),
      omegas_(std::move(omegas)),
      spectrum_(spectrum),
      max_condition_(max_condition) {}

EliminatedObjective::Evaluation EliminatedObjective::evaluate(const Eigen::VectorXd& free_values) const {
    Evaluation e;
    const GainMatrix free_gain = partition_.unpack(free_values);
    e.dependent = solve_dependent_gains(sys_, partition_, free_gain, omegas_, max_condition_);
    e.gain = compose_full_gain(partition_, free_gain, e.dependent);
    e.spectrum = compute_spectrum(sys_, e.gain, std::nullopt, spectrum_);
    e.info = spectral_abscissa(e.spectrum, spectrum_.tie_tol);
    e.alpha = e.info.value;
    return e;
}

ObjectiveValue EliminatedObjective::operator()(const Eigen::VectorXd& free_values) const {
    ObjectiveValue out;
    try {
        const Evaluation e = evaluate(free_values);
        out.value = e.alpha;
        out.smooth = !e.info.near_tie;
        // At a tie this is the gradient of the root attaining the max.
        out.gradient = root_gradient_free(sys_, partition_.unpack(free_values), partition_, omegas_,
                                          e.spectrum.roots[e.info.rightmost].value);
    } catch (const Error&) {
        out.value = kInfinity;
        out.gradient.resize(0);
    }
    return out;
}

std::vector<ZeroCheck> check_zeros(const DdaeSystem& sys, const GainMatrix& gain,
                                   const GainPartition& partition, const std::vector<double>& omegas) {
    const GainMatrix open_loop = GainMatrix::zero(gain.dims);
    std::vector<ZeroCheck> out;
    for (double w : omegas) {
        ZeroCheck z;
        z.omega = w;
        z.residual = std::abs(constraint_residual(sys, gain, w, partition));
        z.transfer = std::abs(transfer_value(sys, gain, Complex(0.0, w)));
        z.open_loop_transfer = std::abs(transfer_value(sys, open_loop, Complex(0.0, w)));
        out.push_back(z);
    }
    return out;
}

std::vector<DesignResult> staged_design(const PlantModel& plant, const std::vector<double>& delays,
                                        const std::vector<int>& orders, const DisturbanceSpec& disturbance,
                                        const DesignOptions& options) {
    if (orders.empty() || orders.front() != 0) {
        throw InvalidArgument("controller orders must start at 0");
    }
    if (!std::is_sorted(orders.begin(), orders.end())) {
        throw InvalidArgument("controller orders must be non-decreasing");
    }
    disturbance.validate();
    options.optimizer.validate();
    if (!(options.init_noise > 0.0) || options.max_init_attempts < 1) {
        throw InvalidArgument("init_noise must be positive and max_init_attempts >= 1");
    }
    const std::vector<double> omegas = disturbance.angular_frequencies();
    const SpectrumOptions search = with_frequency(options.search_spectrum, disturbance);
    const SpectrumOptions verify = with_frequency(options.verify_spectrum, disturbance);

    std::vector<DesignResult> results;
    for (std::size_t stage = 0; stage < orders.size(); ++stage) {
        const auto t0 = std::chrono::steady_clock::now();
        const int n_c = orders[stage];
        if (stage > 0 && n_c == orders[stage - 1]) {
            results.push_back(results.back());
            continue;
        }
        const DdaeSystem sys = assemble_ddae(plant, FeedbackConfig{delays, n_c});

        if (stage == 0) {
            const GainPartition partition = select_dependent_params(sys, omegas, options.selection);
            const EliminatedObjective objective(sys, partition, omegas, search, options.max_condition);
            const EliminatedObjective verifier(sys, partition, omegas, verify, options.max_condition);

            if (partition.free_count() == 0) {
                BfgsResult run = bfgs_weak_wolfe(objective, Eigen::VectorXd(0), options.optimizer);
                Candidate c = certify(verifier, std::move(run), 0);
                results.push_back(to_result(c, sys, partition, delays));
            } else {
                auto run_start = [&](int s) -> Candidate {
                    std::mt19937_64 rng(options.optimizer.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(s));
                    std::uniform_real_distribution<double> noise(-options.init_noise, options.init_noise);
                    Eigen::VectorXd x0(partition.free_count());
                    for (int attempt = 0; attempt < options.max_init_attempts; ++attempt) {
                        for (Eigen::Index i = 0; i < x0.size(); ++i) {
                            x0(i) = noise(rng);
                        }
                        if (std::isfinite(objective(x0).value)) {
                            try {
                                return certify(verifier, bfgs_weak_wolfe(objective, x0, options.optimizer), s);
                            } catch (const Error&) {
                                return Candidate{};
                            }
                        }
                    }
                    return Candidate{};
                };
                std::vector<std::future<Candidate>> futures;
                for (int s = 0; s < options.optimizer.multistart; ++s) {
                    futures.push_back(std::async(std::launch::async, run_start, s));
                }
                std::vector<Candidate> candidates;
                for (auto& f : futures) {
                    candidates.push_back(f.get());
                }
                const Candidate* best = nullptr;
                for (const Candidate& c : candidates) {
                    if (!c.ok) {
                        continue;
                    }
                    if (best == nullptr || c.verified.alpha < best->verified.alpha) {
                        best = &c;
                    }
                }
                if (best == nullptr) {
                    throw PSingular("no well-conditioned feasible starting point found for order 0");
                }
                results.push_back(to_result(*best, sys, partition, delays));
            }
        } else {
            const DesignResult& prev = results.back();
            GainMatrix gain = prev.gain;
            int line = prev.partition.line;
            std::vector<int> indices = prev.partition.dependent;
            for (int k = prev.n_c; k < n_c; ++k) {
                // The new controller state lands at row/column k of K.
                gain = extend_controller_order(gain, std::min(-1.0, 2.0 * prev.alpha));
                line = shifted(line, k);
                for (int& j : indices) {
                    j = shifted(j, k);
                }
            }
            DependentSelection selection;
            selection.orientation = prev.partition.orientation;
            selection.line = line;
            selection.indices = indices;
            const GainPartition partition = select_dependent_params(sys, omegas, selection);
            const EliminatedObjective objective(sys, partition, omegas, search, options.max_condition);
            const EliminatedObjective verifier(sys, partition, omegas, verify, options.max_condition);

            const Eigen::VectorXd x0 = partition.pack(partition.free_part(gain));
            Candidate c = certify(verifier, bfgs_weak_wolfe(objective, x0, options.optimizer), 0);
            bool kept = false;
            if (c.verified.alpha > prev.alpha) {
                // Fall back to the exact embedding of the lower-order design.
                BfgsResult stay = c.run;
                stay.x = x0;
                stay.value = objective(x0).value;
                c = certify(verifier, std::move(stay), 0);
                kept = true;
            }
            DesignResult r = to_result(c, sys, partition, delays);
            r.warm_start_kept = kept;
            results.push_back(std::move(r));
        }
        results.back().wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return results;
}

} // namespace delayvib
