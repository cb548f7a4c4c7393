#include "delayvib/errors.hpp"
#include "delayvib/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <string>

namespace delayvib {

namespace {

struct Point {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd g;
};

struct LineSearch {
    bool ok = false;
    double t = 0.0;
    Point point;
};

bool usable(const ObjectiveValue& v, Eigen::Index n) {
    return std::isfinite(v.value) && v.gradient.size() == n && v.gradient.allFinite();
}

// Lewis-Overton bracketing: double t until Armijo fails, then bisect.
LineSearch weak_wolfe(const Objective& f, const Point& start, const Eigen::VectorXd& d,
                      const OptimizerOptions& opts, int& evaluations) {
    const double slope = start.g.dot(d);
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double t = 1.0;
    int bisections = 0;
    int expansions = 0;
    while (true) {
        Point trial;
        trial.x = start.x + t * d;
        const ObjectiveValue v = f(trial.x);
        ++evaluations;
        const bool finite = usable(v, start.x.size());
        if (!finite || v.value > start.f + opts.c1 * t * slope) {
            hi = t;
        } else if (v.gradient.dot(d) < opts.c2 * slope) {
            lo = t;
        } else {
            trial.f = v.value;
            trial.g = v.gradient;
            return {true, t, std::move(trial)};
        }
        if (std::isfinite(hi)) {
            if (bisections++ >= opts.max_bisections) {
                return {};
            }
            t = 0.5 * (lo + hi);
        } else {
            if (expansions++ >= opts.max_expansions) {
                return {};
            }
            t = 2.0 * lo;
        }
    }
}

} // namespace

void OptimizerOptions::validate() const {
    if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
        throw InvalidArgument("weak Wolfe constants must satisfy 0 < c1 < c2 < 1");
    }
    if (max_iterations < 0 || multistart < 1) {
        throw InvalidArgument("max_iterations must be >= 0 and multistart >= 1");
    }
    if (!(step_tol >= 0.0) || !(grad_tol >= 0.0)) {
        throw InvalidArgument("tolerances must be non-negative");
    }
}

std::string to_string(Termination t) {
    switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::StepTolerance: return "step_tolerance";
    case Termination::StationaryHull: return "stationary_hull";
    case Termination::IterationLimit: return "iteration_limit";
    case Termination::LineSearchFailure: return "line_search_failure";
    case Termination::NoFreeParameters: return "no_free_parameters";
    }
    return "unknown";
}

Eigen::VectorXd min_norm_convex_combination(const Eigen::MatrixXd& G) {
    const Eigen::Index k = G.cols();
    if (k == 0) {
        throw InvalidArgument("empty gradient bundle");
    }
    // Projected gradient on the simplex for min ||G w||^2.
    const Eigen::MatrixXd H = G.transpose() * G;
    const double L = std::max(H.diagonal().sum(), std::numeric_limits<double>::min());
    Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXd y = w - (H * w) / L;
        // Euclidean projection onto the simplex.
        Eigen::VectorXd s = y;
        std::sort(s.data(), s.data() + k, std::greater<>());
        double cumulative = 0.0;
        double shift = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            cumulative += s(i);
            const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
            if (s(i) - candidate > 0.0) {
                shift = candidate;
            }
        }
        const Eigen::VectorXd next = (y.array() - shift).max(0.0).matrix();
        const double change = (next - w).lpNorm<Eigen::Infinity>();
        w = next;
        if (change <= 1e-15) {
            break;
        }
    }
    return G * w;
}

BfgsResult bfgs_weak_wolfe(const Objective& f, const Eigen::VectorXd& x0, const OptimizerOptions& opts) {
    opts.validate();
    const Eigen::Index n = x0.size();
    BfgsResult result;
    result.x = x0;

    const ObjectiveValue v0 = f(x0);
    result.evaluations = 1;
    result.value = v0.value;
    if (n == 0) {
        result.termination = Termination::NoFreeParameters;
        return result;
    }
    if (!usable(v0, n)) {
        result.termination = Termination::LineSearchFailure;
        result.diagnostic = "objective is not finite at the initial point";
        return result;
    }

    Point cur{x0, v0.value, v0.gradient};
    result.gradient = cur.g;
    result.trace.push_back({0, cur.f, 0.0, cur.g.norm()});

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    std::deque<Point> bundle;
    result.termination = Termination::IterationLimit;

    auto finish = [&](Termination why, std::string diagnostic = {}) {
        result.termination = why;
        result.diagnostic = std::move(diagnostic);
    };

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        if (cur.g.norm() <= opts.grad_tol) {
            finish(Termination::GradientTolerance);
            break;
        }
        Eigen::VectorXd d = -H * cur.g;
        if (!(cur.g.dot(d) < 0.0)) {
            H.setIdentity();
            scaled = false;
            d = -cur.g;
        }
        LineSearch ls = weak_wolfe(f, cur, d, opts, result.evaluations);

        if (!ls.ok && opts.gradient_sampling && !bundle.empty()) {
            Eigen::MatrixXd G(n, static_cast<Eigen::Index>(bundle.size()) + 1);
            for (std::size_t i = 0; i < bundle.size(); ++i) {
                G.col(static_cast<Eigen::Index>(i)) = bundle[i].g;
            }
            G.col(G.cols() - 1) = cur.g;
            const Eigen::VectorXd hull = min_norm_convex_combination(G);
            if (hull.norm() <= opts.grad_tol) {
                finish(Termination::StationaryHull);
                break;
            }
            H.setIdentity();
            scaled = false;
            ls = weak_wolfe(f, cur, -hull, opts, result.evaluations);
        }
        if (!ls.ok) {
            finish(Termination::LineSearchFailure,
                   "weak Wolfe line search failed at iteration " + std::to_string(iter));
            break;
        }

        const Eigen::VectorXd s = ls.point.x - cur.x;
        const Eigen::VectorXd y = ls.point.g - cur.g;
        bundle.push_back(cur);
        if (static_cast<int>(bundle.size()) > opts.sampling_memory) {
            bundle.pop_front();
        }
        cur = std::move(ls.point);
        result.iterations = iter;
        result.trace.push_back({iter, cur.f, ls.t, cur.g.norm()});

        if (s.norm() <= opts.step_tol * std::max(1.0, cur.x.norm())) {
            finish(Termination::StepTolerance);
            break;
        }

        const double sy = s.dot(y);
        if (sy > 0.0) {
            if (!scaled) {
                H *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            H += rho * ((1.0 + rho * y.dot(Hy)) * (s * s.transpose()) - Hy * s.transpose() -
                        s * Hy.transpose());
        }

        // Nonsmooth stationarity: gradients sampled close to the iterate.
        std::vector<const Point*> nearby;
        const double radius = opts.sampling_radius * std::max(1.0, cur.x.norm());
        for (const Point& p : bundle) {
            if ((p.x - cur.x).norm() <= radius) {
                nearby.push_back(&p);
            }
        }
        if (!nearby.empty()) {
            Eigen::MatrixXd G(n, static_cast<Eigen::Index>(nearby.size()) + 1);
            for (std::size_t i = 0; i < nearby.size(); ++i) {
                G.col(static_cast<Eigen::Index>(i)) = nearby[i]->g;
            }
            G.col(G.cols() - 1) = cur.g;
            if (min_norm_convex_combination(G).norm() <= opts.grad_tol) {
                finish(Termination::StationaryHull);
                break;
            }
        }
    }

    result.x = cur.x;
    result.value = cur.f;
    result.gradient = cur.g;
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace) {
    out << "iteration,alpha,step,grad_norm\n";
    out.precision(17);
    for (const auto& e : trace) {
        out << e.iteration << ',' << e.value << ',' << e.step << ',' << e.gradient_norm << '\n';
    }
}

} // namespace delayvib
