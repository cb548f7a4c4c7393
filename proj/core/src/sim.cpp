#include "delayvib/sim.hpp"

#include "delayvib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

namespace delayvib {

namespace {

constexpr double kOverflow = 1e9;

// Fixed-capacity history of xi and xi' on the uniform grid t_n = n h.
class History {
public:
    History(int dim, double h, double span)
        : h_(h),
          capacity_(static_cast<long>(std::ceil(span / h)) + 4),
          values_(dim, capacity_),
          slopes_(dim, capacity_) {}

    void store_value(long n, const Eigen::VectorXd& xi) { values_.col(slot(n)) = xi; }
    void store_slope(long n, const Eigen::VectorXd& d) { slopes_.col(slot(n)) = d; }

    // Cubic Hermite interpolation; zero before t = 0.
    void at(double s, long newest, Eigen::VectorXd& out) const {
        if (s <= 0.0) {
            out.setZero();
            return;
        }
        long j = static_cast<long>(std::floor(s / h_));
        if (j >= newest) {
            out = values_.col(slot(newest));
            return;
        }
        if (j < newest - capacity_ + 2) {
            throw Error("history buffer underflow in the delay simulator");
        }
        const double theta = s / h_ - static_cast<double>(j);
        const double t2 = theta * theta;
        const double t3 = t2 * theta;
        const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        const double h10 = t3 - 2.0 * t2 + theta;
        const double h01 = -2.0 * t3 + 3.0 * t2;
        const double h11 = t3 - t2;
        const long a = slot(j);
        const long b = slot(j + 1);
        out = h00 * values_.col(a) + (h10 * h_) * slopes_.col(a) + h01 * values_.col(b) +
              (h11 * h_) * slopes_.col(b);
    }

private:
    long slot(long n) const { return ((n % capacity_) + capacity_) % capacity_; }

    double h_;
    long capacity_;
    Eigen::MatrixXd values_;
    Eigen::MatrixXd slopes_;
};

class ClosedLoop {
public:
    explicit ClosedLoop(const SimScenario& s)
        : scn_(s),
          n_(s.plant.states()),
          nc_(static_cast<int>(s.controller.A_c.rows())),
          ny_(s.plant.outputs()),
          h_(s.effective_step()),
          history_(n_ + nc_, h_, s.plant.tau_u + (s.delays.empty() ? 0.0 : s.delays.back()) + h_),
          tmp_(n_ + nc_),
          tmp2_(n_ + nc_) {}

    double step() const { return h_; }
    int dim() const { return n_ + nc_; }
    History& history() { return history_; }

    bool active(double t) const { return t >= scn_.t_on - 1e-9 * h_; }

    // xi(s) given the stage value at stage_t.
    void state_at(double s, double stage_t, const Eigen::VectorXd& stage, long newest, Eigen::VectorXd& out) const {
        if (s >= stage_t) {
            out = stage;
        } else {
            history_.at(s, newest, out);
        }
    }

    // Commanded control u(s) (before the actuator delay).
    Eigen::VectorXd control(double s, double stage_t, const Eigen::VectorXd& stage, long newest) {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(scn_.plant.inputs());
        if (!active(s)) {
            return u;
        }
        state_at(s, stage_t, stage, newest, tmp_);
        if (nc_ > 0) {
            u += scn_.controller.C_c * tmp_.tail(nc_);
        }
        for (std::size_t i = 0; i < scn_.delays.size(); ++i) {
            state_at(s - scn_.delays[i], stage_t, stage, newest, tmp2_);
            u += scn_.controller.D_c.middleCols(static_cast<Eigen::Index>(i) * ny_, ny_) *
                 (scn_.plant.C1 * tmp2_.head(n_));
        }
        return u;
    }

    Eigen::VectorXd rhs(double t, const Eigen::VectorXd& xi, long newest) {
        Eigen::VectorXd d(dim());
        const Eigen::VectorXd u_delayed = control(t - scn_.plant.tau_u, t, xi, newest);
        d.head(n_) = scn_.plant.A * xi.head(n_) + scn_.plant.B1 * u_delayed +
                     scn_.plant.B2.col(0) * scn_.disturbance.force(t);
        if (nc_ > 0) {
            if (active(t)) {
                Eigen::VectorXd dc = scn_.controller.A_c * xi.tail(nc_);
                for (std::size_t i = 0; i < scn_.delays.size(); ++i) {
                    state_at(t - scn_.delays[i], t, xi, newest, tmp2_);
                    dc += scn_.controller.B_c.middleCols(static_cast<Eigen::Index>(i) * ny_, ny_) *
                          (scn_.plant.C1 * tmp2_.head(n_));
                }
                d.tail(nc_) = dc;
            } else {
                d.tail(nc_).setZero();
            }
        }
        return d;
    }

private:
    const SimScenario& scn_;
    int n_;
    int nc_;
    int ny_;
    double h_;
    History history_;
    Eigen::VectorXd tmp_;
    Eigen::VectorXd tmp2_;
};

double min_positive(std::initializer_list<double> head, const std::vector<double>& rest) {
    double best = std::numeric_limits<double>::infinity();
    for (double v : head) {
        if (v > 0.0) {
            best = std::min(best, v);
        }
    }
    for (double v : rest) {
        if (v > 0.0) {
            best = std::min(best, v);
        }
    }
    return best;
}

} // namespace

double SimScenario::max_step() const {
    double bound = min_positive({plant.tau_u}, delays) / 20.0;
    if (!disturbance.frequencies_hz.empty()) {
        const double f_max = *std::max_element(disturbance.frequencies_hz.begin(), disturbance.frequencies_hz.end());
        if (f_max > 0.0) {
            bound = std::min(bound, 1.0 / (40.0 * f_max));
        }
    }
    if (!std::isfinite(bound)) {
        bound = 1e-3;
    }
    return bound;
}

double SimScenario::effective_step() const {
    if (step > 0.0) {
        return step;
    }
    const double h_max = max_step();
    if (t_on > 0.0) {
        return t_on / std::ceil(t_on / h_max - 1e-9);
    }
    return h_max;
}

void SimScenario::validate() const {
    plant.validate();
    disturbance.validate();
    if (!(t_end > 0.0) || !(t_on >= 0.0) || !(t_on < t_end)) {
        throw InvalidArgument("simulation needs 0 <= t_on < t_end");
    }
    for (std::size_t i = 0; i < delays.size(); ++i) {
        if (!(delays[i] >= 0.0) || (i > 0 && !(delays[i] > delays[i - 1]))) {
            throw InvalidArgument("feedback delays must be non-negative and strictly increasing");
        }
    }
    const Eigen::Index nc = controller.A_c.rows();
    const Eigen::Index n_in = static_cast<Eigen::Index>(plant.outputs()) * static_cast<Eigen::Index>(delays.size());
    const Eigen::Index nu = plant.inputs();
    const bool shapes = controller.A_c.cols() == nc && controller.B_c.rows() == nc && controller.B_c.cols() == n_in &&
                        controller.C_c.rows() == nu && controller.C_c.cols() == nc && controller.D_c.rows() == nu &&
                        controller.D_c.cols() == n_in;
    if (!shapes) {
        throw InvalidArgument("controller realization does not match the plant and delay list");
    }
    if (step < 0.0 || step > max_step() * (1.0 + 1e-12)) {
        throw InvalidArgument("step must satisfy h <= min(tau)/20 and h <= 1/(40 f_max)");
    }
}

SimTrace simulate_closed_loop(const SimScenario& scenario) {
    scenario.validate();
    ClosedLoop loop(scenario);
    const double h = loop.step();
    const int n = scenario.plant.states();
    const long steps = static_cast<long>(std::ceil(scenario.t_end / h - 1e-9));

    SimTrace trace;
    trace.step = h;
    const auto samples = static_cast<std::size_t>(steps + 1);
    trace.t.reserve(samples);
    trace.u.reserve(samples);
    trace.z.reserve(samples);
    trace.f_d.reserve(samples);
    if (scenario.record_states) {
        trace.x.resize(static_cast<Eigen::Index>(samples), n);
    }

    Eigen::VectorXd xi = Eigen::VectorXd::Zero(loop.dim());
    History& history = loop.history();
    for (long k = 0;; ++k) {
        const double t = static_cast<double>(k) * h;
        history.store_value(k, xi);
        const Eigen::VectorXd k1 = loop.rhs(t, xi, k);
        history.store_slope(k, k1);

        trace.t.push_back(t);
        trace.f_d.push_back(scenario.disturbance.force(t));
        const Eigen::VectorXd u = loop.control(t, t, xi, k);
        trace.u.push_back(u.size() > 0 ? u(0) : 0.0);
        trace.z.push_back((scenario.plant.C2 * xi.head(n))(0, 0));
        if (scenario.record_states) {
            trace.x.row(static_cast<Eigen::Index>(k)) = xi.head(n).transpose();
        }
        if (k == steps) {
            break;
        }

        const Eigen::VectorXd k2 = loop.rhs(t + 0.5 * h, xi + 0.5 * h * k1, k);
        const Eigen::VectorXd k3 = loop.rhs(t + 0.5 * h, xi + 0.5 * h * k2, k);
        const Eigen::VectorXd k4 = loop.rhs(t + h, xi + h * k3, k);
        xi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double norm = xi.norm();
        if (!(norm <= kOverflow)) {
            const double when = t + h;
            throw InstabilityDetected("closed loop diverged: state norm exceeded 1e9 at t = " + std::to_string(when) +
                                          " s",
                                      when);
        }
    }
    return trace;
}

std::vector<SimTrace> simulate_scenarios(const std::vector<SimScenario>& scenarios) {
    std::vector<std::future<SimTrace>> futures;
    futures.reserve(scenarios.size());
    for (const auto& s : scenarios) {
        futures.push_back(std::async(std::launch::async, [&s] { return simulate_closed_loop(s); }));
    }
    std::vector<SimTrace> out;
    out.reserve(scenarios.size());
    for (auto& f : futures) {
        out.push_back(f.get());
    }
    return out;
}

AttenuationWindow default_attenuation_window(double t_on, double t_end, double min_frequency_hz) {
    if (!(min_frequency_hz > 0.0) || !(t_on < t_end)) {
        throw InvalidArgument("attenuation window needs f_min > 0 and t_on < t_end");
    }
    AttenuationWindow w;
    w.post_end = t_end;
    w.post_begin = t_end - 0.25 * (t_end - t_on);
    w.pre_end = t_on;
    w.pre_begin = std::max(0.0, t_on - std::max(0.25 * t_on, 8.0 / min_frequency_hz));
    return w;
}

double harmonic_amplitude(const SimTrace& trace, double frequency_hz, double begin, double end) {
    if (!(frequency_hz > 0.0) || !(end > begin) || trace.samples() < 2) {
        throw InvalidArgument("harmonic_amplitude needs f > 0, a non-empty window and a trace");
    }
    const double h = trace.step;
    const double periods = std::floor((end - begin) * frequency_hz + 1e-9);
    if (periods < 1.0) {
        throw WindowTooShort("window shorter than one period");
    }
    const double length = periods / frequency_hz;
    const auto count = static_cast<long>(std::llround(length / h));
    const auto last = static_cast<long>(std::llround(end / h));
    const long first = last - count;
    if (first < 0 || last > static_cast<long>(trace.samples())) {
        throw InvalidArgument("window lies outside the simulated interval");
    }
    const double w = 2.0 * std::numbers::pi * frequency_hz;
    double re = 0.0;
    double im = 0.0;
    for (long i = first; i < last; ++i) {
        const double t = trace.t[static_cast<std::size_t>(i)];
        const double z = trace.z[static_cast<std::size_t>(i)];
        re += z * std::cos(w * t);
        im -= z * std::sin(w * t);
    }
    return 2.0 * std::hypot(re, im) / static_cast<double>(count);
}

std::vector<Attenuation> steady_state_attenuation(const SimTrace& trace, const std::vector<double>& frequencies_hz,
                                                  const AttenuationWindow& window) {
    if (frequencies_hz.empty()) {
        throw InvalidArgument("no frequencies given");
    }
    const double f_min = *std::min_element(frequencies_hz.begin(), frequencies_hz.end());
    const double needed = 8.0 / f_min;
    const double slack = 1e-9 * needed;
    if (window.pre_end - window.pre_begin < needed - slack || window.post_end - window.post_begin < needed - slack) {
        throw WindowTooShort("attenuation windows must span at least 8 periods of " + std::to_string(f_min) +
                             " Hz");
    }
    std::vector<Attenuation> out;
    for (double f : frequencies_hz) {
        Attenuation a;
        a.frequency_hz = f;
        a.pre_amplitude = harmonic_amplitude(trace, f, window.pre_begin, window.pre_end);
        a.post_amplitude = harmonic_amplitude(trace, f, window.post_begin, window.post_end);
        if (a.pre_amplitude == a.post_amplitude) {
            a.db = 0.0;
        } else if (a.post_amplitude == 0.0) {
            a.db = kAttenuationCapDb;
        } else {
            a.db = std::min(kAttenuationCapDb, 20.0 * std::log10(a.pre_amplitude / a.post_amplitude));
        }
        out.push_back(a);
    }
    return out;
}

void write_sim_csv(std::ostream& out, const SimTrace& trace, bool full_state, int every) {
    every = std::max(every, 1);
    const bool states = full_state && trace.x.rows() == static_cast<Eigen::Index>(trace.samples());
    out << "t,f_d,u,x_1";
    if (states) {
        for (Eigen::Index j = 0; j < trace.x.cols(); ++j) {
            out << ",x" << j;
        }
    }
    out << '\n';
    out.precision(12);
    for (std::size_t i = 0; i < trace.samples(); i += static_cast<std::size_t>(every)) {
        out << trace.t[i] << ',' << trace.f_d[i] << ',' << trace.u[i] << ',' << trace.z[i];
        if (states) {
            for (Eigen::Index j = 0; j < trace.x.cols(); ++j) {
                out << ',' << trace.x(static_cast<Eigen::Index>(i), j);
            }
        }
        out << '\n';
    }
}

} // namespace delayvib
