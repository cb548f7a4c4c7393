#pragma once

#include "delayvib/model.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace delayvib {

struct SimScenario {
    PlantModel plant;
    ControllerRealization controller;
    std::vector<double> delays; // feedback delays tau_1..tau_N
    DisturbanceSpec disturbance;
    double t_end = 30.0;
    double t_on = 5.0;
    // 0 picks the largest admissible step that puts t_on on the grid.
    double step = 0.0;
    bool record_states = true;

    // Largest step allowed by min(tau)/20 and 1/(40 f_max).
    double max_step() const;
    double effective_step() const;
    void validate() const;
};

struct SimTrace {
    double step = 0.0;
    std::vector<double> t;
    Eigen::MatrixXd x; // one row per sample (empty unless record_states)
    std::vector<double> u;
    std::vector<double> z; // target displacement C2 x
    std::vector<double> f_d;

    std::size_t samples() const { return t.size(); }
};

// Fixed-step RK4 on the plant and controller states with cubic Hermite
// interpolation of the stored history. Throws InstabilityDetected when the
// state norm exceeds 1e9.
SimTrace simulate_closed_loop(const SimScenario& scenario);

// Independent scenarios run concurrently.
std::vector<SimTrace> simulate_scenarios(const std::vector<SimScenario>& scenarios);

struct AttenuationWindow {
    double pre_begin = 0.0;
    double pre_end = 0.0;
    double post_begin = 0.0;
    double post_end = 0.0;
};

// Post: last 25% of [t_on, t_end]. Pre: the part of [0, t_on] ending at t_on
// that covers 25% of it or 8 periods of the lowest frequency, whichever is longer.
AttenuationWindow default_attenuation_window(double t_on, double t_end, double min_frequency_hz);

struct Attenuation {
    double frequency_hz = 0.0;
    double pre_amplitude = 0.0;
    double post_amplitude = 0.0;
    double db = 0.0;
};

constexpr double kAttenuationCapDb = 160.0;

// Single-sided amplitude of z at f over the longest whole number of periods
// that ends at `end` and fits in [begin, end].
double harmonic_amplitude(const SimTrace& trace, double frequency_hz, double begin, double end);

// Throws WindowTooShort when a window holds fewer than 8 periods of the
// lowest frequency.
std::vector<Attenuation> steady_state_attenuation(const SimTrace& trace, const std::vector<double>& frequencies_hz,
                                                  const AttenuationWindow& window);

// Columns: t,f_d,u,x_1 and, with full_state, x0..x{n-1}.
void write_sim_csv(std::ostream& out, const SimTrace& trace, bool full_state = false, int every = 1);

} // namespace delayvib
