#include "cli/commands.hpp"

#include "cli/gains_io.hpp"
#include "delayvib/errors.hpp"
#include "delayvib/sim.hpp"
#include "delayvib/spectrum.hpp"
#include "delayvib/zeros.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <numbers>
#include <fstream>
#include <ostream>

#ifndef DELAYVIB_VERSION
#define DELAYVIB_VERSION "unknown"
#endif

namespace delayvib::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class DimsMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }
    return out;
}

void write_json(const fs::path& path, const Json& doc) {
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
}

Json header(const RunConfig& config, const std::string& command) {
    Json j;
    j["tool"] = "delayvib";
    j["version"] = DELAYVIB_VERSION;
    j["command"] = command;
    j["config_sha256"] = config.hash;
    j["schema_version"] = kSchemaVersion;
    return j;
}

double max_frequency(const RunConfig& config) {
    const auto& f = config.disturbance.frequencies_hz;
    return f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
}

void require_disturbance(const RunConfig& config, const std::string& command) {
    if (config.disturbance.frequencies_hz.empty()) {
        throw ConfigError(fmt::format("{}: 'frequencies' and 'F_d' are required", command));
    }
}

GainMatrix load_checked_gains(const RunConfig& config, const fs::path& path) {
    GainMatrix gain = load_gains(path);
    const GainDims& d = gain.dims;
    const auto n_delays = static_cast<int>(config.delays.size());
    if (d.n_u != config.plant.inputs() || d.n_y != config.plant.outputs() || d.n_delays != n_delays ||
        (config.n_c_given && d.n_c != config.n_c)) {
        throw DimsMismatch(fmt::format(
            "gain file '{}' has dims (n_c={}, n_u={}, n_y={}, N={}) but the config expects (n_c={}, n_u={}, n_y={}, N={})",
            path.string(), d.n_c, d.n_u, d.n_y, d.n_delays, config.n_c_given ? fmt::format("{}", config.n_c) : "any",
            config.plant.inputs(), config.plant.outputs(), n_delays));
    }
    return gain;
}

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json gain_json(const GainMatrix& gain) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < gain.K.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < gain.K.cols(); ++j) {
            row.push_back(gain.K(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace

int cmd_analyze(const RunConfig& config, const std::optional<fs::path>& gains, const Context& ctx) {
    const GainMatrix gain = gains ? load_checked_gains(config, *gains)
                                  : GainMatrix::zero({config.n_c, config.plant.inputs(), config.plant.outputs(),
                                                      static_cast<int>(config.delays.size())});
    const DdaeSystem sys = assemble_ddae(config.plant, {config.delays, gain.dims.n_c});

    SpectrumOptions options;
    options.grid_points = config.grid_points;
    options.frequency_hz = max_frequency(config);
    const Spectrum spectrum = compute_spectrum(sys, gain, std::nullopt, options);
    const AbscissaInfo info = spectral_abscissa(spectrum, options.tie_tol);
    const Complex rightmost = spectrum.roots.at(info.rightmost).value;

    fs::create_directories(ctx.out_dir);
    {
        auto out = open_output(ctx.out_dir / "spectrum.csv");
        write_spectrum_csv(out, spectrum);
    }
    Json doc = header(config, "analyze");
    doc["gains"] = gains ? gains->string() : std::string("zero");
    doc["n_c"] = gain.dims.n_c;
    doc["alpha"] = info.value;
    doc["rightmost_root"] = complex_json(rightmost);
    doc["near_tie"] = info.near_tie;
    doc["grid_points"] = spectrum.grid_points;
    doc["region"] = spectrum.region;
    doc["roots"] = spectrum.roots.size();
    doc["max_root_residual"] =
        std::max_element(spectrum.roots.begin(), spectrum.roots.end(),
                         [](const Root& a, const Root& b) { return a.residual < b.residual; })
            ->residual;
    doc["spectrum_csv"] = "spectrum.csv";
    write_json(ctx.out_dir / "analyze.json", doc);

    fmt::print(ctx.out, "alpha = {:.10f}\n", info.value);
    fmt::print(ctx.out, "rightmost root = {:.10f} {:+.10f}i\n", rightmost.real(), rightmost.imag());
    fmt::print(ctx.out, "roots = {}, grid points = {}\n", spectrum.roots.size(), spectrum.grid_points);
    return kOk;
}

int cmd_design(const RunConfig& config, const Context& ctx) {
    require_disturbance(config, "design");
    const std::vector<DesignResult> results =
        staged_design(config.plant, config.delays, config.orders, config.disturbance, config.design_options());

    fs::create_directories(ctx.out_dir);
    Json stages = Json::array();
    auto residuals = open_output(ctx.out_dir / "residuals.csv");
    residuals << "n_c,frequency_hz,residual,transfer,open_loop_transfer,ratio\n";
    for (const DesignResult& r : results) {
        const std::string tag = fmt::format("nc{}", r.n_c);
        save_gains(ctx.out_dir / fmt::format("gains_{}.txt", tag), r.gain);
        {
            auto out = open_output(ctx.out_dir / fmt::format("spectrum_{}.csv", tag));
            write_spectrum_csv(out, r.spectrum);
        }
        {
            auto out = open_output(ctx.out_dir / fmt::format("trace_{}.csv", tag));
            write_trace_csv(out, r.trace);
        }
        Json zeros = Json::array();
        for (const ZeroCheck& z : r.zeros) {
            const double f = z.omega / (2.0 * std::numbers::pi);
            const double ratio = z.transfer / z.open_loop_transfer;
            residuals << fmt::format("{},{:.17g},{:.6e},{:.6e},{:.6e},{:.6e}\n", r.n_c, f, z.residual, z.transfer,
                                     z.open_loop_transfer, ratio);
            zeros.push_back({{"frequency_hz", f},
                             {"residual", z.residual},
                             {"transfer", z.transfer},
                             {"open_loop_transfer", z.open_loop_transfer}});
        }
        Json stage;
        stage["n_c"] = r.n_c;
        stage["alpha"] = r.alpha;
        stage["alpha_search"] = r.alpha_search;
        stage["free_parameters"] = r.free_parameters;
        stage["dependent_parameters"] = r.partition.dependent_count();
        stage["iterations"] = r.iterations;
        stage["evaluations"] = r.evaluations;
        stage["best_start"] = r.best_start;
        stage["warm_start_kept"] = r.warm_start_kept;
        stage["termination"] = to_string(r.termination);
        stage["max_constraint_residual"] = r.max_constraint_residual;
        stage["max_transfer_ratio"] = r.max_transfer_ratio;
        stage["wall_time_s"] = r.wall_time_s;
        stage["grid_points"] = r.spectrum.grid_points;
        stage["gain"] = gain_json(r.gain);
        stage["zeros"] = zeros;
        stage["gains_file"] = fmt::format("gains_{}.txt", tag);
        stage["spectrum_csv"] = fmt::format("spectrum_{}.csv", tag);
        stage["trace_csv"] = fmt::format("trace_{}.csv", tag);
        stages.push_back(stage);
    }
    save_gains(ctx.out_dir / "gains.txt", results.back().gain);

    Json doc = header(config, "design");
    doc["seed"] = config.seed;
    doc["multistart"] = config.multistart;
    doc["max_iterations"] = config.max_iterations;
    doc["delays"] = config.delays;
    doc["frequencies_hz"] = config.disturbance.frequencies_hz;
    doc["stages"] = stages;
    doc["residuals_csv"] = "residuals.csv";
    write_json(ctx.out_dir / "report.json", doc);

    fmt::print(ctx.out, "{:>4} {:>14} {:>6} {:>6} {:>12} {:>12} {:>9}  {}\n", "n_c", "alpha", "free", "iter",
               "residual", "|G|/|G_ol|", "time [s]", "termination");
    for (const DesignResult& r : results) {
        fmt::print(ctx.out, "{:>4} {:>14.8f} {:>6} {:>6} {:>12.3e} {:>12.3e} {:>9.2f}  {}{}\n", r.n_c, r.alpha,
                   r.free_parameters, r.iterations, r.max_constraint_residual, r.max_transfer_ratio, r.wall_time_s,
                   to_string(r.termination), r.warm_start_kept ? " (warm start kept)" : "");
    }
    return kOk;
}

int cmd_simulate(const RunConfig& config, const fs::path& gains, const Context& ctx) {
    require_disturbance(config, "simulate");
    const GainMatrix gain = load_checked_gains(config, gains);

    SimScenario scenario;
    scenario.plant = config.plant;
    scenario.controller = realize_controller(gain);
    scenario.delays = config.delays;
    scenario.disturbance = config.disturbance;
    scenario.t_end = config.t_end;
    scenario.t_on = config.t_on;
    scenario.step = config.step;

    SimTrace trace;
    try {
        trace = simulate_closed_loop(scenario);
    } catch (const InstabilityDetected& e) {
        fmt::print(ctx.err, "error: closed loop is unstable; state norm exceeded the bound at t = {:.6f} s\n",
                   e.blow_up_time());
        return kInstability;
    }

    const auto& freqs = config.disturbance.frequencies_hz;
    const double f_min = *std::min_element(freqs.begin(), freqs.end());
    const AttenuationWindow window = default_attenuation_window(config.t_on, config.t_end, f_min);
    const std::vector<Attenuation> attenuation = steady_state_attenuation(trace, freqs, window);

    fs::create_directories(ctx.out_dir);
    {
        auto out = open_output(ctx.out_dir / "trace.csv");
        write_sim_csv(out, trace, true, config.trace_every);
    }
    Json rows = Json::array();
    {
        auto out = open_output(ctx.out_dir / "attenuation.csv");
        out << "frequency_hz,pre_amplitude,post_amplitude,attenuation_db\n";
        for (const Attenuation& a : attenuation) {
            out << fmt::format("{:.17g},{:.17g},{:.17g},{:.6f}\n", a.frequency_hz, a.pre_amplitude, a.post_amplitude,
                               a.db);
            rows.push_back({{"frequency_hz", a.frequency_hz},
                            {"pre_amplitude", a.pre_amplitude},
                            {"post_amplitude", a.post_amplitude},
                            {"attenuation_db", a.db}});
        }
    }
    Json doc = header(config, "simulate");
    doc["gains"] = gains.string();
    doc["n_c"] = gain.dims.n_c;
    doc["step"] = trace.step;
    doc["t_on"] = config.t_on;
    doc["t_end"] = config.t_end;
    doc["window"] = {{"pre", {window.pre_begin, window.pre_end}}, {"post", {window.post_begin, window.post_end}}};
    doc["attenuation"] = rows;
    doc["trace_csv"] = "trace.csv";
    doc["attenuation_csv"] = "attenuation.csv";
    write_json(ctx.out_dir / "simulate.json", doc);

    fmt::print(ctx.out, "step = {:.6g} s, pre window [{:.3f}, {:.3f}] s, post window [{:.3f}, {:.3f}] s\n", trace.step,
               window.pre_begin, window.pre_end, window.post_begin, window.post_end);
    fmt::print(ctx.out, "{:>10} {:>14} {:>14} {:>12}\n", "f [Hz]", "pre |z|", "post |z|", "atten [dB]");
    for (const Attenuation& a : attenuation) {
        fmt::print(ctx.out, "{:>10.4f} {:>14.6e} {:>14.6e} {:>12.2f}\n", a.frequency_hz, a.pre_amplitude,
                   a.post_amplitude, a.db);
    }
    return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Delayed-feedback vibration absorber design"};
    app.require_subcommand(1);

    std::string config_path;
    std::string gains_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration file")->required();
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override the configured random seed");
    };
    CLI::App* analyze = app.add_subcommand("analyze", "Rightmost characteristic roots of a closed loop");
    add_common(analyze);
    analyze->add_option("--gains", gains_path, "Gain file (default: zero gain)");
    CLI::App* design = app.add_subcommand("design", "Staged controller design with exact zero placement");
    add_common(design);
    CLI::App* simulate = app.add_subcommand("simulate", "Time-domain simulation and attenuation");
    add_common(simulate);
    simulate->add_option("--gains", gains_path, "Gain file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        RunConfig config = load_config(config_path);
        if (seed) {
            config.seed = *seed;
        }
        const Context ctx{out_dir, out, err};
        if (analyze->parsed()) {
            return cmd_analyze(config, gains_path.empty() ? std::nullopt : std::optional<fs::path>(gains_path), ctx);
        }
        if (design->parsed()) {
            return cmd_design(config, ctx);
        }
        return cmd_simulate(config, gains_path, ctx);
    } catch (const ConfigError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return kConfigInvalid;
    } catch (const GainFormatError& e) {
        fmt::print(err, "gain file error: {}\n", e.what());
        return kConfigInvalid;
    } catch (const DimsMismatch& e) {
        fmt::print(err, "dimension mismatch: {}\n", e.what());
        return kDimsMismatch;
    } catch (const InvalidArgument& e) {
        fmt::print(err, "invalid input: {}\n", e.what());
        return kConfigInvalid;
    } catch (const WindowTooShort& e) {
        fmt::print(err, "invalid input: {}\n", e.what());
        return kConfigInvalid;
    } catch (const InsufficientParameters& e) {
        fmt::print(err, "insufficient parameters: {}\n", e.what());
        return kInsufficientParameters;
    } catch (const PSingular& e) {
        fmt::print(err, "elimination failed: {}\n", e.what());
        return kEliminationFailure;
    } catch (const RSingular& e) {
        fmt::print(err, "elimination failed: {}\n", e.what());
        return kEliminationFailure;
    } catch (const InstabilityDetected& e) {
        fmt::print(err, "error: instability at t = {:.6f} s: {}\n", e.blow_up_time(), e.what());
        return kInstability;
    } catch (const Error& e) {
        fmt::print(err, "numerical failure: {}\n", e.what());
        return kNumericFailure;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kNumericFailure;
    }
}

} // namespace delayvib::cli
