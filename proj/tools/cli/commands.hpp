#pragma once

#include "cli/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace delayvib::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfigInvalid = 2,
    kNumericFailure = 3,
    kInsufficientParameters = 4,
    kEliminationFailure = 5,
    kDimsMismatch = 6,
    kInstability = 7,
};

struct Context {
    std::filesystem::path out_dir;
    std::ostream& out;
    std::ostream& err;
};

// Writes spectrum.csv and analyze.json; prints alpha.
int cmd_analyze(const RunConfig& config, const std::optional<std::filesystem::path>& gains, const Context& ctx);

// Writes gains.txt (highest order), gains_nc<k>.txt, spectrum_nc<k>.csv,
// trace_nc<k>.csv, residuals.csv and report.json.
int cmd_design(const RunConfig& config, const Context& ctx);

// Writes trace.csv, attenuation.csv and simulate.json.
int cmd_simulate(const RunConfig& config, const std::filesystem::path& gains, const Context& ctx);

// Full command line: delayvib <analyze|design|simulate> --config PATH [--gains PATH] [--out DIR] [--seed N]
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace delayvib::cli
