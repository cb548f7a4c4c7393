#pragma once

#include "delayvib/model.hpp"
#include "delayvib/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace delayvib::cli {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string text; // verbatim file contents
    std::string hash; // SHA-256 of `text`, lower-case hex

    std::string plant_kind; // "rig" or "matrices"
    PlantModel plant;
    std::optional<PlantParams> rig;
    std::vector<double> delays;
    int n_c = 0;
    bool n_c_given = false;
    std::vector<int> orders{0};
    DisturbanceSpec disturbance;

    std::uint64_t seed = 0;
    int multistart = 5;
    int max_iterations = 400;
    int search_grid_points = 30;
    int grid_points = 0;

    double t_end = 30.0;
    double t_on = 5.0;
    double step = 0.0;
    int trace_every = 10;

    DesignOptions design_options() const;
};

// Flat "key = value" lines; '#' starts a comment. Lists are comma
// separated; matrix rows are separated by ';'. Throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

} // namespace delayvib::cli
