#include "cli/config.hpp"

#include "delayvib/errors.hpp"

#include <openssl/evp.h>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace delayvib::cli {

namespace {

const std::set<std::string> kRigKeys = {"m_a", "m_0", "m_1", "m_2", "k_a", "k_0", "k_1", "k_2", "k_3", "k_4",
                                        "c_a", "c_0", "c_1", "c_2", "c_3", "c_4"};
const std::set<std::string> kMatrixKeys = {"A", "B1", "B2", "C1", "C2"};
const std::set<std::string> kCommonKeys = {
    "schema_version", "plant",      "tau_u",          "delays",             "n_c",         "orders",
    "frequencies",    "F_d",        "phases",         "seed",               "multistart",  "max_iterations",
    "grid_points",    "search_grid_points", "t_end",  "t_on",               "step",        "trace_every"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        parts.push_back(trim(item));
    }
    return parts;
}

class Table {
public:
    explicit Table(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line.resize(hash);
            }
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(fmt::format("line {}: expected 'key = value'", number));
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty() || value.empty()) {
                throw ConfigError(fmt::format("line {}: empty key or value", number));
            }
            if (!values_.emplace(key, value).second) {
                throw ConfigError(fmt::format("line {}: duplicate key '{}'", number, key));
            }
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::string& raw(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) {
            throw ConfigError(fmt::format("missing required key '{}'", key));
        }
        return it->second;
    }

    double number(const std::string& key) const { return parse_number(key, raw(key)); }

    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer_or(const std::string& key, int fallback) const {
        if (!has(key)) {
            return fallback;
        }
        return parse_integer(key, raw(key));
    }

    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : split(raw(key), ',')) {
            out.push_back(parse_number(key, item));
        }
        return out;
    }

    std::vector<int> int_list(const std::string& key) const {
        std::vector<int> out;
        for (const auto& item : split(raw(key), ',')) {
            out.push_back(parse_integer(key, item));
        }
        return out;
    }

    Eigen::MatrixXd matrix(const std::string& key) const {
        const auto rows = split(raw(key), ';');
        std::vector<std::vector<double>> data;
        for (const auto& row : rows) {
            std::vector<double> values;
            std::istringstream in(row);
            std::string token;
            while (in >> token) {
                if (!token.empty() && token.back() == ',') {
                    token.pop_back();
                }
                values.push_back(parse_number(key, token));
            }
            if (values.empty() || (!data.empty() && values.size() != data.front().size())) {
                throw ConfigError(fmt::format("{}: matrix rows must be non-empty and of equal length", key));
            }
            data.push_back(std::move(values));
        }
        Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.front().size()));
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (std::size_t j = 0; j < data[i].size(); ++j) {
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i][j];
            }
        }
        return m;
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> k;
        for (const auto& [key, value] : values_) {
            k.push_back(key);
        }
        return k;
    }

private:
    static double parse_number(const std::string& key, const std::string& text) {
        double v = 0.0;
        const char* end = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(text.data(), end, v);
        if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
            throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, text));
        }
        return v;
    }

    static int parse_integer(const std::string& key, const std::string& text) {
        int v = 0;
        const char* end = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(text.data(), end, v);
        if (ec != std::errc() || ptr != end) {
            throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
        }
        return v;
    }

    std::map<std::string, std::string> values_;
};

void check(bool ok, const std::string& message) {
    if (!ok) {
        throw ConfigError(message);
    }
}

} // namespace

DesignOptions RunConfig::design_options() const {
    DesignOptions o;
    o.optimizer.seed = seed;
    o.optimizer.multistart = multistart;
    o.optimizer.max_iterations = max_iterations;
    o.search_spectrum.grid_points = search_grid_points;
    o.verify_spectrum.grid_points = grid_points;
    return o;
}

RunConfig parse_config(const std::string& text) {
    const Table t(text);
    RunConfig cfg;
    cfg.text = text;
    cfg.hash = sha256_hex(text);

    const int version = static_cast<int>(t.number("schema_version"));
    check(version == kSchemaVersion && t.number("schema_version") == version,
          fmt::format("schema_version: unsupported value (expected {})", kSchemaVersion));

    cfg.plant_kind = t.raw("plant");
    check(cfg.plant_kind == "rig" || cfg.plant_kind == "matrices", "plant: expected 'rig' or 'matrices'");
    const auto& own = cfg.plant_kind == "rig" ? kRigKeys : kMatrixKeys;
    for (const auto& key : t.keys()) {
        check(kCommonKeys.count(key) != 0 || own.count(key) != 0,
              fmt::format("unknown key '{}' for plant = {}", key, cfg.plant_kind));
    }

    try {
        if (cfg.plant_kind == "rig") {
            PlantParams p;
            p.m_a = t.number("m_a");
            p.m_0 = t.number("m_0");
            p.m_1 = t.number("m_1");
            p.m_2 = t.number("m_2");
            p.k_a = t.number("k_a");
            p.k_0 = t.number("k_0");
            p.k_1 = t.number("k_1");
            p.k_2 = t.number("k_2");
            p.k_3 = t.number("k_3");
            p.k_4 = t.number("k_4");
            p.c_a = t.number("c_a");
            p.c_0 = t.number("c_0");
            p.c_1 = t.number("c_1");
            p.c_2 = t.number("c_2");
            p.c_3 = t.number("c_3");
            p.c_4 = t.number("c_4");
            p.tau_u = t.number("tau_u");
            cfg.plant = build_plant(p);
            cfg.rig = p;
        } else {
            cfg.plant.A = t.matrix("A");
            cfg.plant.B1 = t.matrix("B1");
            cfg.plant.B2 = t.matrix("B2");
            cfg.plant.C1 = t.matrix("C1");
            cfg.plant.C2 = t.matrix("C2");
            cfg.plant.tau_u = t.number("tau_u");
            cfg.plant.validate();
        }

        cfg.delays = t.list("delays");
        cfg.n_c = t.integer_or("n_c", 0);
        cfg.n_c_given = t.has("n_c");
        FeedbackConfig{cfg.delays, cfg.n_c}.validate();
        if (t.has("orders")) {
            cfg.orders = t.int_list("orders");
        } else {
            cfg.orders.clear();
            for (int k = 0; k <= cfg.n_c; ++k) {
                cfg.orders.push_back(k);
            }
        }
        check(!cfg.orders.empty() && cfg.orders.front() == 0 &&
                  std::is_sorted(cfg.orders.begin(), cfg.orders.end()),
              "orders: must be non-decreasing and start at 0");

        if (t.has("frequencies")) {
            cfg.disturbance.frequencies_hz = t.list("frequencies");
            cfg.disturbance.amplitude = t.number("F_d");
            if (t.has("phases")) {
                cfg.disturbance.phases = t.list("phases");
            }
            cfg.disturbance.validate();
        } else {
            check(!t.has("F_d") && !t.has("phases"), "F_d/phases: given without frequencies");
        }
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }

    const double seed = t.number_or("seed", 0.0);
    check(seed >= 0.0 && seed == std::floor(seed) && seed < 1.8e19, "seed: must be a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.multistart = t.integer_or("multistart", cfg.multistart);
    check(cfg.multistart >= 1, "multistart: must be >= 1");
    cfg.max_iterations = t.integer_or("max_iterations", cfg.max_iterations);
    check(cfg.max_iterations >= 0, "max_iterations: must be >= 0");
    cfg.grid_points = t.integer_or("grid_points", cfg.grid_points);
    check(cfg.grid_points == 0 || cfg.grid_points >= 2, "grid_points: must be 0 (automatic) or >= 2");
    cfg.search_grid_points = t.integer_or("search_grid_points", cfg.search_grid_points);
    check(cfg.search_grid_points == 0 || cfg.search_grid_points >= 2,
          "search_grid_points: must be 0 (automatic) or >= 2");
    cfg.t_end = t.number_or("t_end", cfg.t_end);
    cfg.t_on = t.number_or("t_on", cfg.t_on);
    check(cfg.t_end > 0.0 && cfg.t_on >= 0.0 && cfg.t_on < cfg.t_end, "t_on/t_end: need 0 <= t_on < t_end");
    cfg.step = t.number_or("step", cfg.step);
    check(cfg.step >= 0.0, "step: must be >= 0");
    cfg.trace_every = t.integer_or("trace_every", cfg.trace_every);
    check(cfg.trace_every >= 1, "trace_every: must be >= 1");
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

} // namespace delayvib::cli
