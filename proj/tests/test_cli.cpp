#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "cli/gains_io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace delayvib;
using namespace delayvib::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Replaces "key = ..." lines of `base`; keys not present are appended.
// An empty value removes the key.
std::string with_keys(const std::string& base, const std::map<std::string, std::string>& keys) {
    std::istringstream in(base);
    std::ostringstream out;
    std::map<std::string, std::string> pending = keys;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos && line[0] != '#') {
            std::string key = line.substr(0, eq);
            key.erase(key.find_last_not_of(' ') + 1);
            const auto it = pending.find(key);
            if (it != pending.end()) {
                if (!it->second.empty()) {
                    out << key << " = " << it->second << '\n';
                }
                pending.erase(it);
                continue;
            }
        }
        out << line << '\n';
    }
    for (const auto& [k, v] : pending) {
        if (!v.empty()) {
            out << k << " = " << v << '\n';
        }
    }
    return out.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        static std::atomic<int> counter{0};
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() /
               (std::string("delayvib_cli_") + info->name() + "_" + std::to_string(counter++));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        rig_ = slurp(fs::path(DELAYVIB_CONFIG_DIR) / "rig.cfg");
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        spit(p, text);
        return p;
    }

    int cli(std::vector<std::string> args) {
        args.insert(args.begin(), "delayvib");
        std::vector<const char*> argv;
        for (const auto& a : args) {
            argv.push_back(a.c_str());
        }
        out_.str("");
        err_.str("");
        return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    // Short search so a design finishes in a couple of seconds.
    std::string quick_design_config() const {
        return with_keys(rig_, {{"orders", "0"}, {"multistart", "1"}, {"max_iterations", "40"}});
    }

    fs::path dir_;
    std::string rig_;
    std::ostringstream out_;
    std::ostringstream err_;
};

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

} // namespace

TEST_F(Cli, ScalarZeroGainAlphaIsMinusOne) {
    const fs::path cfg = write_config("scalar.cfg", slurp(fs::path(DELAYVIB_CONFIG_DIR) / "scalar.cfg"));
    ASSERT_EQ(cli({"analyze", "--config", cfg.string(), "--out", dir_.string()}), kOk) << err_.str();
    EXPECT_NE(out_.str().find("alpha = -1.0000000000"), std::string::npos) << out_.str();
    const auto doc = read_json(dir_ / "analyze.json");
    EXPECT_NEAR(doc["alpha"].get<double>(), -1.0, 1e-10);
    EXPECT_TRUE(fs::exists(dir_ / "spectrum.csv"));
}

TEST_F(Cli, ZeroGainAlphaMatchesPlantEigenvalues) {
    const fs::path cfg = write_config("rig.cfg", rig_);
    ASSERT_EQ(cli({"analyze", "--config", cfg.string(), "--out", dir_.string()}), kOk) << err_.str();
    const RunConfig config = load_config(cfg);
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(config.plant.A).eigenvalues();
    EXPECT_NEAR(read_json(dir_ / "analyze.json")["alpha"].get<double>(), eig.real().maxCoeff(), 1e-8);
}

TEST_F(Cli, ConfigHashIsSha256OfFileBytes) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const fs::path cfg = write_config("rig.cfg", rig_);
    ASSERT_EQ(cli({"analyze", "--config", cfg.string(), "--out", dir_.string()}), kOk);
    EXPECT_EQ(read_json(dir_ / "analyze.json")["config_sha256"].get<std::string>(), sha256_hex(slurp(cfg)));
}

TEST_F(Cli, NegativeMassIsConfigError) {
    const fs::path cfg = write_config("bad.cfg", with_keys(rig_, {{"m_1", "-0.5"}}));
    EXPECT_EQ(cli({"analyze", "--config", cfg.string(), "--out", dir_.string()}), kConfigInvalid);
    EXPECT_NE(err_.str().find("m_1"), std::string::npos) << err_.str();
}

TEST_F(Cli, MalformedConfigsAreRejected) {
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"unknown key", rig_ + "colour = blue\n"},
        {"duplicate key", rig_ + "seed = 3\n"},
        {"bad schema", with_keys(rig_, {{"schema_version", "2"}})},
        {"missing schema", with_keys(rig_, {{"schema_version", ""}})},
        {"non-numeric", with_keys(rig_, {{"k_2", "stiff"}})},
        {"unsorted delays", with_keys(rig_, {{"delays", "0.1, 0.05"}})},
        {"F_d without frequencies", with_keys(rig_, {{"frequencies", ""}})},
        {"orders not from zero", with_keys(rig_, {{"orders", "1, 2"}})},
        {"no equals sign", rig_ + "orphan\n"},
    };
    for (const auto& [label, text] : cases) {
        const fs::path cfg = write_config("bad.cfg", text);
        EXPECT_EQ(cli({"analyze", "--config", cfg.string(), "--out", dir_.string()}), kConfigInvalid) << label;
    }
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(cli({}), kUsage);
    EXPECT_EQ(cli({"analyze"}), kUsage);
    EXPECT_EQ(cli({"simulate", "--config", "x.cfg"}), kUsage);
    EXPECT_EQ(cli({"frobnicate", "--config", "x.cfg"}), kUsage);
    EXPECT_EQ(cli({"analyze", "--config", (dir_ / "missing.cfg").string()}), kConfigInvalid);
}

TEST_F(Cli, TooFewGainsIsInsufficientParameters) {
    // One delay and no controller states: 4 gains against 8 real constraints.
    const fs::path cfg = write_config("m4.cfg", with_keys(rig_, {{"delays", "0.05"}, {"orders", "0"}}));
    EXPECT_EQ(cli({"design", "--config", cfg.string(), "--out", dir_.string()}), kInsufficientParameters);
}

TEST_F(Cli, MatrixPlantRoundTrip) {
    const std::string text = "schema_version = 1\nplant = matrices\n"
                             "A = 0 1; -4 -0.4\nB1 = 0; 1\nB2 = 0; 1\nC1 = 1 0\nC2 = 1 0\n"
                             "tau_u = 0.01\ndelays = 0.02, 0.05\n";
    const RunConfig c = parse_config(text);
    EXPECT_EQ(c.plant.states(), 2);
    EXPECT_DOUBLE_EQ(c.plant.A(1, 0), -4.0);
    EXPECT_DOUBLE_EQ(c.plant.A(1, 1), -0.4);
    EXPECT_EQ(c.orders, std::vector<int>{0});
    EXPECT_THROW(parse_config(with_keys(text, {{"B1", "0 1"}})), ConfigError);
}

TEST_F(Cli, GainFileRoundTripIsExact) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> dist(0.0, 1e3);
    for (int trial = 0; trial < 10; ++trial) {
        GainMatrix g = GainMatrix::zero({trial % 4, 1, 4, 1 + trial % 4});
        for (Eigen::Index i = 0; i < g.K.size(); ++i) {
            g.K.data()[i] = dist(rng) * std::pow(10.0, static_cast<double>(i % 7) - 3.0);
        }
        std::stringstream s;
        write_gains(s, g);
        const GainMatrix back = read_gains(s);
        EXPECT_EQ(back.dims, g.dims);
        EXPECT_TRUE((back.K.array() == g.K.array()).all());
    }
    std::istringstream short_rows("dims 0 1 2 2\n1 2 3\n");
    EXPECT_THROW(read_gains(short_rows), GainFormatError);
    std::istringstream bad_header("dim 0 1 2 2\n");
    EXPECT_THROW(read_gains(bad_header), GainFormatError);
}

TEST_F(Cli, GainDimsMismatch) {
    const fs::path cfg = write_config("rig.cfg", rig_);
    save_gains(dir_ / "g.txt", GainMatrix::zero({0, 1, 4, 3}));
    EXPECT_EQ(cli({"analyze", "--config", cfg.string(), "--gains", (dir_ / "g.txt").string(), "--out", dir_.string()}),
              kDimsMismatch);
    EXPECT_EQ(
        cli({"simulate", "--config", cfg.string(), "--gains", (dir_ / "g.txt").string(), "--out", dir_.string()}),
        kDimsMismatch);
    const fs::path pinned = write_config("pinned.cfg", with_keys(rig_, {{"n_c", "2"}}));
    save_gains(dir_ / "g1.txt", GainMatrix::zero({1, 1, 4, 4}));
    EXPECT_EQ(
        cli({"analyze", "--config", pinned.string(), "--gains", (dir_ / "g1.txt").string(), "--out", dir_.string()}),
        kDimsMismatch);
}

TEST_F(Cli, DesignOutputsFeedAnalyzeAndSimulate) {
    const fs::path cfg = write_config("quick.cfg", quick_design_config());
    const fs::path out = dir_ / "design";
    ASSERT_EQ(cli({"design", "--config", cfg.string(), "--out", out.string()}), kOk) << err_.str();
    for (const char* f : {"gains.txt", "gains_nc0.txt", "report.json", "residuals.csv", "spectrum_nc0.csv",
                          "trace_nc0.csv"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    const auto report = read_json(out / "report.json");
    EXPECT_EQ(report["config_sha256"].get<std::string>(), sha256_hex(slurp(cfg)));
    const double alpha = report["stages"][0]["alpha"].get<double>();
    EXPECT_LT(alpha, 0.0);
    EXPECT_LE(report["stages"][0]["max_constraint_residual"].get<double>(), 1e-8);

    const std::string gains = (out / "gains.txt").string();
    ASSERT_EQ(cli({"analyze", "--config", cfg.string(), "--gains", gains, "--out", (dir_ / "a").string()}), kOk)
        << err_.str();
    EXPECT_NEAR(read_json(dir_ / "a" / "analyze.json")["alpha"].get<double>(), alpha, 1e-8);

    ASSERT_EQ(cli({"simulate", "--config", cfg.string(), "--gains", gains, "--out", (dir_ / "s").string()}), kOk)
        << err_.str();
    const auto sim = read_json(dir_ / "s" / "simulate.json");
    ASSERT_EQ(sim["attenuation"].size(), 4u);
    for (const auto& row : sim["attenuation"]) {
        EXPECT_GE(row["attenuation_db"].get<double>(), 40.0) << row.dump();
    }

    // Flipping the sign of a stabilizing design destabilizes the loop.
    GainMatrix flipped = load_gains(out / "gains.txt");
    flipped.K = -flipped.K;
    save_gains(dir_ / "flipped.txt", flipped);
    EXPECT_EQ(cli({"simulate", "--config", cfg.string(), "--gains", (dir_ / "flipped.txt").string(), "--out",
                   (dir_ / "f").string()}),
              kInstability);
    EXPECT_NE(err_.str().find("t = "), std::string::npos) << err_.str();
}

TEST_F(Cli, FixedSeedGivesByteIdenticalGains) {
    const fs::path cfg = write_config("quick.cfg", quick_design_config());
    ASSERT_EQ(cli({"design", "--config", cfg.string(), "--out", (dir_ / "a").string()}), kOk) << err_.str();
    ASSERT_EQ(cli({"design", "--config", cfg.string(), "--out", (dir_ / "b").string()}), kOk) << err_.str();
    EXPECT_EQ(slurp(dir_ / "a" / "gains.txt"), slurp(dir_ / "b" / "gains.txt"));
    ASSERT_EQ(cli({"design", "--config", cfg.string(), "--seed", "99", "--out", (dir_ / "c").string()}), kOk);
    EXPECT_NE(slurp(dir_ / "a" / "gains.txt"), slurp(dir_ / "c" / "gains.txt"));
    EXPECT_EQ(read_json(dir_ / "c" / "report.json")["seed"].get<std::uint64_t>(), 99u);
}
