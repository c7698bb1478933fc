#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpnls/commands.hpp"

using namespace dpnls;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("dpnls_test_report_" + name);
    fs::remove_all(d);
    return d;
}

RunConfig solve_config(const fs::path& dir) {
    RunConfig c;
    c.p = 2.5;
    c.omega = 1e-2;
    c.out_dir = dir.string();
    return c;
}

}  // namespace

TEST(Format, RoundTripPrecision) {
    for (double x : {0.1, 1.0 / 3.0, 4.27366406832304, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(fmt17(x)), x);
}

TEST(Format, Sha256KnownDigest) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Config, RoundTripThroughJson) {
    RunConfig c;
    c.p = 1.5;
    c.omega_list = {1e-2, 1e-3};
    c.M_range = std::make_pair(0.5, 20.0);
    c.spectral.n = 256;
    c.formats = {"json"};
    const RunConfig d = config_from_json(to_json(c));
    EXPECT_EQ(to_json(d).dump(), to_json(c).dump());
    EXPECT_EQ(config_hash(c), config_hash(d));
}

TEST(Config, RejectsInvalidSettings) {
    RunConfig c;
    c.p = 7.0;
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = RunConfig{};
    c.omega_list = {1e-3, 1e-2};
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = RunConfig{};
    c.formats = {"xml"};
    EXPECT_THROW(c.validate(), ConfigurationError);
    c = RunConfig{};
    c.tol.ode_rel = 0.5;
    EXPECT_THROW(c.validate(), ConfigurationError);
    EXPECT_THROW(config_from_json(nlohmann::json{{"p", "two"}}), ConfigurationError);
    EXPECT_THROW(config_from_json(nlohmann::json{{"M_range", {1.0}}}), ConfigurationError);
}

TEST(Config, MissingFileIsConfigurationError) {
    EXPECT_THROW(load_config("/nonexistent/dpnls.json"), ConfigurationError);
}

TEST(Csv, FixedColumns) {
    const auto& cols = solutions_columns();
    EXPECT_EQ(cols.size(), 21u);
    EXPECT_EQ(solutions_csv({}, {}), join(cols) + "\n");
}

TEST(Commands, SolveIsDeterministicAndManifestValidates) {
    const fs::path a = scratch("a"), b = scratch("b");
    std::ostringstream log;
    ASSERT_EQ(cmd_solve(solve_config(a), log), Success) << log.str();
    ASSERT_EQ(cmd_solve(solve_config(b), log), Success) << log.str();
    for (const char* f : {"solutions.csv", "solutions.json", "spectra.json"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    }
    EXPECT_TRUE(verify_manifest(a).empty());
    const auto manifest = nlohmann::json::parse(read_file(a / "MANIFEST.json"));
    EXPECT_TRUE(manifest.at("complete").get<bool>());
    EXPECT_EQ(manifest.at("tool_version").get<std::string>(), tool_version);

    std::ofstream(a / "solutions.csv", std::ios::app) << "tampered\n";
    EXPECT_EQ(verify_manifest(a), std::vector<std::string>{"solutions.csv"});
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Commands, NoSolutionsIsSuccess) {
    const fs::path d = scratch("none");
    RunConfig c = solve_config(d);
    c.omega = 1e3;
    std::ostringstream log;
    EXPECT_EQ(cmd_solve(c, log), Success);
    EXPECT_NE(read_file(d / "summary.txt").find("no positive solutions"), std::string::npos);
    EXPECT_TRUE(verify_manifest(d).empty());
    fs::remove_all(d);
}

TEST(Commands, BadConfigurationExitCode) {
    RunConfig c = solve_config(scratch("bad"));
    c.p = 6.0;
    std::ostringstream log;
    EXPECT_EQ(cmd_solve(c, log), ConfigError);
    c = solve_config(scratch("bad"));
    c.omega.reset();
    EXPECT_EQ(cmd_solve(c, log), ConfigError);
}

TEST(Commands, TalentiNorms) {
    std::ostringstream log;
    EXPECT_EQ(cmd_talenti({4.0, 6.0}, log), Success);
    EXPECT_NE(log.str().find("12.82099220496"), std::string::npos) << log.str();
}

TEST(Commands, SeverityOrder) {
    EXPECT_EQ(detail::worse(Success, Undecided), Undecided);
    EXPECT_EQ(detail::worse(Undecided, VerificationFailure), VerificationFailure);
    EXPECT_EQ(detail::worse(VerificationFailure, Success), VerificationFailure);
}
