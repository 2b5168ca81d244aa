// End-to-end tests of the finsler2d executable: flag handling, output
// formats, the documented exit-code contract, and the bundled examples.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr combined
};

std::string temp_path(const char* tag) {
    static int counter = 0;
    return std::string("cli_out_") + tag + "_" + std::to_string(counter++) + ".txt";
}

RunResult run_tool(const std::string& args) {
    std::string path = temp_path("run");
    std::string cmd = std::string(TOOL_PATH) + " " + args + " > " + path + " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
#ifdef _WIN32
    r.exit_code = status;
#else
    r.exit_code = WEXITSTATUS(status);
#endif
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    std::remove(path.c_str());
    return r;
}

std::string config(const char* name) {
    return std::string(CONFIG_DIR) + "/" + name + ".toml";
}

} // namespace

TEST_CASE("eval prints the reference spray at the reference point") {
    RunResult r = run_tool("eval --metric " + config("funk") + " --point 0,0,1,1 --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j["metric"] == "funk");
    REQUIRE(j["points"].size() == 1);
    const auto& entry = j["points"][0];
    CHECK(entry["base"]["G"][0].get<double>() == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(entry["base"]["G"][1].get<double>() == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(entry["rescaled"]["G"][0].get<double>() == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(entry["rescaled"]["G"][1].get<double>() == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(entry["rescaled"]["P"].get<double>() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(entry["rescaled"]["Q"].get<double>() == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("eval on the flat norm reports vanishing main scalar and curvature") {
    RunResult r =
        run_tool("eval --metric " + config("euclid") + " --point 0,0,1,0.4 --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    const auto& base = j["points"][0]["base"];
    CHECK(std::fabs(base["main_scalar"].get<double>()) < 1e-12);
    CHECK(std::fabs(base["gauss_curvature"].get<double>()) < 1e-12);
}

TEST_CASE("classify on the affinely rigid counterexample: verdicts, exit 0") {
    RunResult r = run_tool("classify --metric " + config("berwald-rund") +
                           " --suite full --count 15 --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j["identities_pass"] == true);
    CHECK(j["classifications"]["bar.berwald"] == true);
    CHECK(j["classifications"]["metrizable"] == false);
}

TEST_CASE("classification verdicts are stable across seeds") {
    std::string base_args = "classify --metric " + config("funk") +
                            " --suite classify --count 200 --format json --seed ";
    RunResult a = run_tool(base_args + "1");
    RunResult b = run_tool(base_args + "2");
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    nlohmann::json ja = nlohmann::json::parse(a.output);
    nlohmann::json jb = nlohmann::json::parse(b.output);
    CHECK(ja["classifications"] == jb["classifications"]);
    CHECK(ja["points"]["sampled"] == 200);
}

TEST_CASE("verify on the flat norm passes with tiny residuals") {
    RunResult r =
        run_tool("verify --metric " + config("euclid") + " --count 25 --format json");
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(r.output);
    CHECK(j["suite"] == "identities");
    CHECK(j["identities_pass"] == true);
    for (const auto& c : j["checks"]) {
        if (c["points"].get<int>() == 0) continue;  // vacuous gated checks
        CHECK(c["residual"]["max_normalized"].get<double>() < 1e-12);
    }
}

TEST_CASE("verify honors a threshold override") {
    RunResult strict = run_tool("verify --metric " + config("euclid") +
                                " --count 10 --threshold 1e-30");
    CHECK(strict.exit_code == 1);  // nothing is exact to 1e-30
    RunResult loose =
        run_tool("verify --metric " + config("euclid") + " --count 10 --threshold 1e-3");
    CHECK(loose.exit_code == 0);
}

TEST_CASE("bundled examples run by name") {
    RunResult funk = run_tool("example funk --count 15 --format json");
    REQUIRE(funk.exit_code == 0);
    nlohmann::json jf = nlohmann::json::parse(funk.output);
    CHECK(jf["classifications"]["metrizable"] == true);
    CHECK(jf["classifications"]["bar.spray-preserved"] == true);

    RunResult br = run_tool("example berwald-rund --count 15 --format json");
    REQUIRE(br.exit_code == 0);
    nlohmann::json jb = nlohmann::json::parse(br.output);
    CHECK(jb["classifications"]["metrizable"] == false);
    CHECK(jb["classifications"]["bar.berwald"] == true);
}

TEST_CASE("exit code 2: input problems") {
    CHECK(run_tool("example atlantis").exit_code == 2);
    CHECK(run_tool("eval --metric does_not_exist.toml").exit_code == 2);
    CHECK(run_tool("eval --metric " + config("funk") + " --point 9,9,1,1").exit_code == 2);
    CHECK(run_tool("eval --metric " + config("funk") + " --point 1,2,3").exit_code == 2);
    CHECK(run_tool("classify --metric " + config("funk") + " --suite nope").exit_code == 2);
    CHECK(run_tool("nonsense-subcommand").exit_code == 2);
}

TEST_CASE("exit code 2: malformed metric file with a span diagnostic") {
    std::string path = temp_path("broken");
    {
        std::ofstream out(path);
        out << "name = \"broken\"\nF = \"sqrt(y1^2 + \"\n";
    }
    RunResult r = run_tool("eval --metric " + path + " --point 0,0,1,1");
    std::remove(path.c_str());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("exit code 3: degree budget exhaustion names the operator chain") {
    RunResult r =
        run_tool("eval --metric " + config("funk") + " --point 0,0,1,1 --degree 3");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("degree") != std::string::npos);
    CHECK(r.output.find("requested by") != std::string::npos);
}

TEST_CASE("reports can be written to a file") {
    std::string path = temp_path("report");
    RunResult r = run_tool("classify --metric " + config("euclid") +
                           " --suite classify --count 5 --format json --out " + path);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.empty());
    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j["metric"] == "euclid");
    std::remove(path.c_str());
}

TEST_CASE("--version and --help exit cleanly") {
    RunResult v = run_tool("--version");
    CHECK(v.exit_code == 0);
    CHECK(v.output.find("1.0.0") != std::string::npos);
    RunResult h = run_tool("--help");
    CHECK(h.exit_code == 0);
    CHECK(h.output.find("eval") != std::string::npos);
    CHECK(h.output.find("classify") != std::string::npos);
}
