#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "agediff/scenario_file.hpp"
#include "json.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace agediff;
namespace fs = std::filesystem;

namespace {

const std::string kScalarScenario =
    "# two-rate scalar model\n"
    "[grid]\n"
    "backend = matrix\n"
    "a_max = 1\n"
    "n_age = 100\n"
    "n_cells = 1\n"
    "\n"
    "[coefficients]\n"
    "m = 0\n"
    "b = 2\n"
    "\n"
    "[run]\n"
    "T = 1\n"
    "stride = 20\n";

void expect_parse_error(const std::string& text, const char* fragment) {
    CHECK_THROWS_WITH_AS(parse_scenario_text(text, "t.scn"),
                         doctest::Contains(fragment), Error);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("agediff-harness-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

int run_cli(const std::string& args, const fs::path& capture) {
    const std::string cmd = std::string("\"") + AGEDIFF_CLI_PATH + "\" " +
                            args + " > \"" + capture.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("scenario text round trip") {
    const ParsedScenario p = parse_scenario_text(kScalarScenario, "inline");
    CHECK(p.config.backend == Backend::matrix);
    CHECK(p.config.age.a_max == 1.0);
    CHECK(p.config.age.n_age == 100);
    CHECK(p.config.space.n_cells == 1);
    CHECK_FALSE(p.config.infinite_age);
    CHECK(p.run.T == 1.0);
    CHECK(p.run.stride == 20);
    CHECK(p.m_src == "0");
    CHECK(p.b_src == "2");
    CHECK(p.d_src.empty());
    CHECK(p.source_text == kScalarScenario);
    CHECK(p.source_hash == fnv1a64(kScalarScenario));
    CHECK(p.config.coeffs.b_birth(0.3, 0.0) == 2.0);
    CHECK(p.config.coeffs.m_death(0.3, 0.0) == 0.0);
    CHECK_NOTHROW(build_scenario(p.config));
}

TEST_CASE("scenario defaults: mortality, run block, and backend") {
    const ParsedScenario p = parse_scenario_text(
        "[grid]\na_max = 2\nn_age = 10\n[coefficients]\nb = 1\n", "inline");
    CHECK(p.config.backend == Backend::matrix);
    CHECK(p.config.age.a_max == 2.0);
    CHECK(p.m_src == "0");
    CHECK(p.run.T == 1.0);
    CHECK(p.run.stride == 1);
}

TEST_CASE("diffusion scenario with spatial expressions") {
    const ParsedScenario p = parse_scenario_text(
        "[grid]\n"
        "backend = diffusion1d\n"
        "a_max = 1\n"
        "n_age = 50\n"
        "x_min = 0\n"
        "x_max = 2\n"
        "n = 8   # cell-count alias\n"
        "[coefficients]\n"
        "d = 0.1*(1+0.5*x)\n"
        "m = 0.2*a\n"
        "b = exp(-a)\n",
        "inline");
    CHECK(p.config.backend == Backend::diffusion1d);
    CHECK(p.config.space.x_max == 2.0);
    CHECK(p.config.space.n_cells == 8);
    CHECK_FALSE(p.d_src.empty());
    CHECK(p.config.coeffs.d(0.0, 1.0) == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(p.config.coeffs.m_death(0.5, 0.0) ==
          doctest::Approx(0.1).epsilon(1e-15));
    CHECK(p.config.coeffs.b_birth(1.0, 0.0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK_NOTHROW(build_scenario(p.config));
}

TEST_CASE("parser diagnostics carry origin and line") {
    expect_parse_error("[grid\n", "t.scn:1: malformed section header");
    expect_parse_error("[orbit]\n", "unknown section [orbit]");
    expect_parse_error("[grid]\n[grid]\n", "t.scn:2: duplicate section");
    expect_parse_error("a_max = 1\n", "key outside of any section");
    expect_parse_error("[grid]\na_max 1\n", "expected 'key = value'");
    expect_parse_error("[grid]\n = 1\n", "missing key before '='");
    expect_parse_error("[grid]\na_max =\n", "missing value for 'a_max'");
    expect_parse_error("[grid]\nshape = 3\n", "unknown key 'shape'");
    expect_parse_error("[grid]\na_max = 1\na_max = 2\n",
                       "t.scn:3: duplicate key 'a_max'");
    expect_parse_error("[grid]\na_max = one\n", "expected a number");
    expect_parse_error("[grid]\na_max = 1\nn_age = 2.5\n",
                       "expected an integer");
    expect_parse_error(
        "[grid]\na_max = 1\nn_age = 10\ninfinite_age = maybe\n"
        "[coefficients]\nb = 1\n",
        "expected true or false");
    expect_parse_error("[grid]\nbackend = spectralized\n", "unknown backend");
    expect_parse_error("[grid]\nn_age = 10\n[coefficients]\nb = 1\n",
                       "missing required key 'grid.a_max'");
    expect_parse_error("[grid]\na_max = 1\nn_age = 1\n",
                       "n_age must be at least 2");
    expect_parse_error("[grid]\na_max = 1\nn_age = 10\n",
                       "missing required key 'coefficients.b'");
    expect_parse_error(
        "[grid]\na_max = 1\nn_age = 10\nn_cells = 2\nn = 2\n"
        "[coefficients]\nb = 1\n",
        "give either n_cells or n, not both");
    expect_parse_error(
        "[grid]\nbackend = diffusion1d\na_max = 1\nn_age = 10\n"
        "[coefficients]\nb = 1\n",
        "missing required key 'grid.n_cells'");
    expect_parse_error(
        "[grid]\nbackend = diffusion1d\na_max = 1\nn_age = 10\nn_cells = 4\n"
        "[coefficients]\nb = 1\n",
        "missing required key 'coefficients.d'");
    expect_parse_error(
        "[grid]\na_max = 1\nn_age = 10\n[coefficients]\nb = 1\nd = 0.1\n",
        "only meaningful for backend = diffusion1d");
    expect_parse_error(
        "[grid]\na_max = 1\nn_age = 10\n[coefficients]\nb = 1\n[run]\nT = 0\n",
        "T must be positive");
    expect_parse_error(
        "[grid]\na_max = 1\nn_age = 10\n[coefficients]\nb = 1\n"
        "[run]\nstride = 0\n",
        "stride must be at least 1");
}

TEST_CASE("expression diagnostics point into the scenario file") {
    try {
        parse_scenario_text(
            "[grid]\na_max = 1\nn_age = 10\n[coefficients]\nb = 1 +\n",
            "t.scn");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        const std::string what = e.what();
        CHECK(what.find("t.scn") != std::string::npos);
        CHECK(what.find("expression error at line 5") != std::string::npos);
        CHECK(what.find("unexpected end of expression") != std::string::npos);
    }
}

TEST_CASE("content hashing is the reference FNV-1a") {
    CHECK(fnv1a64("") == 14695981039346656037ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64(kScalarScenario) != fnv1a64(kScalarScenario + " "));
}

TEST_CASE("loading a missing scenario file") {
    CHECK_THROWS_WITH_AS(load_scenario("/nonexistent/missing.scn"),
                         doctest::Contains("cannot open scenario file"),
                         Error);
}

TEST_CASE("command line: usage errors exit with 2, help with 0") {
    TempDir tmp;
    CHECK(run_cli("", tmp.path / "noargs.txt") == 2);
    CHECK(run_cli("--help", tmp.path / "help.txt") == 0);
    CHECK(slurp(tmp.path / "help.txt").find("simulate") != std::string::npos);
    CHECK(run_cli("simulate --scenario /nonexistent/missing.scn",
                  tmp.path / "missing.txt") == 2);

    spit(tmp.path / "broken.scn", "[grid]\na_max = zero\n");
    CHECK(run_cli("simulate --scenario " + (tmp.path / "broken.scn").string(),
                  tmp.path / "broken.txt") == 2);
    CHECK(slurp(tmp.path / "broken.txt").find("error:") != std::string::npos);
}

TEST_CASE("command line: simulate writes a deterministic summary") {
    TempDir tmp;
    const fs::path scn = tmp.path / "scalar.scn";
    spit(scn, kScalarScenario);

    const fs::path csv1 = tmp.path / "run1.csv";
    const fs::path csv2 = tmp.path / "run2.csv";
    CHECK(run_cli("simulate --scenario " + scn.string() + " --out " +
                      csv1.string(),
                  tmp.path / "sim1.txt") == 0);
    CHECK(run_cli("simulate --scenario " + scn.string() + " --out " +
                      csv2.string(),
                  tmp.path / "sim2.txt") == 0);
    const std::string body = slurp(csv1);
    CHECK(body.rfind("t,total_population,boundary_norm\n", 0) == 0);
    // T = 1, 100 steps, stride 20: snapshots at k = 0,20,...,100
    CHECK(std::count(body.begin(), body.end(), '\n') == 7);
    CHECK(body == slurp(csv2));

    // without --out the same table goes to stdout
    CHECK(run_cli("simulate --scenario " + scn.string(),
                  tmp.path / "sim3.txt") == 0);
    CHECK(slurp(tmp.path / "sim3.txt").rfind(
              "t,total_population,boundary_norm\n", 0) == 0);

    // births table covers every renewal step including t = T
    const fs::path births = tmp.path / "births.csv";
    CHECK(run_cli("simulate --scenario " + scn.string() + " --births " +
                      births.string() + " --out /dev/null",
                  tmp.path / "sim4.txt") == 0);
    const std::string btab = slurp(births);
    CHECK(btab.rfind("t,B0\n", 0) == 0);
    CHECK(std::count(btab.begin(), btab.end(), '\n') == 102);
    CHECK(btab.find("\n1,") != std::string::npos);
}

TEST_CASE("command line: simulate report embeds grid and hash") {
    TempDir tmp;
    const fs::path scn = tmp.path / "scalar.scn";
    spit(scn, kScalarScenario);
    const fs::path rep = tmp.path / "report.json";
    CHECK(run_cli("simulate --scenario " + scn.string() + " --report " +
                      rep.string() + " --out " + (tmp.path / "s.csv").string(),
                  tmp.path / "simrep.txt") == 0);
    const nlohmann::json j = nlohmann::json::parse(slurp(rep));
    CHECK(j["meta"]["backend"] == "matrix");
    CHECK(j["meta"]["grid"]["n_age"] == 100);
    CHECK(j["meta"]["run"]["T"] == 1.0);
    const std::string got = j["meta"]["scenario_hash"].get<std::string>();
    REQUIRE(got.substr(0, 2) == "0x");
    CHECK(std::stoull(got.substr(2), nullptr, 16) ==
          fnv1a64(kScalarScenario));
    CHECK(j["simulate"]["final_total_population"].is_number());
    CHECK(j["simulate"]["mode"] == "linear");
}

TEST_CASE("command line: grid override by step width") {
    TempDir tmp;
    const fs::path scn = tmp.path / "scalar.scn";
    spit(scn, kScalarScenario);
    const fs::path rep = tmp.path / "report.json";
    CHECK(run_cli("simulate --scenario " + scn.string() +
                      " --delta 0.02 --report " + rep.string() + " --out " +
                      (tmp.path / "s.csv").string(),
                  tmp.path / "o1.txt") == 0);
    const nlohmann::json j = nlohmann::json::parse(slurp(rep));
    CHECK(j["meta"]["grid"]["n_age"] == 50);
    CHECK(j["meta"]["grid"]["delta"] == 0.02);
    CHECK(run_cli("simulate --scenario " + scn.string() + " --delta 0.03",
                  tmp.path / "o2.txt") == 2);
}

TEST_CASE("command line: spectral, classify, aeg, resolvent-check") {
    TempDir tmp;
    const fs::path scn = tmp.path / "scalar.scn";
    spit(scn, kScalarScenario);

    const fs::path specout = tmp.path / "spectral.json";
    CHECK(run_cli("spectral --scenario " + scn.string() + " --out " +
                      specout.string(),
                  tmp.path / "sp.txt") == 0);
    const nlohmann::json js = nlohmann::json::parse(slurp(specout));
    CHECK(std::abs(js["spectral"]["lambda0"].get<double>() -
                   1.5936242600400399) <= 5e-3);
    CHECK(std::abs(js["spectral"]["r_of_Q0"].get<double>() - 2.0) <= 1e-9);
    CHECK(js["spectral"]["root_tol"].is_number());

    const fs::path cls = tmp.path / "classify.json";
    CHECK(run_cli("classify --scenario " + scn.string() + " --out " +
                      cls.string(),
                  tmp.path / "cl.txt") == 0);
    const nlohmann::json jc = nlohmann::json::parse(slurp(cls));
    CHECK(jc["trichotomy"]["verdict"] == "unstable");
    CHECK(jc["trichotomy"]["lambda0"].is_number());

    CHECK(run_cli("aeg --scenario " + scn.string() + " --T 4 --stride 100",
                  tmp.path / "aeg.txt") == 0);

    const fs::path res = tmp.path / "resolvent.json";
    CHECK(run_cli("resolvent-check --scenario " + scn.string() +
                      " --lambda 3.0 --out " + res.string(),
                  tmp.path / "rc.txt") == 0);
    const nlohmann::json jr = nlohmann::json::parse(slurp(res));
    CHECK(jr["resolvent"]["passed"] == true);
    CHECK(jr["resolvent"]["mild_residual"].get<double>() <= 1e-10);

    // exit code mirrors the pass flag whatever the tolerance
    const fs::path res0 = tmp.path / "resolvent0.json";
    const int rc = run_cli("resolvent-check --scenario " + scn.string() +
                               " --lambda 3.0 --tol 0 --out " + res0.string(),
                           tmp.path / "rc0.txt");
    const nlohmann::json jr0 = nlohmann::json::parse(slurp(res0));
    CHECK(rc == (jr0["resolvent"]["passed"].get<bool>() ? 0 : 1));
}
