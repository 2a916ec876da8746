#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "polyheat/cli.hpp"
#include "polyheat/io.hpp"

using namespace polyheat;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "polyheat");
  std::ostringstream o, e;
  const int s = run_command(args, o, e);
  return {s, o.str(), e.str()};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).status == kExitUsage);
    CHECK(run({"frobnicate"}).status == kExitUsage);
    CHECK(run({"kappa"}).status == kExitUsage);  // --l is required
    CHECK(run({"solve", "--p", "6", "--seed", "auto:l=0", "--symmetry", "odd"}).status == kExitUsage);
    CHECK(run({"repro", "fig0"}).status == kExitUsage);
    CHECK(run({"--set", "nonsense", "spectrum"}).status == kExitUsage);
    CHECK(run({"--help"}).status == kExitOk);
  }

  TEST_CASE("numerical and I/O failures exit with 1 and a JSON report") {
    const Run r = run({"solve", "--p", "6", "--seed", "/nonexistent/seed.csv"});
    CHECK(r.status == kExitFailure);
    const auto j = nlohmann::json::parse(r.err);
    CHECK(j.at("status") == "error");
    CHECK(j.at("error") == "io");
    CHECK(j.at("command") == "solve");
  }

  TEST_CASE("spectrum and kappa print full-precision JSON") {
    const Run s = run({"--json", "spectrum", "--lmax", "4"});
    REQUIRE(s.status == kExitOk);
    const auto j = nlohmann::json::parse(s.out);
    CHECK(j.at("modes").size() == 5);
    CHECK(j.at("modes")[2].at("p_l") == "7/3");
    const Run k = run({"--json", "kappa", "--l", "0", "--p", "5"});
    REQUIRE(k.status == kExitOk);
    CHECK(nlohmann::json::parse(k.out).at("kappa").get<double>() == doctest::Approx(0.0037739697943644).epsilon(1e-9));
  }

  TEST_CASE("solve, continue and fold through files") {
    const fs::path d = fs::temp_directory_path() / "polyheat-unit-cli";
    fs::remove_all(d);
    fs::create_directories(d);
    const std::string dir = "output.directory=" + d.string();
    REQUIRE(run({"--set", dir, "solve", "--p", "6", "--seed", "auto:l=0", "--out", "f.csv"}).status == kExitOk);
    CHECK(fs::exists(d / "f.csv"));
    CHECK(fs::exists(d / "f.json"));
    const Run c = run({"--set", dir, "continue", "--from", (d / "f.json").string(), "--dir", "+", "--p-max", "6.2",
                       "--out", "b.json"});
    REQUIRE(c.status == kExitOk);
    const Branch b = read_branch(d / "b.json");
    CHECK(b.points.back().p == doctest::Approx(6.2));
    CHECK(run({"--set", dir, "fold", "--branch", (d / "b.json").string()}).status == kExitOk);
    // seed from the CSV written above reproduces the same profile
    REQUIRE(run({"--set", dir, "solve", "--p", "6", "--seed", (d / "f.csv").string(), "--out", "g.csv"}).status ==
            kExitOk);
    CHECK(read_profile(d / "g.json").diag.f_at_0 == doctest::Approx(read_profile(d / "f.json").diag.f_at_0));
  }

  TEST_CASE("POLYHEAT_OUT sets the default output directory") {
    const fs::path d = fs::temp_directory_path() / "polyheat-unit-env";
    fs::remove_all(d);
    fs::create_directories(d);
    ::setenv("POLYHEAT_OUT", d.string().c_str(), 1);
    const Run r = run({"centre-ode", "--kappa", "0.0037739697943644", "--p", "5", "--a0", "-1", "--tau-end", "100",
                       "--out", "c.csv"});
    ::unsetenv("POLYHEAT_OUT");
    CHECK(r.status == kExitOk);
    CHECK(fs::exists(d / "c.csv"));
  }

  TEST_CASE("repro lists every figure") {
    const Run r = run({"repro", "--list"});
    CHECK(r.status == kExitOk);
    CHECK(r.out.find("fig15") != std::string::npos);
  }
}
