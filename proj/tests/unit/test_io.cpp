#include <filesystem>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "polyheat/error.hpp"
#include "polyheat/io.hpp"

using namespace polyheat;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("polyheat-unit-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("doubles survive the decimal round trip") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 2000; ++i) {
      const std::uint64_t b = bits(rng);
      double x;
      std::memcpy(&x, &b, sizeof x);
      if (!std::isfinite(x)) continue;
      CHECK(parse_double(format_double(x)) == x);
    }
    CHECK(std::isnan(parse_double(format_double(std::nan("")))));
    CHECK_THROWS_AS(parse_double("1.5x"), IoError);
  }

  TEST_CASE("config parsing is strict") {
    const RunConfig c = parse_config("model.m = 2\nmodel.p = 6  # comment\nsolver.L = 30\n\n");
    CHECK(c.p.value() == 6.0);
    CHECK(c.L == 30.0);
    CHECK_THROWS_AS(parse_config("model.q = 1\n"), SchemaError);
    CHECK_THROWS_AS(parse_config("model.m = 2\nmodel.m = 2\n"), SchemaError);
    CHECK_THROWS_AS(parse_config("model.m 2\n"), SchemaError);
    CHECK_THROWS_AS(parse_config("solver.newton_tol = 1e-3\n"), DomainError);
    CHECK_THROWS_AS(parse_config("output.formats = csv, xml\n"), SchemaError);
  }

  TEST_CASE("config hash tracks results, not the output location") {
    RunConfig a, b;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.directory = "/elsewhere";
    CHECK(a.hash() == b.hash());
    b.ds = 0.02;
    CHECK(a.hash() != b.hash());
    const fs::path d = scratch_dir("config");
    write_config(b, d / "run.cfg");
    CHECK(read_config(d / "run.cfg").hash() == b.hash());
  }

  TEST_CASE("profile round trip is bit-exact") {
    const fs::path d = scratch_dir("profile");
    const Profile& p = fixtures::f0_p6();
    write_profile(d / "f0.json", p, "abc");
    CHECK(fs::exists(d / "f0.csv"));
    const Profile q = read_profile(d / "f0.json");
    CHECK(q.values == p.values);
    CHECK(q.grid == p.grid);
    CHECK(q.params.p() == p.params.p());
    CHECK(q.diag.mass == p.diag.mass);
    CHECK(q.diag.p_mass == p.diag.p_mass);
    CHECK(q.diag.mass_identity_residual == p.diag.mass_identity_residual);
    CHECK(q.diag.tail.alpha == p.diag.tail.alpha);
    CHECK(q.diag.tail.C2 == p.diag.tail.C2);
    CHECK(q.stats.residual_history == p.stats.residual_history);
    const nlohmann::json j = read_json(d / "f0.json");
    CHECK(j.at("config_hash") == "abc");
    CHECK(j.at("tool_version") == tool_version());
    for (const auto& e : fs::directory_iterator(d)) CHECK(e.path().string().find(".tmp.") == std::string::npos);
  }

  TEST_CASE("branch manifest with 1000 points stays ordered") {
    Branch b;
    b.grid = fixtures::half32();
    b.states.resize(1000);
    for (int i = 0; i < 1000; ++i) {
      BranchPoint pt;
      pt.p = 5.0 + 1e-3 * i + 1e-17 * i;
      pt.sup_norm = std::sqrt(1.0 + i);
      pt.arclength = 0.1 * i;
      b.points.push_back(pt);
    }
    b.states.front() = std::vector<double>(b.grid.n(), 0.25);
    b.folds.push_back({500, 5.4, 5.6, false, "synthetic"});
    b.end.kind = EndpointKind::DomainLimit;
    const fs::path d = scratch_dir("branch");
    write_branch(d / "b.json", b, "h");
    const Branch c = read_branch(d / "b.json");
    REQUIRE(c.points.size() == 1000);
    for (int i = 0; i < 1000; ++i) {
      CHECK(c.points[i].p == b.points[i].p);
      CHECK(c.points[i].sup_norm == b.points[i].sup_norm);
    }
    CHECK(c.states.front() == b.states.front());
    CHECK(c.folds.front().index == 500);
    CHECK(c.end.kind == EndpointKind::DomainLimit);
  }

  TEST_CASE("kernel table round trip") {
    const KernelTable t = build_kernel_table(ModelParams::linear(2, 1), 48.0, 801, 3);
    const fs::path d = scratch_dir("kernel");
    write_kernel_table(d / "k.json", t, "h");
    const KernelTable u = read_kernel_table(d / "k.json");
    CHECK(u.nodes_y() == t.nodes_y());
    for (int k = 0; k <= 3; ++k) CHECK(u.column(k) == t.column(k));
    CHECK(u.mass() == t.mass());
    CHECK(u.decay().alpha == t.decay().alpha);
    CHECK(u.quadrature_error() == t.quadrature_error());
  }

  TEST_CASE("schema mismatch raises a migration error") {
    const fs::path d = scratch_dir("schema");
    nlohmann::json j = artifact_header("profile", "h");
    j["schema_version"] = 0;
    write_json(d / "old.json", j);
    CHECK_THROWS_AS(read_profile(d / "old.json"), SchemaError);
    write_json(d / "kind.json", artifact_header("branch", "h"));
    CHECK_THROWS_AS(read_profile(d / "kind.json"), SchemaError);
    CHECK_THROWS_AS(read_profile(d / "missing.json"), IoError);
  }

  TEST_CASE("CSV round trip keeps comments and full precision") {
    CsvTable t;
    t.columns = {"a", "b"};
    t.rows = {{0.1, 1.0 / 3.0}, {-2.5e-300, 7.0}};
    t.comments = {"note"};
    const CsvTable u = parse_csv(to_csv(t));
    CHECK(u.columns == t.columns);
    CHECK(u.rows == t.rows);
    CHECK(u.comments == t.comments);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), IoError);
  }
}
