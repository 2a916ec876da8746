#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polyheat/continuation.hpp"
#include "polyheat/dynamics.hpp"
#include "polyheat/kernel.hpp"
#include "polyheat/profile.hpp"

namespace polyheat {

inline constexpr int kSchemaVersion = 1;
const char* tool_version();

/// Run configuration read from a strict key = value file.
struct RunConfig {
  // model
  int m = 2;
  int N = 1;
  std::optional<double> p;
  double p_min = 1.05;
  double p_max = 200.0;
  // kernel
  double kernel_L = 0.0;  // 0 selects default_kernel_length(m, N)
  int kernel_nodes = 2001;
  int kernel_kmax = 8;
  // solver
  double L = 32.0;
  int nodes = 2667;  // nodes of the half-line grid; full-line grids use 2 * nodes - 1
  double newton_tol = 1e-10;
  double eps_reg = 1e-12;
  int max_iterations = 200;
  int max_halvings = 40;
  // continuation
  double ds = 0.01;
  double ds_min = 1e-4;
  double ds_max = 0.05;
  double endpoint_tol = 0.01;
  double amp_stop = 1e-3;
  int max_points = 20000;
  // output
  std::string directory;  // empty: POLYHEAT_OUT or the working directory
  std::vector<std::string> formats{"csv", "json"};

  /// Every key and value in canonical form (sorted keys, full precision).
  std::map<std::string, std::string> canonical() const;
  /// FNV-1a 64-bit hash of the canonical form, as 16 hex digits.
  std::string hash() const;
  void validate() const;

  SolverOptions solver_options() const;
  ContinuationOptions continuation_options() const;
  Grid grid(Symmetry s) const;
  std::filesystem::path output_directory() const;
};

/// Parses key = value lines; '#' starts a comment. Unknown keys, duplicate
/// keys, malformed lines and out-of-range values raise errors.
RunConfig parse_config(const std::string& text);
RunConfig read_config(const std::filesystem::path& path);
void write_config(const RunConfig& cfg, const std::filesystem::path& path);
/// Applies one key = value assignment (used by parsers and CLI overrides).
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

std::uint64_t fnv1a64(const std::string& s);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);
double parse_double(const std::string& s);

/// Writes through a temporary file in the same directory followed by a rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Common header stored in every artifact.
nlohmann::json artifact_header(const std::string& kind, const std::string& config_hash);
/// Checks kind and schema version; throws SchemaError on mismatch.
void check_header(const nlohmann::json& j, const std::string& kind);

nlohmann::json to_json(const KernelTable& t);
KernelTable kernel_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Profile& p);
Profile profile_from_json(const nlohmann::json& j);
/// Branch manifest. States are embedded only for points flagged in keep_state
/// (empty: the points around folds and both endpoints).
nlohmann::json to_json(const Branch& b, const std::vector<bool>& keep_state = {});
Branch branch_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Trajectory& t, bool with_states = false);
Trajectory trajectory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CentreTrajectory& t);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// CSV with '#' header lines for provenance, then a column header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> comments;  // written as "# ..." lines
};
std::string to_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& t, const std::string& config_hash);

CsvTable profile_csv(const Profile& p);
CsvTable branch_csv(const Branch& b);

void write_kernel_table(const std::filesystem::path& path, const KernelTable& t, const std::string& config_hash);
KernelTable read_kernel_table(const std::filesystem::path& path);
/// Writes <stem>.json (full object) and <stem>.csv (y, f).
void write_profile(const std::filesystem::path& json_path, const Profile& p, const std::string& config_hash);
Profile read_profile(const std::filesystem::path& json_path);
void write_branch(const std::filesystem::path& json_path, const Branch& b, const std::string& config_hash);
Branch read_branch(const std::filesystem::path& json_path);
void write_trajectory(const std::filesystem::path& path, const Trajectory& t, const std::string& config_hash);
Trajectory read_trajectory(const std::filesystem::path& path);

}  // namespace polyheat
