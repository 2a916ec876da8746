#include "polyheat/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "polyheat/error.hpp"

namespace polyheat {

using nlohmann::json;
namespace fs = std::filesystem;

const char* tool_version() { return POLYHEAT_VERSION; }

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e) throw IoError("not a number: '" + s + "'");
  return x;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& s) {
  int x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("not an integer: '" + s + "'");
  return x;
}

// JSON cannot hold NaN or infinities; they are stored as strings.
json num(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

double get_num(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

json num_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> get_array(const json& j) {
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(get_num(x));
  return v;
}

json grid_json(const Grid& g) { return json{{"half", g.half()}, {"L", g.L()}, {"n", g.n()}}; }
Grid grid_from(const json& j) {
  return Grid::make_unchecked(j.at("half").get<bool>(), j.at("L").get<double>(), j.at("n").get<int>());
}

json model_json(int m, int N) { return json{{"m", m}, {"N", N}}; }

}  // namespace

// ---------------------------------------------------------------- config

std::map<std::string, std::string> RunConfig::canonical() const {
  std::map<std::string, std::string> c;
  c["model.m"] = std::to_string(m);
  c["model.N"] = std::to_string(N);
  c["model.p"] = p ? format_double(*p) : "";
  c["model.p_min"] = format_double(p_min);
  c["model.p_max"] = format_double(p_max);
  c["kernel.L"] = format_double(kernel_L);
  c["kernel.nodes"] = std::to_string(kernel_nodes);
  c["kernel.kmax"] = std::to_string(kernel_kmax);
  c["solver.L"] = format_double(L);
  c["solver.nodes"] = std::to_string(nodes);
  c["solver.newton_tol"] = format_double(newton_tol);
  c["solver.eps_reg"] = format_double(eps_reg);
  c["solver.max_iterations"] = std::to_string(max_iterations);
  c["solver.max_halvings"] = std::to_string(max_halvings);
  c["continuation.ds"] = format_double(ds);
  c["continuation.ds_min"] = format_double(ds_min);
  c["continuation.ds_max"] = format_double(ds_max);
  c["continuation.endpoint_tol"] = format_double(endpoint_tol);
  c["continuation.amp_stop"] = format_double(amp_stop);
  c["continuation.max_points"] = std::to_string(max_points);
  c["output.directory"] = directory;
  std::string f;
  for (std::size_t i = 0; i < formats.size(); ++i) f += (i ? "," : "") + formats[i];
  c["output.formats"] = f;
  return c;
}

std::string RunConfig::hash() const {
  std::string s;
  for (const auto& [k, v] : canonical()) {
    if (k == "output.directory") continue;  // where results go does not change them
    s += k + "=" + v + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(s)));
  return buf;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "model.m") c.m = parse_int(value);
  else if (key == "model.N") c.N = parse_int(value);
  else if (key == "model.p") c.p = value.empty() ? std::nullopt : std::optional<double>(parse_double(value));
  else if (key == "model.p_min") c.p_min = parse_double(value);
  else if (key == "model.p_max") c.p_max = parse_double(value);
  else if (key == "kernel.L") c.kernel_L = parse_double(value);
  else if (key == "kernel.nodes") c.kernel_nodes = parse_int(value);
  else if (key == "kernel.kmax") c.kernel_kmax = parse_int(value);
  else if (key == "solver.L") c.L = parse_double(value);
  else if (key == "solver.nodes") c.nodes = parse_int(value);
  else if (key == "solver.newton_tol") c.newton_tol = parse_double(value);
  else if (key == "solver.eps_reg") c.eps_reg = parse_double(value);
  else if (key == "solver.max_iterations") c.max_iterations = parse_int(value);
  else if (key == "solver.max_halvings") c.max_halvings = parse_int(value);
  else if (key == "continuation.ds") c.ds = parse_double(value);
  else if (key == "continuation.ds_min") c.ds_min = parse_double(value);
  else if (key == "continuation.ds_max") c.ds_max = parse_double(value);
  else if (key == "continuation.endpoint_tol") c.endpoint_tol = parse_double(value);
  else if (key == "continuation.amp_stop") c.amp_stop = parse_double(value);
  else if (key == "continuation.max_points") c.max_points = parse_int(value);
  else if (key == "output.directory") c.directory = value;
  else if (key == "output.formats") {
    c.formats.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item != "csv" && item != "json") throw SchemaError("unknown output format: " + item);
      c.formats.push_back(item);
    }
  } else {
    throw SchemaError("unknown configuration key: " + key);
  }
}

void RunConfig::validate() const {
  (void)ModelParams::linear(m, N);
  if (p) (void)ModelParams(m, N, *p);
  if (!(p_min > 1.0 && p_min < p_max)) throw DomainError("config: need 1 < p_min < p_max");
  if (kernel_L != 0.0 && !(kernel_L >= 10.0)) throw DomainError("config: kernel.L must be 0 (default) or >= 10");
  if (kernel_nodes < 501) throw DomainError("config: kernel.nodes must be >= 501");
  if (kernel_kmax < 0 || kernel_kmax > 8) throw DomainError("config: kernel.kmax must lie in [0, 8]");
  if (!(L >= 10.0) || nodes < 501) throw DomainError("config: solver grid needs L >= 10 and nodes >= 501");
  (void)solver_options();
  (void)continuation_options();
}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.newton_tol = newton_tol;
  o.eps_reg = eps_reg;
  o.max_iterations = max_iterations;
  o.max_halvings = max_halvings;
  o.validate();
  return o;
}

ContinuationOptions RunConfig::continuation_options() const {
  ContinuationOptions o;
  o.ds = ds;
  o.ds_min = ds_min;
  o.ds_max = ds_max;
  o.p_min = p_min;
  o.p_max = p_max;
  o.endpoint_tol = endpoint_tol;
  o.amp_stop = amp_stop;
  o.max_points = max_points;
  o.solver = solver_options();
  o.validate();
  return o;
}

Grid RunConfig::grid(Symmetry s) const {
  return s == Symmetry::Even ? Grid::half_line(L, nodes) : Grid::full_line(L, 2 * nodes - 1);
}

fs::path RunConfig::output_directory() const {
  if (!directory.empty()) return directory;
  if (const char* env = std::getenv("POLYHEAT_OUT"); env && *env) return env;
  return fs::current_path();
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw SchemaError("config line " + std::to_string(lineno) + ": empty key");
    if (seen.count(key)) throw SchemaError("config line " + std::to_string(lineno) + ": duplicate key " + key);
    seen[key] = lineno;
    try {
      set_config_value(c, key, value);
    } catch (const SchemaError&) {
      throw;
    } catch (const IoError& e) {
      throw SchemaError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig read_config(const fs::path& path) { return parse_config(read_file(path)); }

void write_config(const RunConfig& cfg, const fs::path& path) {
  std::string s = "# polyheat run configuration\n";
  for (const auto& [k, v] : cfg.canonical()) s += k + " = " + v + "\n";
  atomic_write(path, s);
}

// ---------------------------------------------------------------- files

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = dir / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json artifact_header(const std::string& kind, const std::string& config_hash) {
  return json{{"kind", kind}, {"schema_version", kSchemaVersion}, {"tool_version", tool_version()},
              {"config_hash", config_hash}};
}

void check_header(const json& j, const std::string& kind) {
  if (!j.is_object() || !j.contains("kind") || !j.contains("schema_version")) {
    throw SchemaError("artifact header missing (kind, schema_version)");
  }
  if (j.at("kind").get<std::string>() != kind) {
    throw SchemaError("expected a " + kind + " artifact, found " + j.at("kind").get<std::string>());
  }
  const int v = j.at("schema_version").get<int>();
  if (v != kSchemaVersion) {
    throw SchemaError("schema version " + std::to_string(v) + " needs migration to version " +
                      std::to_string(kSchemaVersion) + "; no migration is defined");
  }
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(1) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- CSV

std::string to_csv(const CsvTable& t) {
  std::string s;
  for (const auto& c : t.comments) s += "# " + c + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
  s += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + format_double(r[i]);
    s += "\n";
  }
  return s;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::stringstream ss(text);
  std::string line;
  bool header = false;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(trim(line.substr(1)));
      continue;
    }
    std::stringstream ls(line);
    std::string cell;
    if (!header) {
      while (std::getline(ls, cell, ',')) t.columns.push_back(trim(cell));
      header = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(parse_double(trim(cell)));
    if (row.size() != t.columns.size()) throw IoError("CSV row width differs from the header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(const fs::path& path, const CsvTable& t, const std::string& config_hash) {
  CsvTable c = t;
  c.comments.insert(c.comments.begin(), {"schema_version=" + std::to_string(kSchemaVersion),
                                          std::string("tool_version=") + tool_version(), "config_hash=" + config_hash});
  atomic_write(path, to_csv(c));
}

CsvTable profile_csv(const Profile& p) {
  CsvTable t;
  t.columns = {"y", "f"};
  for (int i = 0; i < p.grid.n(); ++i) t.rows.push_back({p.grid.y(i), p.values[i]});
  t.comments.push_back("m=" + std::to_string(p.params.m()) + " N=" + std::to_string(p.params.N()) +
                       " p=" + format_double(p.params.p()) + " symmetry=" + to_string(p.symmetry));
  return t;
}

CsvTable branch_csv(const Branch& b) {
  CsvTable t;
  t.columns = {"p", "sup_norm", "f_at_0", "mass", "p_mass", "residual", "mass_identity_residual", "arclength"};
  for (const auto& pt : b.points) {
    t.rows.push_back({pt.p, pt.sup_norm, pt.f_at_0, pt.mass, pt.p_mass, pt.residual, pt.mass_identity_residual,
                      pt.arclength});
  }
  t.comments.push_back("m=" + std::to_string(b.m) + " N=" + std::to_string(b.N) +
                       " symmetry=" + to_string(b.symmetry) + " folds=" + std::to_string(b.folds.size()));
  for (const auto& f : b.folds) {
    t.comments.push_back("fold index=" + std::to_string(f.index) + " p_lo=" + format_double(f.p_lo) +
                         " p_hi=" + format_double(f.p_hi));
  }
  return t;
}

// ---------------------------------------------------------------- kernel table

json to_json(const KernelTable& t) {
  json j;
  j["model"] = model_json(t.m(), t.N());
  j["y"] = num_array(t.nodes_y());
  json cols = json::array();
  for (int k = 0; k <= t.kmax(); ++k) cols.push_back(num_array(t.column(k)));
  j["columns"] = cols;
  j["quadrature_error"] = num(t.quadrature_error());
  j["diagnostics"] = json{{"mass", num(t.mass())},
                          {"ode_residual", num(t.ode_residual())},
                          {"decay", {{"D", num(t.decay().D)},
                                     {"d", num(t.decay().d)},
                                     {"alpha", num(t.decay().alpha)},
                                     {"gamma", num(t.decay().gamma)},
                                     {"samples", t.decay().samples},
                                     {"y_lo", num(t.decay().y_lo)},
                                     {"y_hi", num(t.decay().y_hi)}}}};
  return j;
}

KernelTable kernel_table_from_json(const json& j) {
  check_header(j, "kernel-table");
  const int m = j.at("model").at("m").get<int>(), N = j.at("model").at("N").get<int>();
  std::vector<std::vector<double>> cols;
  for (const auto& c : j.at("columns")) cols.push_back(get_array(c));
  return make_kernel_table(ModelParams::linear(m, N), get_array(j.at("y")), std::move(cols),
                           get_num(j.at("quadrature_error")));
}

void write_kernel_table(const fs::path& path, const KernelTable& t, const std::string& config_hash) {
  json j = artifact_header("kernel-table", config_hash);
  j.update(to_json(t));
  write_json(path, j);
}

KernelTable read_kernel_table(const fs::path& path) { return kernel_table_from_json(read_json(path)); }

// ---------------------------------------------------------------- profile

json to_json(const Profile& p) {
  const auto& d = p.diag;
  json j;
  j["model"] = json{{"m", p.params.m()}, {"N", p.params.N()}, {"p", p.params.p()}};
  j["grid"] = grid_json(p.grid);
  j["symmetry"] = to_string(p.symmetry);
  j["seed_provenance"] = p.seed_provenance;
  j["values"] = num_array(p.values);
  const auto& t = d.tail;
  j["diagnostics"] = json{
      {"sup_norm", num(d.sup_norm)},
      {"f_at_0", num(d.f_at_0)},
      {"mass", num(d.mass)},
      {"p_mass", num(d.p_mass)},
      {"ode_residual", num(d.ode_residual)},
      {"mass_identity_residual", num(d.mass_identity_residual)},
      {"parity_defect", num(d.parity_defect)},
      {"tail", {{"available", t.available},
                {"note", t.note},
                {"alpha", num(t.alpha)},
                {"rate", num(t.rate)},
                {"gamma", num(t.gamma)},
                {"C1", num(t.C1)},
                {"C2", num(t.C2)},
                {"phase_rms", num(t.phase_rms)},
                {"extrema", t.extrema},
                {"y_lo", num(t.y_lo)},
                {"y_hi", num(t.y_hi)},
                {"algebraic_amplitude", num(t.algebraic_amplitude)},
                {"algebraic_detected", t.algebraic_detected}}}};
  const auto& s = p.stats;
  j["solver"] = json{{"iterations", s.iterations},
                     {"halvings", s.halvings},
                     {"residual_history", num_array(s.residual_history)},
                     {"final_update", num(s.final_update)},
                     {"regularized", s.regularized},
                     {"termination", s.termination}};
  return j;
}

Profile profile_from_json(const json& j) {
  check_header(j, "profile");
  Profile p;
  const auto& mj = j.at("model");
  p.params = ModelParams(mj.at("m").get<int>(), mj.at("N").get<int>(), mj.at("p").get<double>());
  p.grid = grid_from(j.at("grid"));
  p.symmetry = symmetry_from_string(j.at("symmetry").get<std::string>());
  p.seed_provenance = j.value("seed_provenance", "");
  p.values = get_array(j.at("values"));
  if (static_cast<int>(p.values.size()) != p.grid.n()) throw SchemaError("profile values do not match the grid");
  const auto& d = j.at("diagnostics");
  p.diag.sup_norm = get_num(d.at("sup_norm"));
  p.diag.f_at_0 = get_num(d.at("f_at_0"));
  p.diag.mass = get_num(d.at("mass"));
  p.diag.p_mass = get_num(d.at("p_mass"));
  p.diag.ode_residual = get_num(d.at("ode_residual"));
  p.diag.mass_identity_residual = get_num(d.at("mass_identity_residual"));
  p.diag.parity_defect = get_num(d.at("parity_defect"));
  const auto& t = d.at("tail");
  auto& tf = p.diag.tail;
  tf.available = t.at("available").get<bool>();
  tf.note = t.at("note").get<std::string>();
  tf.alpha = get_num(t.at("alpha"));
  tf.rate = get_num(t.at("rate"));
  tf.gamma = get_num(t.at("gamma"));
  tf.C1 = get_num(t.at("C1"));
  tf.C2 = get_num(t.at("C2"));
  tf.phase_rms = get_num(t.at("phase_rms"));
  tf.extrema = t.at("extrema").get<int>();
  tf.y_lo = get_num(t.at("y_lo"));
  tf.y_hi = get_num(t.at("y_hi"));
  tf.algebraic_amplitude = get_num(t.at("algebraic_amplitude"));
  tf.algebraic_detected = t.at("algebraic_detected").get<bool>();
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    p.stats.iterations = s.at("iterations").get<int>();
    p.stats.halvings = s.at("halvings").get<int>();
    p.stats.residual_history = get_array(s.at("residual_history"));
    p.stats.final_update = get_num(s.at("final_update"));
    p.stats.regularized = s.at("regularized").get<bool>();
    p.stats.termination = s.at("termination").get<std::string>();
  }
  return p;
}

void write_profile(const fs::path& json_path, const Profile& p, const std::string& config_hash) {
  json j = artifact_header("profile", config_hash);
  j.update(to_json(p));
  write_json(json_path, j);
  fs::path csv = json_path;
  csv.replace_extension(".csv");
  write_csv(csv, profile_csv(p), config_hash);
}

Profile read_profile(const fs::path& json_path) { return profile_from_json(read_json(json_path)); }

// ---------------------------------------------------------------- branch

namespace {

json endpoint_json(const EndpointClass& e) {
  return json{{"kind", to_string(e.kind)},
              {"l", e.l},
              {"p_l", num(e.p_l)},
              {"p_l_discrete", num(e.p_l_discrete)},
              {"exponent", num(e.exponent)},
              {"exponent_exact", num(e.exponent_exact)},
              {"predicted_exponent", num(e.predicted_exponent)},
              {"candidates", e.candidates},
              {"note", e.note}};
}

EndpointClass endpoint_from(const json& j) {
  EndpointClass e;
  e.kind = endpoint_kind_from_string(j.at("kind").get<std::string>());
  e.l = j.at("l").get<int>();
  e.p_l = get_num(j.at("p_l"));
  e.p_l_discrete = get_num(j.at("p_l_discrete"));
  e.exponent = get_num(j.at("exponent"));
  e.exponent_exact = get_num(j.at("exponent_exact"));
  e.predicted_exponent = get_num(j.at("predicted_exponent"));
  e.candidates = j.at("candidates").get<std::vector<int>>();
  e.note = j.at("note").get<std::string>();
  return e;
}

}  // namespace

json to_json(const Branch& b, const std::vector<bool>& keep_state) {
  const int np = static_cast<int>(b.points.size());
  std::vector<bool> keep = keep_state;
  if (keep.empty()) {
    keep.assign(np, false);
    if (np > 0) keep.front() = keep.back() = true;
    for (const auto& f : b.folds) {
      for (int k = f.index - 1; k <= f.index + 1; ++k) {
        if (k >= 0 && k < np) keep[k] = true;
      }
    }
  }
  json j;
  j["model"] = model_json(b.m, b.N);
  j["symmetry"] = to_string(b.symmetry);
  j["grid"] = grid_json(b.grid);
  json pts = json::array();
  json states = json::object();
  for (int i = 0; i < np; ++i) {
    const auto& pt = b.points[i];
    std::string ref = pt.profile_ref;
    const bool has_state = i < static_cast<int>(b.states.size()) && !b.states[i].empty();
    if (has_state && i < static_cast<int>(keep.size()) && keep[i]) {
      ref = "states/" + std::to_string(i);
      states[std::to_string(i)] = num_array(b.states[i]);
    }
    pts.push_back(json{{"p", num(pt.p)},
                       {"sup_norm", num(pt.sup_norm)},
                       {"f_at_0", num(pt.f_at_0)},
                       {"mass", num(pt.mass)},
                       {"p_mass", num(pt.p_mass)},
                       {"residual", num(pt.residual)},
                       {"mass_identity_residual", num(pt.mass_identity_residual)},
                       {"arclength", num(pt.arclength)},
                       {"profile_ref", ref}});
  }
  j["points"] = pts;
  j["states"] = states;
  json folds = json::array();
  for (const auto& f : b.folds) {
    folds.push_back(json{{"index", f.index}, {"p_lo", num(f.p_lo)}, {"p_hi", num(f.p_hi)},
                         {"refined", f.refined}, {"warning", f.warning}});
  }
  j["folds"] = folds;
  j["endpoints"] = json{{"start", endpoint_json(b.start)}, {"end", endpoint_json(b.end)}};
  j["termination"] = b.termination;
  return j;
}

Branch branch_from_json(const json& j) {
  check_header(j, "branch");
  Branch b;
  b.m = j.at("model").at("m").get<int>();
  b.N = j.at("model").at("N").get<int>();
  b.symmetry = symmetry_from_string(j.at("symmetry").get<std::string>());
  b.grid = grid_from(j.at("grid"));
  for (const auto& pj : j.at("points")) {
    BranchPoint pt;
    pt.p = get_num(pj.at("p"));
    pt.sup_norm = get_num(pj.at("sup_norm"));
    pt.f_at_0 = get_num(pj.at("f_at_0"));
    pt.mass = get_num(pj.at("mass"));
    pt.p_mass = get_num(pj.at("p_mass"));
    pt.residual = get_num(pj.at("residual"));
    pt.mass_identity_residual = get_num(pj.at("mass_identity_residual"));
    pt.arclength = get_num(pj.at("arclength"));
    pt.profile_ref = pj.at("profile_ref").get<std::string>();
    b.points.push_back(pt);
  }
  b.states.assign(b.points.size(), {});
  for (const auto& [k, v] : j.at("states").items()) {
    const int i = parse_int(k);
    if (i < 0 || i >= static_cast<int>(b.points.size())) throw SchemaError("branch state index out of range");
    b.states[i] = get_array(v);
  }
  for (const auto& fj : j.at("folds")) {
    FoldRecord f;
    f.index = fj.at("index").get<int>();
    f.p_lo = get_num(fj.at("p_lo"));
    f.p_hi = get_num(fj.at("p_hi"));
    f.refined = fj.at("refined").get<bool>();
    f.warning = fj.at("warning").get<std::string>();
    b.folds.push_back(f);
  }
  b.start = endpoint_from(j.at("endpoints").at("start"));
  b.end = endpoint_from(j.at("endpoints").at("end"));
  b.termination = j.at("termination").get<std::string>();
  return b;
}

void write_branch(const fs::path& json_path, const Branch& b, const std::string& config_hash) {
  json j = artifact_header("branch", config_hash);
  j.update(to_json(b));
  write_json(json_path, j);
  fs::path csv = json_path;
  csv.replace_extension(".csv");
  write_csv(csv, branch_csv(b), config_hash);
}

Branch read_branch(const fs::path& json_path) { return branch_from_json(read_json(json_path)); }

// ---------------------------------------------------------------- trajectories

json to_json(const Trajectory& t, bool with_states) {
  json j;
  j["outcome"] = to_string(t.outcome);
  j["steps"] = t.steps;
  j["rejected"] = t.rejected;
  j["note"] = t.note;
  if (!t.checkpoints.empty()) j["grid"] = grid_json(t.checkpoints.front().grid);
  json cps = json::array();
  for (const auto& c : t.checkpoints) {
    json cj{{"tau", num(c.tau)}, {"sup_norm", num(c.sup_norm)}, {"projections", num_array(c.projections)}};
    if (with_states) cj["v"] = num_array(c.v);
    cps.push_back(cj);
  }
  j["checkpoints"] = cps;
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  check_header(j, "trajectory");
  Trajectory t;
  const std::string o = j.at("outcome").get<std::string>();
  if (o == "completed") t.outcome = EvolveOutcome::Completed;
  else if (o == "blow-up") t.outcome = EvolveOutcome::BlowUp;
  else if (o == "step-failure") t.outcome = EvolveOutcome::StepFailure;
  else throw SchemaError("unknown trajectory outcome: " + o);
  t.steps = j.at("steps").get<int>();
  t.rejected = j.at("rejected").get<int>();
  t.note = j.at("note").get<std::string>();
  Grid g;
  if (j.contains("grid")) g = grid_from(j.at("grid"));
  for (const auto& cj : j.at("checkpoints")) {
    RescaledState s;
    s.tau = get_num(cj.at("tau"));
    s.sup_norm = get_num(cj.at("sup_norm"));
    s.projections = get_array(cj.at("projections"));
    s.grid = g;
    if (cj.contains("v")) s.v = get_array(cj.at("v"));
    t.checkpoints.push_back(std::move(s));
  }
  return t;
}

json to_json(const CentreTrajectory& t) {
  json j;
  j["tau"] = num_array(t.tau);
  j["a"] = num_array(t.a);
  j["blew_up"] = t.blew_up;
  j["blowup_tau"] = num(t.blowup_tau);
  j["blowup_tau_exact"] = num(t.blowup_tau_exact);
  j["fit"] = json{{"available", t.fit.available}, {"exponent", num(t.fit.exponent)},
                  {"prefactor", num(t.fit.prefactor)}, {"tau_lo", num(t.fit.tau_lo)},
                  {"tau_hi", num(t.fit.tau_hi)}, {"samples", t.fit.samples}};
  return j;
}

void write_trajectory(const fs::path& path, const Trajectory& t, const std::string& config_hash) {
  json j = artifact_header("trajectory", config_hash);
  j.update(to_json(t));
  write_json(path, j);
}

Trajectory read_trajectory(const fs::path& path) { return trajectory_from_json(read_json(path)); }

}  // namespace polyheat
