#pragma once

// Run configuration, output plumbing and the command bodies behind the
// rydsi tool. Every artifact starts with the config hash and seed; numbers
// are written in shortest round-trip form so reruns are byte-identical.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rydsi/catalog.hpp"
#include "rydsi/errors.hpp"
#include "rydsi/interaction.hpp"
#include "rydsi/optimizer.hpp"
#include "rydsi/parallel.hpp"
#include "rydsi/stark.hpp"
#include "rydsi/units.hpp"

namespace rydsi {

// ---------------------------------------------------------------------------
// Formatting and parsing

namespace io {

inline std::string num(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string num(long long x) { return std::to_string(x); }
inline std::string num(long x) { return std::to_string(x); }
inline std::string num(int x) { return std::to_string(x); }

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double x = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(x))
    throw ConfigError(key + ": not a number: '" + text + "'");
  return x;
}

inline long long parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long x = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ConfigError(key + ": not an integer: '" + text + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

inline std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split(text)) out.push_back(parse_double(key, s));
  return out;
}

inline Eigen::Vector3d parse_vector(const std::string& key, const std::string& text) {
  const auto v = parse_list(key, text);
  if (v.size() != 3) throw ConfigError(key + ": expected three components");
  return {v[0], v[1], v[2]};
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

inline std::string join(const Eigen::Vector3d& v) { return join(std::vector<double>{v.x(), v.y(), v.z()}); }

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

inline int axis_index(const std::string& key, const std::string& name) {
  if (name == "x") return 0;
  if (name == "y") return 1;
  if (name == "z") return 2;
  throw ConfigError(key + ": axis must be x, y or z, got '" + name + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace io

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  // [run]
  std::string species = "P";
  std::string rydberg_state = "2p0";
  std::string species_file;  // optional species table overrides
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir = "out";

  // [solver]
  CatalogSpec catalog;
  bool isotropic_validation = false;

  // [interaction]
  long samples = 1 << 17;
  long map_samples = 1 << 15;
  long norm_samples = 1 << 20;
  double guard_nm = 8.0;
  Eigen::Vector3d field_V_per_um{0, 0, 0.18};
  Eigen::Vector3d offset_nm = Eigen::Vector3d::Zero();
  std::vector<std::string> axes{"z", "x"};
  double r_min_nm = 8.0, r_max_nm = 15.0, r_step_nm = 0.5;
  double vdw_floor_meV = 0.01;
  bool raster = true;

  // [map]
  std::string plane = "xz";
  double extent_nm = 16.0;
  int resolution = 33;
  int refine = 2;
  double nominal_nm = 10.5;
  std::string nominal_axis = "z";
  bool reoptimize_per_cell = false;

  // [protocol]
  ProtocolKind kind = ProtocolKind::BlockadeInspired;
  double rabi_over_u = 0;  // > 0 fixes the parameters instead of optimizing
  double detuning_ratio = kInspiredDetuningRatio;
  double phase = kInspiredPhase;
  double tol = 1e-9;

  // [scan]
  std::vector<std::string> protocols{"resonant", "off-resonant", "blockade-inspired"};
  std::vector<double> u_over_gamma{1e2, 1e3, 1e4};
  double robust_u_over_gamma = 1e4;
  double detuning_u_over_gamma = 669;  // optimum Omega near 1000 gamma
  std::vector<double> rabi_multipliers{0.9, 0.95, 1.0, 1.05, 1.1};
  std::vector<double> detuning_offsets{-0.1, -0.05, 0.0, 0.05, 0.1};

  // [stark]
  std::vector<double> stark_fields_V_per_um{0.0, 0.05, 0.1, 0.15, 0.18, 0.2, 0.25};
  std::string stark_axis = "z";

  // [ionize]
  std::vector<double> ionize_fields_V_per_um{0.05, 0.1, 0.15, 0.18, 0.2, 0.25, 0.3};
  double budget = 0.1;
  double tunneling_mass_ratio = 0.191;

  std::string species_overrides;  // contents of species_file, part of the hash

  void validate() const;
  std::string to_ini(bool with_run_paths = true) const;
  std::string hash() const;
  std::string catalog_hash() const;
  SpeciesTable species_table() const;
  DonorSpecies donor() const { return species_table().lookup(species, rydberg_state); }

  static RunConfig from_ini(std::istream& in, const std::string& base_dir = ".");
  static RunConfig load(const std::string& path);
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"species", "rydberg_state", "species_file", "seed", "threads", "output_dir"}},
      {"solver",
       {"n_eta", "n_theta", "scaling_radius", "even_states", "odd_states", "m1_states", "central_cell_radius_nm",
        "isotropic_validation"}},
      {"interaction",
       {"samples", "map_samples", "norm_samples", "guard_nm", "field_V_per_um", "offset_nm", "axes", "r_min_nm",
        "r_max_nm", "r_step_nm", "vdw_floor_meV", "raster"}},
      {"map", {"plane", "extent_nm", "resolution", "refine", "nominal_nm", "nominal_axis", "reoptimize_per_cell"}},
      {"protocol", {"kind", "rabi_over_u", "detuning_ratio", "phase", "tol"}},
      {"scan", {"protocols", "u_over_gamma", "robust_u_over_gamma", "detuning_u_over_gamma", "rabi_multipliers", "detuning_offsets"}},
      {"stark", {"fields_V_per_um", "axis"}},
      {"ionize", {"fields_V_per_um", "budget", "tunneling_mass_ratio"}},
  };
  return keys;
}

}  // namespace detail

inline RunConfig RunConfig::from_ini(std::istream& in, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  const auto& known = detail::config_keys();
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) throw ConfigError("unknown section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("top-level key '" + section + "' outside a section");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("unknown key " + section + "." + key);
  }

  RunConfig c;
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return io::trim(*v);
    return std::nullopt;
  };
  auto set_d = [&](const std::string& k, double& x) { if (auto v = get(k)) x = io::parse_double(k, *v); };
  auto set_i = [&](const std::string& k, auto& x) {
    if (auto v = get(k)) x = static_cast<std::remove_reference_t<decltype(x)>>(io::parse_int(k, *v));
  };
  auto set_b = [&](const std::string& k, bool& x) { if (auto v = get(k)) x = io::parse_bool(k, *v); };
  auto set_s = [&](const std::string& k, std::string& x) { if (auto v = get(k)) x = *v; };
  auto set_l = [&](const std::string& k, std::vector<double>& x) { if (auto v = get(k)) x = io::parse_list(k, *v); };
  auto set_v = [&](const std::string& k, Eigen::Vector3d& x) { if (auto v = get(k)) x = io::parse_vector(k, *v); };
  auto set_names = [&](const std::string& k, std::vector<std::string>& x) { if (auto v = get(k)) x = io::split(*v); };

  set_s("run.species", c.species);
  set_s("run.rydberg_state", c.rydberg_state);
  set_s("run.species_file", c.species_file);
  if (auto v = get("run.seed")) {
    const long long s = io::parse_int("run.seed", *v);
    if (s < 0) throw ConfigError("run.seed must be non-negative");
    c.seed = std::uint64_t(s);
  }
  set_i("run.threads", c.threads);
  set_s("run.output_dir", c.output_dir);

  set_i("solver.n_eta", c.catalog.n_eta);
  set_i("solver.n_theta", c.catalog.n_theta);
  set_d("solver.scaling_radius", c.catalog.scaling_radius);
  set_i("solver.even_states", c.catalog.even_states);
  set_i("solver.odd_states", c.catalog.odd_states);
  set_i("solver.m1_states", c.catalog.m1_states);
  set_d("solver.central_cell_radius_nm", c.catalog.central_cell_radius_nm);
  set_b("solver.isotropic_validation", c.isotropic_validation);

  set_i("interaction.samples", c.samples);
  set_i("interaction.map_samples", c.map_samples);
  set_i("interaction.norm_samples", c.norm_samples);
  set_d("interaction.guard_nm", c.guard_nm);
  set_v("interaction.field_V_per_um", c.field_V_per_um);
  set_v("interaction.offset_nm", c.offset_nm);
  set_names("interaction.axes", c.axes);
  set_d("interaction.r_min_nm", c.r_min_nm);
  set_d("interaction.r_max_nm", c.r_max_nm);
  set_d("interaction.r_step_nm", c.r_step_nm);
  set_d("interaction.vdw_floor_meV", c.vdw_floor_meV);
  set_b("interaction.raster", c.raster);

  set_s("map.plane", c.plane);
  set_d("map.extent_nm", c.extent_nm);
  set_i("map.resolution", c.resolution);
  set_i("map.refine", c.refine);
  set_d("map.nominal_nm", c.nominal_nm);
  set_s("map.nominal_axis", c.nominal_axis);
  set_b("map.reoptimize_per_cell", c.reoptimize_per_cell);

  if (auto v = get("protocol.kind")) c.kind = protocol_from_string(*v);
  set_d("protocol.rabi_over_u", c.rabi_over_u);
  set_d("protocol.detuning_ratio", c.detuning_ratio);
  set_d("protocol.phase", c.phase);
  set_d("protocol.tol", c.tol);

  set_names("scan.protocols", c.protocols);
  set_l("scan.u_over_gamma", c.u_over_gamma);
  set_d("scan.robust_u_over_gamma", c.robust_u_over_gamma);
  set_d("scan.detuning_u_over_gamma", c.detuning_u_over_gamma);
  set_l("scan.rabi_multipliers", c.rabi_multipliers);
  set_l("scan.detuning_offsets", c.detuning_offsets);

  set_l("stark.fields_V_per_um", c.stark_fields_V_per_um);
  set_s("stark.axis", c.stark_axis);

  set_l("ionize.fields_V_per_um", c.ionize_fields_V_per_um);
  set_d("ionize.budget", c.budget);
  set_d("ionize.tunneling_mass_ratio", c.tunneling_mass_ratio);

  if (!c.species_file.empty()) {
    std::filesystem::path p(c.species_file);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    c.species_overrides = io::read_file(p.string());
  }
  c.validate();
  return c;
}

inline RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path);
  return from_ini(in, std::filesystem::path(path).parent_path().string());
}

inline void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(threads >= 1, "run.threads must be at least 1");
  require(catalog.n_eta >= 32 && catalog.n_theta >= 32, "solver mesh must be at least 32 x 32");
  require(catalog.scaling_radius >= 0, "solver.scaling_radius must be non-negative");
  require(catalog.even_states >= 2 && catalog.odd_states >= 1 && catalog.m1_states >= 1,
          "solver state counts too small");
  require(catalog.central_cell_radius_nm > 0, "solver.central_cell_radius_nm must be positive");
  require(samples >= 1024 && map_samples >= 1024 && norm_samples >= 1024, "sample counts must be at least 1024");
  require(guard_nm > 0, "interaction.guard_nm must be positive");
  for (const auto& a : axes) io::axis_index("interaction.axes", a);
  require(r_min_nm >= guard_nm, "interaction.r_min_nm must not lie inside the guard");
  require(r_max_nm >= r_min_nm && r_step_nm > 0, "interaction R grid must be ascending with a positive step");
  require(vdw_floor_meV >= 0, "interaction.vdw_floor_meV must be non-negative");
  plane_axes(plane);
  require(extent_nm > guard_nm, "map.extent_nm must exceed the guard");
  require(resolution >= 3, "map.resolution must be at least 3");
  require(refine >= 1, "map.refine must be at least 1");
  io::axis_index("map.nominal_axis", nominal_axis);
  require(nominal_nm >= guard_nm, "map.nominal_nm must not lie inside the guard");
  require(rabi_over_u >= 0, "protocol.rabi_over_u must be non-negative");
  require(detuning_ratio >= 0 && std::isfinite(phase), "protocol detuning ratio and phase must be finite");
  require(tol > 0 && tol < 1e-3, "protocol.tol must lie in (0, 1e-3)");
  for (const auto& p : protocols) protocol_from_string(p);
  require(!u_over_gamma.empty(), "scan.u_over_gamma is empty");
  for (double u : u_over_gamma) require(u > 0, "scan.u_over_gamma must be positive");
  require(robust_u_over_gamma > 0 && detuning_u_over_gamma > 0, "scan u/gamma values must be positive");
  for (double m : rabi_multipliers) require(m > 0, "scan.rabi_multipliers must be positive");
  io::axis_index("stark.axis", stark_axis);
  for (double f : stark_fields_V_per_um) require(f >= 0, "stark fields must be non-negative");
  for (double f : ionize_fields_V_per_um) require(f > 0, "ionize fields must be positive");
  require(budget > 0 && budget < 1, "ionize.budget must lie in (0, 1)");
  require(tunneling_mass_ratio > 0, "ionize.tunneling_mass_ratio must be positive");
  if (!isotropic_validation) species_table().lookup(species, rydberg_state);
}

inline std::string RunConfig::to_ini(bool with_run_paths) const {
  using io::join;
  using io::num;
  std::ostringstream s;
  s << "[run]\nspecies = " << species << "\nrydberg_state = " << rydberg_state << "\n";
  if (with_run_paths) s << "species_file = " << species_file << "\n";
  s << "seed = " << seed << "\n";
  if (with_run_paths) s << "threads = " << threads << "\noutput_dir = " << output_dir << "\n";
  s << "\n[solver]\nn_eta = " << catalog.n_eta << "\nn_theta = " << catalog.n_theta
    << "\nscaling_radius = " << num(catalog.scaling_radius) << "\neven_states = " << catalog.even_states
    << "\nodd_states = " << catalog.odd_states << "\nm1_states = " << catalog.m1_states
    << "\ncentral_cell_radius_nm = " << num(catalog.central_cell_radius_nm)
    << "\nisotropic_validation = " << (isotropic_validation ? "true" : "false") << "\n";
  s << "\n[interaction]\nsamples = " << samples << "\nmap_samples = " << map_samples
    << "\nnorm_samples = " << norm_samples << "\nguard_nm = " << num(guard_nm)
    << "\nfield_V_per_um = " << join(field_V_per_um) << "\noffset_nm = " << join(offset_nm)
    << "\naxes = " << join(axes) << "\nr_min_nm = " << num(r_min_nm) << "\nr_max_nm = " << num(r_max_nm)
    << "\nr_step_nm = " << num(r_step_nm) << "\nvdw_floor_meV = " << num(vdw_floor_meV)
    << "\nraster = " << (raster ? "true" : "false") << "\n";
  s << "\n[map]\nplane = " << plane << "\nextent_nm = " << num(extent_nm) << "\nresolution = " << resolution
    << "\nrefine = " << refine << "\nnominal_nm = " << num(nominal_nm) << "\nnominal_axis = " << nominal_axis
    << "\nreoptimize_per_cell = " << (reoptimize_per_cell ? "true" : "false") << "\n";
  s << "\n[protocol]\nkind = " << to_string(kind) << "\nrabi_over_u = " << num(rabi_over_u)
    << "\ndetuning_ratio = " << num(detuning_ratio) << "\nphase = " << num(phase) << "\ntol = " << num(tol) << "\n";
  s << "\n[scan]\nprotocols = " << join(protocols) << "\nu_over_gamma = " << join(u_over_gamma)
    << "\nrobust_u_over_gamma = " << num(robust_u_over_gamma)
    << "\ndetuning_u_over_gamma = " << num(detuning_u_over_gamma) << "\nrabi_multipliers = " << join(rabi_multipliers)
    << "\ndetuning_offsets = " << join(detuning_offsets) << "\n";
  s << "\n[stark]\nfields_V_per_um = " << join(stark_fields_V_per_um) << "\naxis = " << stark_axis << "\n";
  s << "\n[ionize]\nfields_V_per_um = " << join(ionize_fields_V_per_um) << "\nbudget = " << num(budget)
    << "\ntunneling_mass_ratio = " << num(tunneling_mass_ratio) << "\n";
  return s.str();
}

/// Hash of everything that can change a result. Thread count, output
/// directory and the species file path are left out; the file's contents
/// are in.
inline std::string RunConfig::hash() const {
  return io::hex64(io::fnv1a(to_ini(false) + "\n#species_overrides\n" + species_overrides));
}

/// Hash of the inputs the catalog depends on.
inline std::string RunConfig::catalog_hash() const {
  std::ostringstream s;
  s << "species=" << species << "\nrydberg_state=" << rydberg_state << "\nn_eta=" << catalog.n_eta
    << "\nn_theta=" << catalog.n_theta << "\nscaling_radius=" << io::num(catalog.scaling_radius)
    << "\neven_states=" << catalog.even_states << "\nodd_states=" << catalog.odd_states
    << "\nm1_states=" << catalog.m1_states << "\ncentral_cell_radius_nm=" << io::num(catalog.central_cell_radius_nm)
    << "\n#species_overrides\n" << species_overrides;
  return io::hex64(io::fnv1a(s.str()));
}

inline SpeciesTable RunConfig::species_table() const {
  SpeciesTable t;
  if (!species_overrides.empty()) {
    std::istringstream in(species_overrides);
    t.load(in);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Outputs

/// CSV with a comment header carrying the command, config hash, seed and the
/// resolved config.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add(std::vector<std::string> row) {
    if (row.size() != columns_.size()) throw DimensionMismatch("CSV row width differs from the header");
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string render(const std::string& command, const RunConfig& cfg) const {
    std::ostringstream s;
    s << "# rydsi " << command << "\n# config_hash = " << cfg.hash() << "\n# seed = " << cfg.seed << "\n";
    std::istringstream echo(cfg.to_ini(false));
    for (std::string line; std::getline(echo, line);) s << "#   " << line << "\n";
    s << io::join(columns_) << "\n";
    for (const auto& r : rows_) s << io::join(r) << "\n";
    return s.str();
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct CommandResult {
  std::vector<std::string> files;                            // relative to the output directory
  std::vector<std::pair<std::string, std::string>> summary;  // key = value, also printed
  std::vector<std::string> notes;                            // printed only; may vary between runs
};

class OutputDir {
 public:
  OutputDir(const std::string& dir, const RunConfig& cfg) : dir_(dir), cfg_(cfg) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
  }

  const std::filesystem::path& path() const { return dir_; }

  void csv(CommandResult& r, const std::string& name, const std::string& command, const CsvTable& t) const {
    io::write_file(dir_ / name, t.render(command, cfg_));
    r.files.push_back(name);
  }

  /// Resolved config echo and the run manifest.
  void finish(CommandResult& r, const std::string& command) const {
    const std::string echo = "config-" + command + ".ini";
    io::write_file(dir_ / echo, "; config_hash = " + cfg_.hash() + "\n" + cfg_.to_ini(false));
    std::ostringstream m;
    m << "command=" << command << "\nconfig_hash=" << cfg_.hash() << "\nseed=" << cfg_.seed << "\nconfig=" << echo
      << "\n";
    for (const auto& f : r.files) m << "output=" << f << "\n";
    for (const auto& [k, v] : r.summary) m << k << "=" << v << "\n";
    const std::string manifest = "manifest-" + command + ".txt";
    io::write_file(dir_ / manifest, m.str());
    r.files.push_back(echo);
    r.files.push_back(manifest);
  }

 private:
  std::filesystem::path dir_;
  RunConfig cfg_;
};

// ---------------------------------------------------------------------------
// Catalog cache

/// Loads catalog-<hash>.txt from `dir` when present and matching, otherwise
/// builds and saves it.
inline Catalog obtain_catalog(const RunConfig& cfg, const std::filesystem::path& dir, bool* cache_hit = nullptr,
                              std::string* file = nullptr) {
  const std::string h = cfg.catalog_hash();
  const std::string name = "catalog-" + h + ".txt";
  const auto path = dir / name;
  if (file) *file = name;
  if (std::filesystem::exists(path)) {
    try {
      Catalog c = load_catalog(path.string());
      if (c.config_hash == h) {
        if (cache_hit) *cache_hit = true;
        return c;
      }
    } catch (const IoError&) {
      // stale or truncated; rebuild below
    }
  }
  if (cache_hit) *cache_hit = false;
  const SpeciesTable table = cfg.species_table();
  Catalog c = build_catalog(table.lookup(cfg.species, cfg.rydberg_state), cfg.catalog, PhysicalConstants{}, table);
  c.config_hash = h;
  save_catalog(path.string(), c);
  return c;
}

// ---------------------------------------------------------------------------
// Fidelity map

struct FidelityMap {
  int axis_a = 0, axis_b = 2;
  std::vector<double> coords;         // nm, both axes
  std::vector<double> u_meV;          // NaN where masked
  std::vector<double> fidelity;       // NaN where masked
  std::vector<char> masked;
  Eigen::Vector3d nominal_position = Eigen::Vector3d::Zero();
  double nominal_u_meV = 0;
  double nominal_fidelity = 0;
  GateParameters parameters;          // gate units, held fixed unless re-optimized
  static constexpr double thresholds[3] = {0.95, 0.99, 0.995};

  int n() const { return int(coords.size()); }
  std::size_t index(int ia, int ib) const { return std::size_t(ia) * n() + ib; }
};

struct RegionStats {
  int cells = 0;
  double span_nm = 0;  // largest bounding-box side of the region
};

/// 4-connected region of cells with fidelity above `threshold` that contains
/// the cell nearest `seed_position`.
inline RegionStats connected_region(const FidelityMap& m, double threshold, const Eigen::Vector3d& seed_position) {
  const int n = m.n();
  int best = -1;
  double dmin = 1e300;
  for (int ia = 0; ia < n; ++ia)
    for (int ib = 0; ib < n; ++ib) {
      const double d = std::hypot(m.coords[ia] - seed_position(m.axis_a), m.coords[ib] - seed_position(m.axis_b));
      if (d < dmin - 1e-12) {
        dmin = d;
        best = int(m.index(ia, ib));
      }
    }
  RegionStats r;
  auto above = [&](int k) { return !m.masked[k] && m.fidelity[k] > threshold; };
  if (best < 0 || !above(best)) return r;
  std::vector<char> seen(m.fidelity.size(), 0);
  std::vector<int> stack{best};
  seen[best] = 1;
  double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
  while (!stack.empty()) {
    const int k = stack.back();
    stack.pop_back();
    ++r.cells;
    const int ia = k / n, ib = k % n;
    amin = std::min(amin, m.coords[ia]);
    amax = std::max(amax, m.coords[ia]);
    bmin = std::min(bmin, m.coords[ib]);
    bmax = std::max(bmax, m.coords[ib]);
    const int nb[4][2] = {{ia - 1, ib}, {ia + 1, ib}, {ia, ib - 1}, {ia, ib + 1}};
    for (const auto& q : nb) {
      if (q[0] < 0 || q[0] >= n || q[1] < 0 || q[1] >= n) continue;
      const int kk = int(m.index(q[0], q[1]));
      if (!seen[kk] && above(kk)) {
        seen[kk] = 1;
        stack.push_back(kk);
      }
    }
  }
  r.span_nm = std::max(amax - amin, bmax - bmin);
  return r;
}

/// Bilinear u on the raster at (a, b). Returns nullopt when any corner of
/// the enclosing cell is masked.
inline std::optional<double> interpolate_u(const InteractionMap& raster, double a, double b) {
  const int n = raster.n();
  const double lo = raster.coords.front(), step = (raster.coords.back() - lo) / (n - 1);
  auto locate = [&](double x, int& i, double& t) {
    const double s = (x - lo) / step;
    i = std::clamp(int(std::floor(s)), 0, n - 2);
    t = s - i;
    if (std::abs(t) < 1e-12) t = 0;
    if (std::abs(t - 1) < 1e-12) t = 1;
  };
  int ia, ib;
  double ta, tb;
  locate(a, ia, ta);
  locate(b, ib, tb);
  double u = 0;
  for (int da = 0; da < 2; ++da)
    for (int db = 0; db < 2; ++db) {
      const double w = (da ? ta : 1 - ta) * (db ? tb : 1 - tb);
      if (w == 0) continue;
      if (raster.is_masked(ia + da, ib + db)) return std::nullopt;
      u += w * raster.at(ia + da, ib + db).total_u;
    }
  return u;
}

/// Pulse parameters at the nominal separation: optimized, or taken from the
/// config when rabi_over_u is set.
inline GateParameters nominal_parameters(const RunConfig& cfg, double u_over_gamma) {
  if (cfg.rabi_over_u > 0)
    return {cfg.rabi_over_u * std::abs(u_over_gamma), cfg.detuning_ratio, cfg.phase};
  auto spec = OptimizationSpec::make(cfg.kind, std::abs(u_over_gamma));
  spec.integrator_tol = cfg.tol;
  return optimize(spec).parameters;
}

inline Eigen::Vector3d nominal_position(const RunConfig& cfg) {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  p(io::axis_index("map.nominal_axis", cfg.nominal_axis)) = cfg.nominal_nm;
  return p;
}

inline DonorPairGeometry base_geometry(const RunConfig& cfg) {
  DonorPairGeometry g;
  g.field_V_per_um = cfg.field_V_per_um;
  g.guard_nm = cfg.guard_nm;
  g.offset_nm = cfg.offset_nm;
  return g;
}

/// Fidelity on a grid `refine` times finer than the raster. u comes from the
/// raster by bilinear interpolation, or from a direct evaluation where a
/// corner is masked. Pulse parameters are fixed at the nominal optimum
/// unless `reoptimize_per_cell` is set.
inline FidelityMap fidelity_map(const RunConfig& cfg, const InteractionMap& raster, const InteractionContext& ctx,
                                const DonorSpecies& sp) {
  FidelityMap fm;
  fm.axis_a = raster.axis_a;
  fm.axis_b = raster.axis_b;
  const int nr = raster.n();
  const int n = (nr - 1) * cfg.refine + 1;
  const double lo = raster.coords.front(), hi = raster.coords.back();
  for (int i = 0; i < n; ++i) fm.coords.push_back(0.5 * (hi - lo) * (2 * i - (n - 1)) / (n - 1));
  fm.u_meV.assign(std::size_t(n) * n, std::nan(""));
  fm.fidelity.assign(std::size_t(n) * n, std::nan(""));
  fm.masked.assign(std::size_t(n) * n, 0);

  const DonorPairGeometry base = base_geometry(cfg);
  fm.nominal_position = nominal_position(cfg);
  {
    DonorPairGeometry g = base;
    g.displacement_nm = fm.nominal_position;
    InteractionOptions o{cfg.samples, derive_seed(cfg.seed, 1u << 20), cfg.vdw_floor_meV};
    fm.nominal_u_meV = total_interaction(g, ctx, o).total_u;
  }
  const DecoherenceRates rates = DecoherenceRates::normalized();
  const double nominal_ug = interaction_over_gamma(fm.nominal_u_meV, sp);
  fm.parameters = nominal_parameters(cfg, nominal_ug);
  fm.nominal_fidelity = gate_fidelity(cfg.kind, fm.parameters, nominal_ug, rates, cfg.tol);

  const bool symmetric = cfg.offset_nm.squaredNorm() == 0;
  const int count = symmetric ? (n * n + 1) / 2 : n * n;
  parallel_for(count, cfg.threads, [&](int k) {
    const int ia = k / n, ib = k % n;
    DonorPairGeometry g = base;
    g.displacement_nm = Eigen::Vector3d::Zero();
    g.displacement_nm(fm.axis_a) = fm.coords[ia];
    g.displacement_nm(fm.axis_b) = fm.coords[ib];
    const int mirror = n * n - 1 - k;
    auto store = [&](double u, double f, char mask) {
      for (int idx : {k, symmetric ? mirror : k}) {
        fm.u_meV[idx] = u;
        fm.fidelity[idx] = f;
        fm.masked[idx] = mask;
      }
    };
    if ((g.displacement_nm + g.offset_nm).norm() < g.guard_nm) {
      store(std::nan(""), std::nan(""), 1);
      return;
    }
    std::optional<double> u = interpolate_u(raster, fm.coords[ia], fm.coords[ib]);
    if (!u) {
      if (symmetric) g.displacement_nm = canonical_displacement(g.displacement_nm);
      InteractionOptions o{cfg.map_samples, derive_seed(cfg.seed, (1u << 21) + std::uint64_t(k)), cfg.vdw_floor_meV};
      u = total_interaction(g, ctx, o).total_u;
    }
    const double ug = interaction_over_gamma(*u, sp);
    GateParameters p = fm.parameters;
    double f;
    if (cfg.reoptimize_per_cell) {
      auto spec = OptimizationSpec::make(cfg.kind, std::abs(ug));
      spec.integrator_tol = cfg.tol;
      GateParameters start = p;
      start.rabi = std::clamp(p.rabi * std::abs(ug / nominal_ug), spec.rabi.lo, spec.rabi.hi);
      f = optimize_from(spec, start, 0.1, rates).fidelity;
    } else {
      f = gate_fidelity(cfg.kind, p, ug, rates, cfg.tol);
    }
    store(*u, std::clamp(f, 0.0, 1.0), 0);
  });
  return fm;
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline std::string flag(bool b) { return b ? "1" : "0"; }

inline InteractionContext interaction_context(const RunConfig& cfg, const Catalog& cat) {
  return InteractionContext::make(cat, cfg.norm_samples, derive_seed(cfg.seed, 7), cfg.vdw_floor_meV);
}

inline std::vector<double> r_grid(const RunConfig& cfg) {
  std::vector<double> r;
  const int count = int(std::floor((cfg.r_max_nm - cfg.r_min_nm) / cfg.r_step_nm + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) r.push_back(cfg.r_min_nm + i * cfg.r_step_nm);
  return r;
}

inline InteractionMap raster(const RunConfig& cfg, const InteractionContext& ctx) {
  InteractionOptions o{cfg.map_samples, derive_seed(cfg.seed, 3), cfg.vdw_floor_meV};
  return interaction_map(cfg.plane, cfg.extent_nm, cfg.resolution, base_geometry(cfg), ctx, o, cfg.threads);
}

inline CsvTable raster_table(const InteractionMap& m) {
  const char names[] = "xyz";
  CsvTable t({std::string(1, names[m.axis_a]) + "_nm", std::string(1, names[m.axis_b]) + "_nm", "total_u_meV",
              "v_dd_meV", "j_meV", "v_vdw_meV", "w_combination_meV"});
  for (int ia = 0; ia < m.n(); ++ia)
    for (int ib = 0; ib < m.n(); ++ib) {
      if (m.is_masked(ia, ib)) {
        t.add({io::num(m.coords[ia]), io::num(m.coords[ib]), "NA", "NA", "NA", "NA", "NA"});
        continue;
      }
      const auto& c = m.at(ia, ib);
      t.add({io::num(m.coords[ia]), io::num(m.coords[ib]), io::num(c.total_u), io::num(c.v_dd_rr), io::num(c.j_rr),
             io::num(c.v_vdw_rr), io::num(c.w_combination)});
    }
  return t;
}

}  // namespace detail

/// Builds or reuses the catalog. With isotropic_validation set, solves the
/// hydrogen problem instead and reports its lowest levels.
inline CommandResult cmd_solve(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  if (cfg.isotropic_validation) {
    SolverConfig c;
    c.n_eta = cfg.catalog.n_eta;
    c.n_theta = cfg.catalog.n_theta;
    c.eigenpair_count = 2;
    const auto even = assemble_and_solve(c);
    c.parity = Parity::Odd;
    c.eigenpair_count = 1;
    const auto odd = assemble_and_solve(c);
    CsvTable t({"state", "energy_EH", "exact_EH", "relative_error"});
    const std::vector<std::tuple<std::string, double, double>> rows{
        {"1s", even[0].energy, -0.5}, {"2s", even[1].energy, -0.125}, {"2p0", odd[0].energy, -0.125}};
    for (const auto& [label, e, exact] : rows)
      t.add({label, io::num(e), io::num(exact), io::num(std::abs(e / exact - 1.0))});
    out.csv(r, "solve-validation.csv", "solve", t);
    r.summary.push_back({"ground_energy_EH", io::num(even[0].energy)});
    r.summary.push_back({"ground_relative_error", io::num(std::abs(even[0].energy / -0.5 - 1.0))});
    r.summary.push_back({"2p0_energy_EH", io::num(odd[0].energy)});
    out.finish(r, "solve");
    return r;
  }
  bool hit = false;
  std::string file;
  const Catalog cat = obtain_catalog(cfg, out.path(), &hit, &file);
  CsvTable t({"index", "label", "energy_meV", "manifold"});
  for (int i = 0; i < cat.size(); ++i)
    t.add({io::num(i), cat.states[i].label, io::num(cat.states[i].energy * cat.hartree_meV),
           to_string(cat.states[i].manifold.label)});
  out.csv(r, "solve-states.csv", "solve", t);
  r.files.push_back(file);
  r.summary.push_back({"catalog", file});
  r.summary.push_back({"catalog_hash", cat.config_hash});
  r.summary.push_back({"states", io::num(cat.size())});
  const double gap = (cat.states[cat.index_of("2p0:z+")].energy - cat.states[cat.ground()].energy) * cat.hartree_meV;
  r.summary.push_back({"gap_2p0_1sA1_meV", io::num(gap)});
  r.notes.push_back(hit ? "catalog cache hit" : "catalog built");
  out.finish(r, "solve");
  return r;
}

/// Channel curves along each configured axis and the raster over the plane.
/// Rows where total u changes sign relative to the previous row are flagged.
inline CommandResult cmd_interactions(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  bool hit = false;
  std::string file;
  const Catalog cat = obtain_catalog(cfg, out.path(), &hit, &file);
  r.notes.push_back(hit ? "catalog cache hit" : "catalog built");
  const InteractionContext ctx = detail::interaction_context(cfg, cat);
  const auto grid = detail::r_grid(cfg);
  for (const auto& axis_name : cfg.axes) {
    const int axis = io::axis_index("interaction.axes", axis_name);
    std::vector<InteractionBreakdown> rows(grid.size());
    parallel_for(int(grid.size()), cfg.threads, [&](int i) {
      DonorPairGeometry g = base_geometry(cfg);
      g.displacement_nm = Eigen::Vector3d::Zero();
      g.displacement_nm(axis) = grid[i];
      InteractionOptions o{cfg.samples, derive_seed(cfg.seed, 1000u * (axis + 1) + i), cfg.vdw_floor_meV};
      rows[i] = total_interaction(g, ctx, o);
    });
    CsvTable t({"R_nm", "total_u_meV", "w_rr_meV", "w_rg_meV", "w_gg_meV", "w_combination_meV", "j_rr_meV",
                "v_vdw_rr_meV", "v_dd_rr_meV", "err_w_combination_meV", "err_j_rr_meV", "vdw_excluded",
                "sign_change"});
    int changes = 0;
    std::string where;
    double umin = 1e300, umax = -1e300;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& b = rows[i];
      const bool change = i > 0 && (b.total_u > 0) != (rows[i - 1].total_u > 0);
      if (change) {
        ++changes;
        where += (where.empty() ? "" : ",") + io::num(0.5 * (grid[i] + grid[i - 1]));
      }
      umin = std::min(umin, b.total_u);
      umax = std::max(umax, b.total_u);
      t.add({io::num(grid[i]), io::num(b.total_u), io::num(b.w_rr), io::num(b.w_rg), io::num(b.w_gg),
             io::num(b.w_combination), io::num(b.j_rr), io::num(b.v_vdw_rr), io::num(b.v_dd_rr),
             io::num(b.mc_errors.w_combination), io::num(b.mc_errors.j_rr), io::num(b.vdw_excluded),
             detail::flag(change)});
    }
    out.csv(r, "interactions-" + axis_name + ".csv", "interactions", t);
    r.summary.push_back({"u_min_meV_" + axis_name, io::num(umin)});
    r.summary.push_back({"u_max_meV_" + axis_name, io::num(umax)});
    r.summary.push_back({"sign_changes_" + axis_name, io::num(changes)});
    if (changes) r.summary.push_back({"sign_change_near_nm_" + axis_name, where});
  }
  if (cfg.raster) {
    const InteractionMap m = detail::raster(cfg, ctx);
    out.csv(r, "interaction-map.csv", "interactions", detail::raster_table(m));
  }
  r.files.push_back(file);
  r.summary.push_back({"catalog_hash", cat.config_hash});
  out.finish(r, "interactions");
  return r;
}

inline CommandResult cmd_fidelity_map(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  bool hit = false;
  std::string file;
  const Catalog cat = obtain_catalog(cfg, out.path(), &hit, &file);
  r.notes.push_back(hit ? "catalog cache hit" : "catalog built");
  const DonorSpecies sp = cfg.species_table().lookup(cfg.species, cfg.rydberg_state);
  const InteractionContext ctx = detail::interaction_context(cfg, cat);
  const InteractionMap raster = detail::raster(cfg, ctx);
  out.csv(r, "fidelity-map-raster.csv", "fidelity-map", detail::raster_table(raster));
  const FidelityMap fm = fidelity_map(cfg, raster, ctx, sp);

  const char names[] = "xyz";
  CsvTable t({std::string(1, names[fm.axis_a]) + "_nm", std::string(1, names[fm.axis_b]) + "_nm", "u_meV", "fidelity",
              "above_0.95", "above_0.99", "above_0.995"});
  for (int ia = 0; ia < fm.n(); ++ia)
    for (int ib = 0; ib < fm.n(); ++ib) {
      const std::size_t k = fm.index(ia, ib);
      if (fm.masked[k]) {
        t.add({io::num(fm.coords[ia]), io::num(fm.coords[ib]), "NA", "NA", "NA", "NA", "NA"});
        continue;
      }
      std::vector<std::string> row{io::num(fm.coords[ia]), io::num(fm.coords[ib]), io::num(fm.u_meV[k]),
                                   io::num(fm.fidelity[k])};
      for (double th : FidelityMap::thresholds) row.push_back(detail::flag(fm.fidelity[k] > th));
      t.add(row);
    }
  out.csv(r, "fidelity-map.csv", "fidelity-map", t);
  r.files.push_back(file);
  const double u_scale = std::abs(interaction_over_gamma(fm.nominal_u_meV, sp));
  r.summary.push_back({"nominal_u_meV", io::num(fm.nominal_u_meV)});
  r.summary.push_back({"nominal_u_over_gamma", io::num(interaction_over_gamma(fm.nominal_u_meV, sp))});
  r.summary.push_back({"rabi_over_u", io::num(fm.parameters.rabi / u_scale)});
  r.summary.push_back({"detuning_ratio", io::num(fm.parameters.detuning_ratio)});
  r.summary.push_back({"phase", io::num(fm.parameters.phase)});
  r.summary.push_back({"nominal_fidelity", io::num(fm.nominal_fidelity)});
  r.summary.push_back({"parameters", cfg.reoptimize_per_cell ? "reoptimized per cell" : "fixed at nominal"});
  for (double th : FidelityMap::thresholds) {
    const RegionStats s = connected_region(fm, th, fm.nominal_position);
    r.summary.push_back({"region_" + io::num(th) + "_cells", io::num(s.cells)});
    r.summary.push_back({"region_" + io::num(th) + "_span_nm", io::num(s.span_nm)});
  }
  out.finish(r, "fidelity-map");
  return r;
}

inline CommandResult cmd_stark(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  bool hit = false;
  std::string file;
  const Catalog cat = obtain_catalog(cfg, out.path(), &hit, &file);
  r.notes.push_back(hit ? "catalog cache hit" : "catalog built");
  const EffectiveAtomicUnits au;
  const PhysicalConstants pc;
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  axis(io::axis_index("stark.axis", cfg.stark_axis)) = 1.0;
  std::vector<double> fields;
  for (double f : cfg.stark_fields_V_per_um) fields.push_back(au.field_to_atomic(f));
  const double debye = pc.electron_charge * cat.bohr_nm * 1e-9 / kDebye;
  CsvTable t({"state", "field_V_per_um", "shift_meV", "dipole_debye"});
  for (int state : {cat.ground(), cat.rydberg()}) {
    const StarkResponse s = perturbative_stark(cat, state, axis, fields, cfg.vdw_floor_meV);
    for (std::size_t i = 0; i < fields.size(); ++i)
      t.add({s.state, io::num(cfg.stark_fields_V_per_um[i]), io::num(s.shifts[i] * cat.hartree_meV),
             io::num(s.dipoles[i] * debye)});
    r.summary.push_back({"polarizability_au_" + s.state, io::num(s.polarizability)});
    r.summary.push_back({"excluded_terms_" + s.state, io::num(s.excluded_terms)});
  }
  out.csv(r, "stark.csv", "stark", t);
  r.files.push_back(file);
  out.finish(r, "stark");
  return r;
}

inline CommandResult cmd_ionize(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  const DonorSpecies sp = cfg.donor();
  const IonizationModel im = species_ionization_model(sp, cfg.tunneling_mass_ratio);
  CsvTable t({"field_V_per_um", "rate_per_s", "probability", "ground_rate_per_s", "ground_probability"});
  for (double f : cfg.ionize_fields_V_per_um) {
    const double rate = ionization_rate_excited(im, f * 1e6);
    const double g = ionization_rate_ground(sp.ground_binding_meV, cfg.tunneling_mass_ratio, f * 1e6);
    t.add({io::num(f), io::num(rate), io::num(ionization_probability(rate, sp.lifetime_T1)), io::num(g),
           io::num(ionization_probability(g, sp.lifetime_T1))});
  }
  out.csv(r, "ionize.csv", "ionize", t);
  const IonizationAnchor a = ionization_anchor(sp, cfg.budget, cfg.tunneling_mass_ratio);
  r.summary.push_back({"state", a.label});
  r.summary.push_back({"lifetime_s", io::num(sp.lifetime_T1)});
  r.summary.push_back({"budget", io::num(cfg.budget)});
  r.summary.push_back({"max_field_V_per_um", io::num(a.max_field_V_per_um)});
  r.summary.push_back({"classical_threshold_V_per_um", io::num(a.classical_threshold_V_per_um)});
  out.finish(r, "ionize");
  return r;
}

/// Independent optimum per (protocol, u/gamma) point.
inline CommandResult cmd_optimize(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  struct Job {
    ProtocolKind kind;
    double u;
  };
  std::vector<Job> jobs;
  for (const auto& p : cfg.protocols)
    for (double u : cfg.u_over_gamma) jobs.push_back({protocol_from_string(p), u});
  std::vector<OptimumRecord> recs(jobs.size());
  parallel_for(int(jobs.size()), cfg.threads, [&](int i) {
    auto spec = OptimizationSpec::make(jobs[i].kind, jobs[i].u);
    spec.integrator_tol = cfg.tol;
    recs[i] = optimize(spec);
  });
  CsvTable t({"protocol", "u_over_gamma", "rabi_over_u", "detuning_ratio", "phase", "fidelity", "infidelity",
              "evaluations", "certified"});
  for (const auto& rec : recs)
    t.add({to_string(rec.kind), io::num(rec.interaction_over_gamma),
           io::num(rec.parameters.rabi / rec.interaction_over_gamma), io::num(rec.parameters.detuning_ratio),
           io::num(rec.parameters.phase), io::num(rec.fidelity), io::num(1.0 - rec.fidelity),
           io::num(rec.evaluations), detail::flag(rec.certified)});
  out.csv(r, "optimize.csv", "optimize", t);
  r.summary.push_back({"points", io::num(int(recs.size()))});
  out.finish(r, "optimize");
  return r;
}

/// Rabi robustness around the optimum at robust_u_over_gamma and detuning
/// robustness around the optimum at detuning_u_over_gamma.
inline CommandResult cmd_scan(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  auto optimum = [&](double u) {
    auto spec = OptimizationSpec::make(cfg.kind, u);
    spec.integrator_tol = cfg.tol;
    return optimize(spec);
  };
  const OptimumRecord opt_r = optimum(cfg.robust_u_over_gamma);
  const OptimumRecord opt_d = optimum(cfg.detuning_u_over_gamma);
  const auto rabi = robustness_scan_rabi(opt_r, cfg.rabi_multipliers);
  const auto det = robustness_scan_detuning(opt_d, cfg.detuning_offsets);
  CsvTable tr({"rabi_multiplier", "fidelity", "fidelity_loss"});
  double worst_loss = 0;
  for (const auto& [m, f] : rabi) {
    tr.add({io::num(m), io::num(f), io::num(opt_r.fidelity - f)});
    worst_loss = std::max(worst_loss, opt_r.fidelity - f);
  }
  CsvTable td({"detuning_offset_over_rabi", "infidelity", "infidelity_ratio"});
  double worst_ratio = 1;
  for (const auto& [o, inf] : det) {
    const double ratio = inf / (1.0 - opt_d.fidelity);
    td.add({io::num(o), io::num(inf), io::num(ratio)});
    worst_ratio = std::max({worst_ratio, ratio, 1.0 / ratio});
  }
  out.csv(r, "scan-rabi.csv", "scan", tr);
  out.csv(r, "scan-detuning.csv", "scan", td);
  r.summary.push_back({"protocol", to_string(cfg.kind)});
  r.summary.push_back({"rabi_scan_u_over_gamma", io::num(cfg.robust_u_over_gamma)});
  r.summary.push_back({"rabi_scan_optimal_fidelity", io::num(opt_r.fidelity)});
  r.summary.push_back({"worst_rabi_loss", io::num(worst_loss)});
  r.summary.push_back({"detuning_scan_u_over_gamma", io::num(cfg.detuning_u_over_gamma)});
  r.summary.push_back({"detuning_scan_rabi_over_gamma", io::num(opt_d.parameters.rabi)});
  r.summary.push_back({"detuning_scan_optimal_fidelity", io::num(opt_d.fidelity)});
  r.summary.push_back({"worst_infidelity_ratio", io::num(worst_ratio)});
  out.finish(r, "scan");
  return r;
}

/// Config check plus the hydrogen limit of the envelope solver.
inline CommandResult cmd_validate(const RunConfig& cfg, const OutputDir& out) {
  CommandResult r;
  cfg.validate();
  SolverConfig c;
  c.n_eta = cfg.catalog.n_eta;
  c.n_theta = cfg.catalog.n_theta;
  c.eigenpair_count = 2;
  const auto even = assemble_and_solve(c);
  const double e1 = std::abs(even[0].energy / -0.5 - 1.0), e2 = std::abs(even[1].energy / -0.125 - 1.0);
  r.summary.push_back({"config", "ok"});
  r.summary.push_back({"hydrogen_1s_relative_error", io::num(e1)});
  r.summary.push_back({"hydrogen_2s_relative_error", io::num(e2)});
  if (!cfg.isotropic_validation) {
    const DonorSpecies sp = cfg.donor();
    r.summary.push_back({"species", sp.name + ":" + sp.rydberg_state_label});
    r.summary.push_back({"lifetime_s", io::num(sp.lifetime_T1)});
  }
  out.finish(r, "validate");
  if (e1 > 1e-3 || e2 > 2e-3) throw NotConverged("hydrogen limit outside tolerance; refine the mesh");
  return r;
}

inline const std::map<std::string, std::function<CommandResult(const RunConfig&, const OutputDir&)>>& commands() {
  static const std::map<std::string, std::function<CommandResult(const RunConfig&, const OutputDir&)>> table{
      {"solve", cmd_solve},       {"interactions", cmd_interactions}, {"stark", cmd_stark},
      {"ionize", cmd_ionize},     {"optimize", cmd_optimize},         {"scan", cmd_scan},
      {"fidelity-map", cmd_fidelity_map}, {"validate", cmd_validate},
  };
  return table;
}

/// Process exit code for an error category.
inline int exit_code(Error::Category c) {
  switch (c) {
    case Error::Category::Config: return 2;
    case Error::Category::Solver: return 3;
    case Error::Category::Integration: return 4;
    case Error::Category::Io: return 5;
  }
  return 1;
}

}  // namespace rydsi
