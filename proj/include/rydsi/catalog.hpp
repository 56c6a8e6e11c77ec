#pragma once

// Eigenstate catalog of one donor species: single-valley envelopes of the
// m = 0 and m = 1 sectors combined into multivalley states, with the 1s
// manifolds shifted by per-manifold central-cell wells. Persisted as text
// with hexfloat numbers so a reload is bit-exact.

#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rydsi/envelope.hpp"
#include "rydsi/errors.hpp"
#include "rydsi/multivalley.hpp"
#include "rydsi/units.hpp"

namespace rydsi {

struct CatalogSpec {
  int n_eta = 128;
  int n_theta = 96;
  double scaling_radius = 0;  // a_B; 0 picks 2 / Z
  int even_states = 6;        // m = 0, even parity, per central-cell depth
  int odd_states = 6;         // m = 0, odd parity
  int m1_states = 3;          // m = 1, per parity and per azimuthal form
  double central_cell_radius_nm = 0.3;
};

struct CatalogState {
  std::string label;  // "<envelope>:<manifold member>"
  int envelope = 0;
  ValleyManifold manifold;
  double energy = 0;  // E_H
};

struct Catalog {
  std::string species;
  std::string rydberg_label;
  std::string config_hash;
  double anisotropy_ratio = 0;
  double valley_wavevector = 0;  // 1/a_B
  double hartree_meV = 0;
  double bohr_nm = 0;
  std::map<std::string, double> central_cell_depth;  // manifold -> E_H
  double central_cell_radius = 0;                    // a_B
  std::vector<std::string> envelope_labels;
  std::vector<std::shared_ptr<const EnvelopeState>> envelopes;
  std::vector<CatalogState> states;

  int size() const { return int(states.size()); }

  int index_of(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (states[i].label == label) return i;
    throw CatalogInsufficient("state " + label + " is not in the catalog");
  }

  bool contains(const std::string& label) const {
    for (const auto& s : states)
      if (s.label == label) return true;
    return false;
  }

  /// Ground state 1s(A1).
  int ground() const { return index_of("1s:A1"); }

  /// The Rydberg state polarized along z: the symmetric z pair of 2p0, or
  /// the z member of 1s(T2).
  int rydberg() const {
    if (rydberg_label == "2p0") return index_of("2p0:z+");
    if (rydberg_label == "1sT2") return index_of("1s:T2z");
    throw CatalogInsufficient("no Rydberg state rule for " + rydberg_label);
  }

  const EnvelopeState& envelope(int state) const { return *envelopes[states[state].envelope]; }

  /// Valley-diagonal dipole <a| r |b> (e a_B).
  Eigen::Vector3d dipole(int a, int b) const {
    const auto& sa = states[a];
    const auto& sb = states[b];
    const Eigen::Vector3d& local = envelope_dipole(sa.envelope, sb.envelope);
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    for (int axis = 0; axis < 3; ++axis) {
      const double w = sa.manifold.coefficients[2 * axis] * sb.manifold.coefficients[2 * axis] +
                       sa.manifold.coefficients[2 * axis + 1] * sb.manifold.coefficients[2 * axis + 1];
      if (w != 0) d += w * detail::from_valley_frame(axis, local);
    }
    return d;
  }

  const Eigen::Vector3d& envelope_dipole(int ea, int eb) const {
    const std::size_t n = envelopes.size();
    if (dipole_cache_.size() != n * n) {
      dipole_cache_.assign(n * n, std::nullopt);
    }
    auto& slot = dipole_cache_[std::size_t(ea) * n + eb];
    if (!slot) slot = envelope_moments(*envelopes[ea], *envelopes[eb]).dipole;
    return *slot;
  }

  /// Fills the dipole cache up front so concurrent readers never write.
  void precompute_dipoles() const {
    for (int a = 0; a < int(envelopes.size()); ++a)
      for (int b = 0; b < int(envelopes.size()); ++b) envelope_dipole(a, b);
  }

 private:
  mutable std::vector<std::optional<Eigen::Vector3d>> dipole_cache_;
};

namespace detail {

inline double transition_2p0_meV(const DonorSpecies& sp, const SpeciesTable& table) {
  if (sp.rydberg_state_label == "2p0") return sp.transition_energy_meV;
  return table.lookup(sp.name, "2p0").transition_energy_meV;
}

inline void add_pair_states(Catalog& cat, int env, double energy) {
  for (const auto& m : ValleyManifold::members(ManifoldLabel::Pair))
    cat.states.push_back({cat.envelope_labels[env] + ":" + m.name, env, m, energy});
}

}  // namespace detail

/// Solves all sectors, calibrates the 1s manifolds and assembles the
/// multivalley states.
/// 1s(A1) sits the species' 2p0 transition below the computed 2p0; 1s(E) and
/// 1s(T2) sit at the experimental splittings from 1s(A1) where the species
/// table has them, otherwise they keep the uncorrected envelope energy.
inline Catalog build_catalog(const DonorSpecies& sp, const CatalogSpec& spec = {},
                             const PhysicalConstants& constants = {}, const SpeciesTable& table = {}) {
  const EffectiveAtomicUnits au(constants);
  Catalog cat;
  cat.species = sp.name;
  cat.rydberg_label = sp.rydberg_state_label;
  cat.anisotropy_ratio = constants.anisotropy_ratio();
  cat.valley_wavevector = au.valley_wavevector();
  cat.hartree_meV = au.hartree_meV();
  cat.bohr_nm = au.bohr_nm();
  cat.central_cell_radius = au.nm_to_atomic(spec.central_cell_radius_nm);

  SolverConfig base;
  base.anisotropy_ratio = cat.anisotropy_ratio;
  base.core_charge = sp.core_charge;
  base.scaling_radius = spec.scaling_radius > 0 ? spec.scaling_radius : 2.0 / sp.core_charge;
  base.n_eta = spec.n_eta;
  base.n_theta = spec.n_theta;

  auto add_envelope = [&](const std::string& label, const EnvelopeState& s) {
    cat.envelope_labels.push_back(label);
    cat.envelopes.push_back(std::make_shared<const EnvelopeState>(s));
    return int(cat.envelopes.size()) - 1;
  };

  // Odd m = 0: 2p0 and up.
  SolverConfig odd = base;
  odd.parity = Parity::Odd;
  odd.eigenpair_count = spec.odd_states;
  const auto odd_states = assemble_and_solve(odd);
  const double e2p0 = odd_states.front().energy;
  for (int k = 0; k < int(odd_states.size()); ++k) {
    const int env = add_envelope(k == 0 ? "2p0" : "p0_" + std::to_string(k + 1), odd_states[k]);
    detail::add_pair_states(cat, env, odd_states[k].energy);
  }

  // Even m = 0 with one well per 1s manifold.
  SolverConfig even = base;
  even.parity = Parity::Even;
  const double target_a1 = e2p0 - au.meV_to_atomic(detail::transition_2p0_meV(sp, table));
  std::map<ManifoldLabel, double> depth;
  depth[ManifoldLabel::A1] = calibrate_central_cell(target_a1, cat.central_cell_radius, even);
  for (auto [label, binding] : {std::pair{ManifoldLabel::E, sp.binding_1sE_meV},
                                std::pair{ManifoldLabel::T2, sp.binding_1sT2_meV}}) {
    if (binding > 0) {
      const double target = target_a1 + au.meV_to_atomic(sp.ground_binding_meV - binding);
      depth[label] = calibrate_central_cell(target, cat.central_cell_radius, even);
    } else {
      depth[label] = 0.0;
    }
  }
  std::map<double, std::vector<int>> solved;  // depth -> envelope indices
  for (ManifoldLabel label : {ManifoldLabel::A1, ManifoldLabel::E, ManifoldLabel::T2}) {
    const double d = depth[label];
    cat.central_cell_depth[to_string(label)] = d;
    if (!solved.count(d)) {
      SolverConfig c = even;
      c.eigenpair_count = spec.even_states;
      if (d > 0) c.central_cell = CentralCell{d, cat.central_cell_radius};
      const auto states = assemble_and_solve(c);
      std::vector<int> ids;
      for (int k = 0; k < int(states.size()); ++k) {
        std::string name = k == 0 ? "1s" : k == 1 ? "2s" : "s" + std::to_string(k + 1);
        if (d > 0 || depth[ManifoldLabel::A1] > 0) name += "@" + to_string(label);
        ids.push_back(add_envelope(name, states[k]));
      }
      solved[d] = ids;
    }
    for (int env : solved[d]) {
      const std::string base_name = cat.envelope_labels[env].substr(0, cat.envelope_labels[env].find('@'));
      for (const auto& m : ValleyManifold::members(label))
        cat.states.push_back({base_name + ":" + m.name, env, m, cat.envelopes[env]->energy});
    }
  }

  // m = 1, both parities, cos and sin azimuthal forms.
  for (Parity par : {Parity::Even, Parity::Odd}) {
    SolverConfig c = base;
    c.magnetic_quantum_number = 1;
    c.parity = par;
    c.eigenpair_count = spec.m1_states;
    const auto states = assemble_and_solve(c);
    for (int k = 0; k < int(states.size()); ++k) {
      for (bool sine : {false, true}) {
        EnvelopeState s = states[k];
        s.labels.sine = sine;
        const std::string name = (par == Parity::Even ? (k == 0 ? std::string("2p1") : "p1_" + std::to_string(k + 2))
                                                      : "d1_" + std::to_string(k + 3)) +
                                 (sine ? "s" : "c");
        const int env = add_envelope(name, s);
        detail::add_pair_states(cat, env, s.energy);
      }
    }
  }
  return cat;
}

/// Multivalley wavefunction of a catalog state, normalized by Monte Carlo.
inline MultivalleyWavefunction catalog_wavefunction(const Catalog& cat, int state, long samples = 1 << 20,
                                                    std::uint64_t seed = 1) {
  return build_multivalley(cat.envelopes[cat.states[state].envelope], cat.states[state].manifold, cat.species,
                           cat.valley_wavevector, samples, seed);
}

// ---------------------------------------------------------------------------
// Persistence.

namespace detail {

inline std::string hex(double x) {
  std::ostringstream o;
  o << std::hexfloat << x;
  return o.str();
}

inline double read_hex(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw IoError("truncated catalog");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw IoError("bad number '" + tok + "' in catalog");
  return v;
}

inline void expect(std::istream& in, const std::string& key) {
  std::string tok;
  if (!(in >> tok) || tok != key) throw IoError("catalog: expected '" + key + "', got '" + tok + "'");
}

}  // namespace detail

inline void write_catalog(std::ostream& out, const Catalog& cat) {
  using detail::hex;
  out << "rydsi-catalog 1\n";
  out << "config_hash " << (cat.config_hash.empty() ? "-" : cat.config_hash) << "\n";
  out << "species " << cat.species << "\n";
  out << "rydberg " << cat.rydberg_label << "\n";
  out << "anisotropy_ratio " << hex(cat.anisotropy_ratio) << "\n";
  out << "valley_wavevector " << hex(cat.valley_wavevector) << "\n";
  out << "hartree_meV " << hex(cat.hartree_meV) << "\n";
  out << "bohr_nm " << hex(cat.bohr_nm) << "\n";
  out << "central_cell_radius " << hex(cat.central_cell_radius) << "\n";
  out << "central_cell_depths " << cat.central_cell_depth.size() << "\n";
  for (const auto& [k, v] : cat.central_cell_depth) out << k << " " << hex(v) << "\n";
  out << "envelopes " << cat.envelopes.size() << "\n";
  for (std::size_t e = 0; e < cat.envelopes.size(); ++e) {
    const EnvelopeState& s = *cat.envelopes[e];
    out << cat.envelope_labels[e] << " " << hex(s.energy) << " " << s.labels.m << " " << s.labels.radial_nodes << " "
        << s.labels.angular_nodes << " " << int(s.labels.parity) << " " << int(s.labels.sine) << " "
        << int(s.full_domain) << " " << hex(s.norm_check) << " " << hex(s.anisotropy_ratio) << " "
        << hex(s.scaling_radius) << " " << s.surface.rows() << " " << s.surface.cols() << "\n";
    for (Eigen::Index i = 0; i < s.surface.rows(); ++i) {
      for (Eigen::Index j = 0; j < s.surface.cols(); ++j) out << (j ? " " : "") << hex(s.surface(i, j));
      out << "\n";
    }
  }
  out << "states " << cat.states.size() << "\n";
  for (const auto& s : cat.states) {
    out << s.label << " " << s.envelope << " " << to_string(s.manifold.label) << " " << s.manifold.name;
    for (double c : s.manifold.coefficients) out << " " << hex(c);
    out << " " << hex(s.energy) << "\n";
  }
  out << "end\n";
}

inline Catalog read_catalog(std::istream& in) {
  using detail::expect;
  using detail::read_hex;
  Catalog cat;
  expect(in, "rydsi-catalog");
  expect(in, "1");
  expect(in, "config_hash");
  in >> cat.config_hash;
  if (cat.config_hash == "-") cat.config_hash.clear();
  expect(in, "species");
  in >> cat.species;
  expect(in, "rydberg");
  in >> cat.rydberg_label;
  expect(in, "anisotropy_ratio");
  cat.anisotropy_ratio = read_hex(in);
  expect(in, "valley_wavevector");
  cat.valley_wavevector = read_hex(in);
  expect(in, "hartree_meV");
  cat.hartree_meV = read_hex(in);
  expect(in, "bohr_nm");
  cat.bohr_nm = read_hex(in);
  expect(in, "central_cell_radius");
  cat.central_cell_radius = read_hex(in);
  expect(in, "central_cell_depths");
  std::size_t n = 0;
  in >> n;
  for (std::size_t i = 0; i < n; ++i) {
    std::string k;
    in >> k;
    cat.central_cell_depth[k] = read_hex(in);
  }
  expect(in, "envelopes");
  in >> n;
  for (std::size_t e = 0; e < n; ++e) {
    EnvelopeState s;
    std::string label;
    int parity = 0, sine = 0, full = 0;
    Eigen::Index rows = 0, cols = 0;
    in >> label;
    s.energy = read_hex(in);
    in >> s.labels.m >> s.labels.radial_nodes >> s.labels.angular_nodes >> parity >> sine >> full;
    s.norm_check = read_hex(in);
    s.anisotropy_ratio = read_hex(in);
    s.scaling_radius = read_hex(in);
    in >> rows >> cols;
    if (!in || rows <= 1 || cols <= 1) throw IoError("bad envelope header in catalog");
    s.labels.parity = Parity(parity);
    s.labels.sine = sine != 0;
    s.full_domain = full != 0;
    s.surface.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) s.surface(i, j) = read_hex(in);
    cat.envelope_labels.push_back(label);
    cat.envelopes.push_back(std::make_shared<const EnvelopeState>(std::move(s)));
  }
  expect(in, "states");
  in >> n;
  for (std::size_t k = 0; k < n; ++k) {
    CatalogState s;
    std::string manifold;
    in >> s.label >> s.envelope >> manifold >> s.manifold.name;
    if (manifold == "A1") s.manifold.label = ManifoldLabel::A1;
    else if (manifold == "E") s.manifold.label = ManifoldLabel::E;
    else if (manifold == "T2") s.manifold.label = ManifoldLabel::T2;
    else if (manifold == "pair") s.manifold.label = ManifoldLabel::Pair;
    else throw IoError("unknown manifold " + manifold + " in catalog");
    for (double& c : s.manifold.coefficients) c = read_hex(in);
    s.energy = read_hex(in);
    if (s.envelope < 0 || s.envelope >= int(cat.envelopes.size())) throw IoError("bad envelope index in catalog");
    cat.states.push_back(s);
  }
  expect(in, "end");
  return cat;
}

inline void save_catalog(const std::string& path, const Catalog& cat) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_catalog(out, cat);
  if (!out) throw IoError("write failed for " + path);
}

inline Catalog load_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return read_catalog(in);
}

}  // namespace rydsi
