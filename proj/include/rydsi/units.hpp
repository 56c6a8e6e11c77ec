#pragma once

// Physical constants, the effective atomic unit system of a silicon donor and
// the donor species table.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rydsi/errors.hpp"

namespace rydsi {

struct PhysicalConstants {
  double hbar = 1.054571817e-34;               // J s
  double electron_charge = 1.602176634e-19;    // C
  double vacuum_permittivity = 8.8541878128e-12;  // F/m
  double silicon_dielectric = 11.4;
  double electron_mass = 9.1093837015e-31;     // kg
  double silicon_lattice_constant = 0.5431e-9;  // m
  double transverse_mass_ratio = 0.191;
  double longitudinal_mass_ratio = 0.916;

  /// gamma_m = m_t / m_l
  double anisotropy_ratio() const {
    return transverse_mass_ratio / longitudinal_mass_ratio;
  }
  /// Valley minimum at 0.85 of the zone-boundary wavevector, in 1/m.
  double valley_wavevector() const {
    return 0.85 * 2.0 * M_PI / silicon_lattice_constant;
  }
  bool valid() const {
    return silicon_dielectric > 0 && transverse_mass_ratio > 0 &&
           transverse_mass_ratio < longitudinal_mass_ratio &&
           longitudinal_mass_ratio < 1.0;
  }
};

enum class Dimension { Length, Energy, Field, Time, Dimensionless };

/// A dimensioned SI value (m, J, V/m, s).
struct Quantity {
  double value;
  Dimension dimension;
};

/// Hydrogenic units rescaled by the transverse mass and the silicon
/// dielectric constant.
class EffectiveAtomicUnits {
 public:
  explicit EffectiveAtomicUnits(const PhysicalConstants& c = {}) : c_(c) {
    const double four_pi_eps = 4.0 * M_PI * c.vacuum_permittivity * c.silicon_dielectric;
    const double mass = c.transverse_mass_ratio * c.electron_mass;
    const double e2 = c.electron_charge * c.electron_charge;
    bohr_radius_ = four_pi_eps * c.hbar * c.hbar / (mass * e2);
    hartree_ = mass * e2 * e2 / (four_pi_eps * four_pi_eps * c.hbar * c.hbar);
    field_unit_ = hartree_ / (bohr_radius_ * c.electron_charge);
  }

  double bohr_radius() const { return bohr_radius_; }  // m
  double hartree() const { return hartree_; }          // J
  double field_unit() const { return field_unit_; }    // V/m
  const PhysicalConstants& constants() const { return c_; }

  double to_atomic(const Quantity& q) const { return q.value / unit_of(q.dimension); }
  Quantity from_atomic(double x, Dimension d) const { return {x * unit_of(d), d}; }

  // Shorthands for the units the pipeline talks in.
  double hartree_meV() const { return hartree_ / c_.electron_charge * 1e3; }
  double bohr_nm() const { return bohr_radius_ * 1e9; }
  double meV_to_atomic(double mev) const { return mev / hartree_meV(); }
  double atomic_to_meV(double e) const { return e * hartree_meV(); }
  double nm_to_atomic(double nm) const { return nm / bohr_nm(); }
  double atomic_to_nm(double l) const { return l * bohr_nm(); }
  /// V/um to field units.
  double field_to_atomic(double v_per_um) const { return v_per_um * 1e6 / field_unit_; }
  double atomic_to_field(double f) const { return f * field_unit_ * 1e-6; }
  /// Valley wavevector in inverse effective Bohr radii.
  double valley_wavevector() const { return c_.valley_wavevector() * bohr_radius_; }

 private:
  double unit_of(Dimension d) const {
    switch (d) {
      case Dimension::Length: return bohr_radius_;
      case Dimension::Energy: return hartree_;
      case Dimension::Field: return field_unit_;
      default: break;
    }
    throw DimensionMismatch("only length, energy and field convert to effective atomic units");
  }

  PhysicalConstants c_;
  double bohr_radius_ = 0;
  double hartree_ = 0;
  double field_unit_ = 0;
};

inline constexpr double kDebye = 3.33564e-30;  // C m

struct DonorSpecies {
  std::string name;
  std::string rydberg_state_label;
  int core_charge = 1;
  double transition_dipole_debye = 0;
  double transition_energy_meV = 0;
  double lifetime_T1 = 0;   // s
  double coherence_T2 = 0;  // s
  double ground_binding_meV = 0;
  double rydberg_binding_meV = 0;
  // Experimental 1s manifold binding energies used to calibrate the
  // central cell of each manifold; zero means "no correction".
  double binding_1sE_meV = 0;
  double binding_1sT2_meV = 0;

  bool valid() const {
    return lifetime_T1 > 0 && coherence_T2 > 0 && coherence_T2 <= 2.0 * lifetime_T1 &&
           core_charge > 0;
  }
};

/// Gate-dynamics decoherence rates. In the gate modules rates are expressed in
/// units of gamma_se.
struct DecoherenceRates {
  double gamma_se = 1.0;
  double gamma_de = 0.5;

  static DecoherenceRates from_species(const DonorSpecies& s) {
    return {1.0 / s.lifetime_T1, 0.5 / s.lifetime_T1};
  }
  static DecoherenceRates normalized() { return {1.0, 0.5}; }
  static DecoherenceRates none() { return {0.0, 0.0}; }
};

/// u / gamma_se for an interaction energy and a species lifetime.
inline double interaction_over_gamma(double u_meV, const DonorSpecies& s,
                                     const PhysicalConstants& c = {}) {
  const double u_joule = u_meV * 1e-3 * c.electron_charge;
  return u_joule / c.hbar * s.lifetime_T1;
}

namespace detail {

inline std::map<std::string, DonorSpecies> default_species_table() {
  std::map<std::string, DonorSpecies> t;
  // P and As share dipole and lifetime; As keeps its own 2p0 transition.
  DonorSpecies p{"P", "2p0", 1, 31.0, 34.0, 235e-12, 160e-12, 45.59, 11.48, 32.58, 33.89};
  DonorSpecies as{"As", "2p0", 1, 31.0, 42.27, 235e-12, 160e-12, 53.76, 11.49, 31.26, 32.67};
  // Se+ 2p0: conservative T1 = 1 ns, T2 at its 2 T1 ceiling.
  DonorSpecies se_2p0{"Se+", "2p0", 2, 0.97, 548.0, 1e-9, 2e-9, 593.3, 45.3, 0.0, 166.3};
  DonorSpecies se_t2{"Se+", "1sT2", 2, 1.96, 427.0, 7.7e-9, 7.7e-9, 593.3, 166.3, 0.0, 166.3};
  for (const auto& s : {p, as, se_2p0, se_t2}) t[s.name + ":" + s.rydberg_state_label] = s;
  return t;
}

}  // namespace detail

/// Species table with compiled-in defaults. Entries can be overridden from
/// an INI-style file with one section per "<name>:<state>".
class SpeciesTable {
 public:
  SpeciesTable() : table_(detail::default_species_table()) {}

  const DonorSpecies& lookup(const std::string& name, const std::string& state) const {
    auto it = table_.find(name + ":" + state);
    if (it == table_.end()) throw UnknownSpecies(name + " with Rydberg state " + state);
    return it->second;
  }

  void load(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(e.what());
    }
    for (const auto& [section, body] : tree) {
      const auto colon = section.find(':');
      if (colon == std::string::npos) throw ConfigError("species section must be name:state, got " + section);
      DonorSpecies s;
      auto it = table_.find(section);
      if (it != table_.end()) s = it->second;
      s.name = section.substr(0, colon);
      s.rydberg_state_label = section.substr(colon + 1);
      try {
        s.core_charge = body.get("core_charge", s.core_charge);
        s.transition_dipole_debye = body.get("transition_dipole_debye", s.transition_dipole_debye);
        s.transition_energy_meV = body.get("transition_energy_meV", s.transition_energy_meV);
        s.lifetime_T1 = body.get("lifetime_T1_s", s.lifetime_T1);
        s.coherence_T2 = body.get("coherence_T2_s", s.coherence_T2);
        s.ground_binding_meV = body.get("ground_binding_meV", s.ground_binding_meV);
        s.rydberg_binding_meV = body.get("rydberg_binding_meV", s.rydberg_binding_meV);
        s.binding_1sE_meV = body.get("binding_1sE_meV", s.binding_1sE_meV);
        s.binding_1sT2_meV = body.get("binding_1sT2_meV", s.binding_1sT2_meV);
      } catch (const boost::property_tree::ptree_error& e) {
        throw ConfigError(section + ": " + e.what());
      }
      if (!s.valid()) throw ConfigError(section + ": requires T1 > 0 and T2 <= 2 T1");
      table_[section] = s;
    }
  }

  std::vector<DonorSpecies> entries() const {
    std::vector<DonorSpecies> out;
    for (const auto& [k, v] : table_) out.push_back(v);
    return out;
  }

 private:
  std::map<std::string, DonorSpecies> table_;
};

inline DonorSpecies species_lookup(const std::string& name, const std::string& state) {
  static const SpeciesTable table;
  return table.lookup(name, state);
}

}  // namespace rydsi
