#pragma once

// Multivalley Stark response from the catalog, field ionization rates and
// the largest field a state survives over its lifetime.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydsi/catalog.hpp"
#include "rydsi/errors.hpp"
#include "rydsi/units.hpp"

namespace rydsi {

// ---------------------------------------------------------------------------
// Perturbative Stark shifts

struct StarkResponse {
  std::string state;
  Eigen::Vector3d field_axis = Eigen::Vector3d::UnitZ();
  std::vector<double> fields;   // E_H / (e a_B)
  std::vector<double> shifts;   // E_H
  std::vector<double> dipoles;  // e a_B along the axis, -d(shift)/dF
  double polarizability = 0;    // shift = -polarizability F^2 / 2
  int excluded_terms = 0;       // near-degenerate partners left out
};

/// alpha_ij = 2 sum_k <s|r_i|k><k|r_j|s> / (E_k - E_s), skipping partners
/// closer than `floor` (E_H) in energy.
inline Eigen::Matrix3d polarizability_tensor(const Catalog& cat, int state, double floor, int* excluded = nullptr) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  int skipped = 0;
  const double es = cat.states[state].energy;
  for (int k = 0; k < cat.size(); ++k) {
    if (k == state) continue;
    const Eigen::Vector3d d = cat.dipole(k, state);
    if (d.squaredNorm() == 0) continue;
    const double de = cat.states[k].energy - es;
    if (std::abs(de) < floor) {
      if (d.norm() > 1e-9) ++skipped;
      continue;
    }
    a += 2.0 * d * d.transpose() / de;
  }
  if (excluded) *excluded = skipped;
  return a;
}

/// Central difference with one Richardson step: (4 D(h/2) - D(h)) / 3.
inline double richardson_derivative(const std::function<double(double)>& f, double x, double h) {
  auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
  return (4.0 * d(0.5 * h) - d(h)) / 3.0;
}

/// Second-order multivalley Stark shift of a catalog state along `axis` over
/// a field grid (E_H / (e a_B)), with the induced dipole from the slope.
inline StarkResponse perturbative_stark(const Catalog& cat, int state, const Eigen::Vector3d& axis,
                                        const std::vector<double>& fields, double floor_meV = 0.01) {
  const Eigen::Vector3d n = axis.normalized();
  bool coupled = false;
  for (int k = 0; k < cat.size() && !coupled; ++k)
    if (k != state && std::abs(n.dot(cat.dipole(k, state))) > 1e-6) coupled = true;
  if (!coupled) throw CatalogInsufficient("no catalog state couples to " + cat.states[state].label + " along the axis");
  StarkResponse r;
  r.state = cat.states[state].label;
  r.field_axis = n;
  const Eigen::Matrix3d a = polarizability_tensor(cat, state, floor_meV / cat.hartree_meV, &r.excluded_terms);
  r.polarizability = n.dot(a * n);
  auto shift = [&](double f) { return -0.5 * r.polarizability * f * f; };
  for (double f : fields) {
    r.fields.push_back(f);
    r.shifts.push_back(shift(f));
    const double h = std::max(1e-8, 0.05 * std::abs(f));
    r.dipoles.push_back(-richardson_derivative(shift, f, h));
  }
  return r;
}

/// Field-induced dipole vector of a catalog state, p = alpha . F (e a_B).
inline Eigen::Vector3d induced_dipole_moment(const Catalog& cat, int state, const Eigen::Vector3d& field,
                                             double floor_meV = 0.01) {
  return polarizability_tensor(cat, state, floor_meV / cat.hartree_meV) * field;
}

// ---------------------------------------------------------------------------
// Ionization

/// Hydrogenic tunnelling model of one state. SI units throughout: binding
/// energy in J, fields in V/m, rates in 1/s.
struct IonizationModel {
  int n = 1, m = 0, n1 = 0, n2 = 0;
  double binding_energy = 0;  // J, of the state itself
  double atomic_field_alpha = 0;  // V/m, from the anchor binding
  double attempt_rate_omega = 0;  // 1/s, from the anchor binding
  double bohr_period = 0;         // s, 2 pi hbar / E_b of the state

  bool valid() const { return n == n1 + n2 + std::abs(m) + 1 && binding_energy > 0; }
};

/// alpha = 4 sqrt(2 m) E^{3/2} / (3 e hbar), omega = 12 E / hbar.
inline double landau_alpha(double binding_J, double tunneling_mass_ratio, const PhysicalConstants& c = {}) {
  const double mass = tunneling_mass_ratio * c.electron_mass;
  return 4.0 * std::sqrt(2.0 * mass) * std::pow(binding_J, 1.5) / (3.0 * c.electron_charge * c.hbar);
}

inline double landau_omega(double binding_J, const PhysicalConstants& c = {}) { return 12.0 * binding_J / c.hbar; }

/// Model for a state with binding energy `binding_meV` and parabolic numbers
/// (n, m, n1, n2). Field and time scales come from a ground-like anchor with
/// binding n^2 E_b, so that hydrogen maps onto itself.
inline IonizationModel make_ionization_model(double binding_meV, int n, int m, int n1, int n2,
                                             double tunneling_mass_ratio = 0.191,
                                             const PhysicalConstants& c = {}) {
  IonizationModel im{n, m, n1, n2};
  im.binding_energy = binding_meV * 1e-3 * c.electron_charge;
  const double anchor = n * n * im.binding_energy;
  im.atomic_field_alpha = landau_alpha(anchor, tunneling_mass_ratio, c);
  im.attempt_rate_omega = landau_omega(anchor, c);
  im.bohr_period = 2.0 * M_PI * c.hbar / im.binding_energy;
  if (!im.valid()) throw ConfigError("parabolic quantum numbers must satisfy n = n1 + n2 + |m| + 1");
  return im;
}

inline double factorial(int k) { return std::tgamma(k + 1.0); }

/// Ground-state (Landau) rate (omega alpha / F) exp(-alpha / F), clamped at
/// the inverse Bohr period. Past its peak at F = alpha the tunnelling form no
/// longer applies and the rate sits at the ceiling.
inline double ionization_rate_ground(double binding_meV, double tunneling_mass_ratio, double field_V_per_m,
                                     const PhysicalConstants& c = {}) {
  if (!(field_V_per_m > 0)) return 0.0;
  const double eb = binding_meV * 1e-3 * c.electron_charge;
  const double alpha = landau_alpha(eb, tunneling_mass_ratio, c), omega = landau_omega(eb, c);
  const double ceiling = eb / (2.0 * M_PI * c.hbar);
  if (field_V_per_m >= alpha) return ceiling;
  const double rate = omega * alpha / field_V_per_m * std::exp(-alpha / field_V_per_m);
  return std::min(rate, ceiling);
}

/// Excited-state hydrogen rate in parabolic quantum numbers,
///   w = n^-3 [n2! (n2+|m|)!]^-1 (4 / (n^3 F))^(2 n2 + |m| + 1) exp(-2 / (3 n^3 F) + 3 (n1 - n2)),
/// with F in the anchor's atomic field unit (3 alpha / 2) and w in its
/// atomic rate unit (omega / 6). Clamped at the inverse Bohr period, and held
/// there beyond the formula's peak at F = 2 / (3 n^3 (2 n2 + |m| + 1)).
inline double ionization_rate_excited(const IonizationModel& im, double field_V_per_m) {
  if (!(field_V_per_m > 0)) return 0.0;
  const double f0 = 1.5 * im.atomic_field_alpha;
  const double t0 = 6.0 / im.attempt_rate_omega;
  const double f = field_V_per_m / f0;
  const double n3 = double(im.n) * im.n * im.n;
  const int am = std::abs(im.m);
  if (f >= 2.0 / (3.0 * n3 * (2 * im.n2 + am + 1))) return 1.0 / im.bohr_period;
  const double log_w = -std::log(n3) - std::log(factorial(im.n2) * factorial(im.n2 + am)) +
                       (2 * im.n2 + am + 1) * std::log(4.0 / (n3 * f)) - 2.0 / (3.0 * n3 * f) +
                       3.0 * (im.n1 - im.n2);
  const double rate = std::exp(log_w) / t0;
  return std::min(rate, 1.0 / im.bohr_period);
}

/// P = 1 - exp(-lifetime * rate).
inline double ionization_probability(double rate, double lifetime) {
  if (!(lifetime > 0)) throw ConfigError("lifetime must be positive");
  return -std::expm1(-lifetime * rate);
}

/// Classical over-the-barrier field E_b^2 / (4 Z e V0), V0 = e^2 / (4 pi eps0 eps_S), in V/m.
inline double classical_threshold(double binding_meV, int core_charge, const PhysicalConstants& c = {}) {
  const double eb = binding_meV * 1e-3 * c.electron_charge;
  const double v0 = c.electron_charge * c.electron_charge / (4.0 * M_PI * c.vacuum_permittivity * c.silicon_dielectric);
  return eb * eb / (4.0 * core_charge * c.electron_charge * v0);
}

/// Largest field whose ionization probability over `lifetime` stays within
/// `budget`, by bisection on the monotone rate curve. Capped at `cap`
/// (V/m), normally the classical threshold.
inline double max_applicable_field(const std::function<double(double)>& rate, double lifetime, double budget,
                                   double cap) {
  if (!(budget > 0 && budget < 1)) throw ConfigError("probability budget must lie in (0, 1)");
  auto p = [&](double f) { return ionization_probability(rate(f), lifetime); };
  if (p(cap) <= budget) return cap;
  double lo = 0, hi = cap;
  for (int k = 0; k < 200 && hi - lo > 1e-12 * cap; ++k) {
    const double mid = 0.5 * (lo + hi);
    (p(mid) <= budget ? lo : hi) = mid;
  }
  return lo;
}

struct IonizationAnchor {
  std::string label;
  double max_field_V_per_um = 0;
  double classical_threshold_V_per_um = 0;
};

/// Quantum numbers of the states the gate uses: 2p0 -> (2, 0, 1, 0),
/// 1s states -> (1, 0, 0, 0).
inline IonizationModel species_ionization_model(const DonorSpecies& sp, double tunneling_mass_ratio = 0.191,
                                                const PhysicalConstants& c = {}) {
  if (sp.rydberg_state_label == "2p0")
    return make_ionization_model(sp.rydberg_binding_meV, 2, 0, 1, 0, tunneling_mass_ratio, c);
  if (sp.rydberg_state_label.rfind("1s", 0) == 0)
    return make_ionization_model(sp.rydberg_binding_meV, 1, 0, 0, 0, tunneling_mass_ratio, c);
  throw ConfigError("no ionization model for state " + sp.rydberg_state_label);
}

inline IonizationAnchor ionization_anchor(const DonorSpecies& sp, double budget = 0.1,
                                          double tunneling_mass_ratio = 0.191, const PhysicalConstants& c = {}) {
  const IonizationModel im = species_ionization_model(sp, tunneling_mass_ratio, c);
  const double cap = classical_threshold(sp.rydberg_binding_meV, sp.core_charge, c);
  const double f =
      max_applicable_field([&](double x) { return ionization_rate_excited(im, x); }, sp.lifetime_T1, budget, cap);
  return {sp.name + ":" + sp.rydberg_state_label, f * 1e-6, cap * 1e-6};
}

}  // namespace rydsi
