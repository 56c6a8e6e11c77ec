#pragma once

// Interaction channels between two donors: intersite Coulomb repulsion W,
// exchange J, field-induced dipole coupling V_dd and the second-order Van der
// Waals shift, and their combination into the Rydberg interaction u.
// Effective atomic units inside (V0 = 1 E_H a_B); results in meV.

#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rydsi/catalog.hpp"
#include "rydsi/errors.hpp"
#include "rydsi/montecarlo.hpp"
#include "rydsi/multivalley.hpp"
#include "rydsi/parallel.hpp"
#include "rydsi/stark.hpp"

namespace rydsi {

struct DonorPairGeometry {
  Eigen::Vector3d displacement_nm = Eigen::Vector3d(0, 0, 10);  // donor 2 - donor 1
  Eigen::Vector3d field_V_per_um = Eigen::Vector3d::Zero();
  Eigen::Vector3d polarization_axis = Eigen::Vector3d::UnitZ();
  double guard_nm = 8.0;
  Eigen::Vector3d offset_nm = Eigen::Vector3d::Zero();  // extra shift of donor 2's site

  void check() const {
    if ((displacement_nm + offset_nm).norm() < guard_nm)
      throw GuardViolation("separation below the " + std::to_string(guard_nm) + " nm guard");
  }
};

struct InteractionBreakdown {
  double w_rr = 0, w_rg = 0, w_gg = 0;
  double w_combination = 0;  // w_rr - 2 w_rg + w_gg, same samples
  double j_rr = 0;
  double v_vdw_rr = 0;
  double v_dd_rr = 0;
  double total_u = 0;
  struct {
    double w_rr = 0, w_rg = 0, w_gg = 0, w_combination = 0, j_rr = 0;
  } mc_errors;
  int vdw_excluded = 0;  // near-degenerate intermediate pairs left out
  bool field_on = false;
};

struct InteractionOptions {
  long samples = 1 << 17;
  std::uint64_t seed = 1;
  double vdw_floor_meV = 0.01;
};

// ---------------------------------------------------------------------------
// Channels on wavefunctions (atomic units)

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5)), dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

/// Electrostatic potential of |F|^2 for an axially symmetric envelope, from
/// a Legendre expansion of the density on a radial grid. Evaluated in the
/// valley frame.
class EnvelopePotential {
 public:
  explicit EnvelopePotential(const EnvelopeState& s, int lmax = 40, int radial = 2000, int angular = 96)
      : lmax_(lmax - lmax % 2), r0_(s.scaling_radius) {
    if (s.labels.m != 0) throw ConfigError("Coulomb potentials need m = 0 envelopes");
    const double he = 0.5 * M_PI / s.n_eta();
    eta_max_ = (s.n_eta() - 1) * he;
    step_ = eta_max_ / radial;
    const double sg = std::sqrt(s.anisotropy_ratio);
    std::vector<double> mu, wt;
    gauss_legendre(angular, mu, wt);
    const int nl = lmax_ / 2 + 1;
    std::vector<double> r(radial + 1);
    for (int k = 0; k <= radial; ++k) r[k] = r0_ * std::tan(k * step_);
    // c_l(r) = (2l+1)/2 int rho P_l dmu, even l only.
    std::vector<std::vector<double>> c(nl, std::vector<double>(radial + 1, 0.0));
    std::vector<double> pl(lmax_ + 1);
    for (int j = 0; j < angular; ++j) {
      legendre(mu[j], pl);
      const double st = std::sqrt(1.0 - mu[j] * mu[j]);
      for (int k = 1; k <= radial; ++k) {
        const double x = r[k] * st, z = r[k] * mu[j];
        const double rp = std::sqrt(x * x + z * z / (sg * sg));
        if (std::atan(rp / r0_) >= eta_max_) continue;
        const double f = evaluate_envelope(s, x, 0.0, z);
        for (int l = 0; l <= lmax_; l += 2) c[l / 2][k] += 0.5 * (2 * l + 1) * wt[j] * f * f * pl[l];
      }
    }
    // a_l(r) = r^-(l+1) int_0^r c_l s^(l+2) ds, b_l(r) = r^l int_r^inf c_l s^(1-l) ds.
    a_.assign(nl, std::vector<double>(radial + 1, 0.0));
    b_.assign(nl, std::vector<double>(radial + 1, 0.0));
    for (int i = 0; i < nl; ++i) {
      const int l = 2 * i;
      for (int k = 1; k <= radial; ++k) {
        const double q = r[k - 1] / r[k], dr = r[k] - r[k - 1];
        a_[i][k] = std::pow(q, l + 1) * a_[i][k - 1] +
                   0.5 * dr * (c[i][k - 1] * r[k - 1] * std::pow(q, l + 1) + c[i][k] * r[k]);
      }
      for (int k = radial - 1; k >= 0; --k) {
        const double q = r[k] / r[k + 1], dr = r[k + 1] - r[k];
        const double up = l == 0 ? 1.0 : std::pow(q, l);
        b_[i][k] = up * b_[i][k + 1] + 0.5 * dr * (c[i][k] * r[k] + c[i][k + 1] * r[k + 1] * up);
      }
    }
    r_out_ = r[radial];
    charge_ = 4.0 * M_PI * a_[0][radial] * r_out_;
  }

  /// Integral of |F|^2 on the grid.
  double charge() const { return charge_; }

  /// Potential at a valley-frame point (E_H / e for unit charge density).
  double operator()(const Eigen::Vector3d& p) const {
    const double r = p.norm();
    const double mu = r > 0 ? p.z() / r : 1.0;
    std::vector<double> pl(lmax_ + 1);
    legendre(mu, pl);
    double v = 0;
    if (r >= r_out_) {
      const int n = int(a_[0].size()) - 1;
      for (int l = 0; l <= lmax_; l += 2)
        v += 4.0 * M_PI / (2 * l + 1) * a_[l / 2][n] * std::pow(r_out_ / r, l + 1) * pl[l];
      return v;
    }
    const double t = std::atan(r / r0_) / step_;
    const int k = std::min(int(t), int(a_[0].size()) - 2);
    const double f = t - k;
    for (int l = 0; l <= lmax_; l += 2) {
      const auto& a = a_[l / 2];
      const auto& b = b_[l / 2];
      v += 4.0 * M_PI / (2 * l + 1) * ((1 - f) * (a[k] + b[k]) + f * (a[k + 1] + b[k + 1])) * pl[l];
    }
    return v;
  }

 private:
  static void legendre(double x, std::vector<double>& p) {
    p[0] = 1.0;
    if (p.size() > 1) p[1] = x;
    for (std::size_t l = 2; l < p.size(); ++l) p[l] = ((2.0 * l - 1.0) * x * p[l - 1] - (l - 1.0) * p[l - 2]) / l;
  }

  int lmax_;
  double r0_, eta_max_ = 0, step_ = 0, r_out_ = 0, charge_ = 0;
  std::vector<std::vector<double>> a_, b_;
};

/// Density and potential of a multivalley state with the Bloch oscillations
/// averaged out: scale^2 sum_axis (a+^2 + a-^2) |F_axis|^2. Interference
/// between valleys varies on the lattice scale and drops out of Coulomb
/// integrals between donors. Scaled to carry exactly one electron.
class SmoothCharge {
 public:
  explicit SmoothCharge(const MultivalleyWavefunction& psi)
      : psi_(psi), potential_(std::make_shared<EnvelopePotential>(*psi.envelope)) {
    double total = 0;
    for (int a = 0; a < 3; ++a) {
      const double p = psi.manifold.coefficients[2 * a], m = psi.manifold.coefficients[2 * a + 1];
      weight_[a] = p * p + m * m;
      total += weight_[a];
    }
    for (auto& w : weight_) w /= total * potential_->charge();
  }

  double density(const Eigen::Vector3d& point) const {
    const Eigen::Vector3d r = point - psi_.origin;
    double v = 0;
    for (int a = 0; a < 3; ++a)
      if (weight_[a] > 0) {
        const Eigen::Vector3d l = detail::to_valley_frame(a, r);
        const double f = evaluate_envelope(*psi_.envelope, l.x(), l.y(), l.z());
        v += weight_[a] * f * f;
      }
    return v;
  }

  double potential(const Eigen::Vector3d& point) const {
    const Eigen::Vector3d r = point - psi_.origin;
    double v = 0;
    for (int a = 0; a < 3; ++a)
      if (weight_[a] > 0) v += weight_[a] * (*potential_)(detail::to_valley_frame(a, r));
    return v;
  }

  const MultivalleyWavefunction& wavefunction() const { return psi_; }

 private:
  MultivalleyWavefunction psi_;
  std::shared_ptr<const EnvelopePotential> potential_;
  std::array<double, 3> weight_{};
};

struct CoulombSet {
  Estimate rr, rg, gg, combination;
};

/// W terms between smoothed charges. One electron is sampled from the
/// mixture (q_r + q_g) / 2; the other enters through its potential. All four
/// estimates share samples, so combination = rr - 2 rg + gg holds sample by
/// sample and the monopole parts cancel before averaging. Each sample is
/// also used reflected through the first donor.
inline CoulombSet coulomb_set(const SmoothCharge& r, const SmoothCharge& g, const Eigen::Vector3d& r_vec,
                              long samples, std::uint64_t seed) {
  if (samples < 32) throw ConfigError("too few samples");
  const MultivalleySampler sr(r.wavefunction()), sg(g.wavefunction());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BatchAccumulator a_rr(samples), a_rg(samples), a_gg(samples), a_c(samples);
  for (long i = 0; i < samples; ++i) {
    const Eigen::Vector3d a = u(rng) < 0.5 ? sr.sample(rng) : sg.sample(rng);
    double vrr = 0, vrg = 0, vgg = 0;
    for (double sign : {1.0, -1.0}) {
      const Eigen::Vector3d x = sign * a;
      const double q = 0.5 * (sr.density(x) + sg.density(x));
      if (!(q > 0)) continue;
      const double dr = r.density(x), dg = g.density(x);
      const double pr = r.potential(x - r_vec), pg = g.potential(x - r_vec);
      vrr += 0.5 * dr * pr / q;
      vrg += 0.25 * (dr * pg + dg * pr) / q;
      vgg += 0.5 * dg * pg / q;
    }
    a_rr.add(i, vrr);
    a_rg.add(i, vrg);
    a_gg.add(i, vgg);
    a_c.add(i, vrr - 2.0 * vrg + vgg);
  }
  return {a_rr.result(), a_rg.result(), a_gg.result(), a_c.result()};
}

/// W = int int rho1(r1) rho2(r2 - R) / |r1 - r2| for Bloch-averaged densities.
inline Estimate coulomb_repulsion(const MultivalleyWavefunction& psi1, const MultivalleyWavefunction& psi2,
                                  const Eigen::Vector3d& r_vec, long samples, std::uint64_t seed) {
  const SmoothCharge c1(psi1), c2(psi2);
  if (samples < 32) throw ConfigError("too few samples");
  const MultivalleySampler s1(psi1);
  std::mt19937_64 rng(seed);
  BatchAccumulator acc(samples);
  for (long i = 0; i < samples; ++i) {
    const Eigen::Vector3d a = s1.sample(rng);
    double v = 0;
    for (double sign : {1.0, -1.0}) {
      const Eigen::Vector3d x = sign * a;
      const double q = s1.density(x);
      if (q > 0) v += 0.5 * c1.density(x) * c2.potential(x - r_vec) / q;
    }
    acc.add(i, v);
  }
  return acc.result();
}

/// Same integral over both electrons with the full multivalley densities,
/// oscillations included. Much noisier; kept as a cross-check.
inline Estimate coulomb_repulsion_6d(const MultivalleyWavefunction& psi1, const MultivalleyWavefunction& psi2,
                                     const Eigen::Vector3d& r_vec, long samples, std::uint64_t seed) {
  if (samples < 32) throw ConfigError("too few samples");
  const MultivalleySampler s1(psi1), s2(psi2);
  std::mt19937_64 rng(seed);
  BatchAccumulator acc(samples);
  for (long i = 0; i < samples; ++i) {
    const Eigen::Vector3d a = s1.sample(rng);
    const Eigen::Vector3d b = s2.sample(rng);
    double v = 0;
    for (double sign : {1.0, -1.0}) {
      const Eigen::Vector3d x1 = sign * a, x2 = sign * b;
      const double q = s1.density(x1) * s2.density(x2);
      const double d = (x1 - x2 - r_vec).norm();
      if (q > 0 && d > 0) v += 0.5 * psi1.density(x1) * psi2.density(x2) / (q * d);
    }
    acc.add(i, v);
  }
  return acc.result();
}

/// Heitler-London exchange
///   J = int int psi1*(r1) psi2*(r2 - R) psi2(r1 - R) psi1(r2) / |r1 - r2|,
/// sampling each electron from (q1(r) + q2(r - R)) / 2.
inline Estimate exchange(const MultivalleyWavefunction& psi1, const MultivalleyWavefunction& psi2,
                         const Eigen::Vector3d& r_vec, long samples, std::uint64_t seed) {
  if (samples < 32) throw ConfigError("too few samples");
  const MultivalleySampler s1(psi1), s2(psi2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BatchAccumulator acc(samples);
  // Samples are drawn about the midpoint so the reflection maps the mixture
  // onto itself.
  const Eigen::Vector3d mid = 0.5 * r_vec;
  auto draw = [&]() -> Eigen::Vector3d {
    return (u(rng) < 0.5 ? s1.sample(rng) : Eigen::Vector3d(s2.sample(rng) + r_vec)) - mid;
  };
  auto mix = [&](const Eigen::Vector3d& x) { return 0.5 * (s1.density(x) + s2.density(x - r_vec)); };
  for (long i = 0; i < samples; ++i) {
    const Eigen::Vector3d a = draw();
    const Eigen::Vector3d b = draw();
    double v = 0;
    for (double sign : {1.0, -1.0}) {
      const Eigen::Vector3d x1 = mid + sign * a, x2 = mid + sign * b;
      const double q = mix(x1) * mix(x2);
      const double d = (x1 - x2).norm();
      if (!(q > 0 && d > 0)) continue;
      const std::complex<double> g1 = std::conj(psi1(x1)) * psi2(x1 - r_vec);
      const std::complex<double> g2 = std::conj(psi2(x2 - r_vec)) * psi1(x2);
      v += 0.5 * (g1 * g2).real() / (q * d);
    }
    acc.add(i, v);
  }
  return acc.result();
}

/// [p1.p2 - 3 (n.p1)(n.p2)] / R^3.
inline double induced_dipole(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2, const Eigen::Vector3d& r_vec) {
  const double r = r_vec.norm();
  if (!(r > 0)) throw ZeroSeparation("dipole coupling needs a nonzero separation");
  const Eigen::Vector3d n = r_vec / r;
  return (p1.dot(p2) - 3.0 * n.dot(p1) * n.dot(p2)) / (r * r * r);
}

/// Second-order dipole-dipole shift of the pair |s s>:
///   -sum_{k,l} |<k l| V_dd |s s>|^2 / (E_k + E_l - 2 E_s)
/// over catalog pairs. Denominators below `floor` (E_H) are left out and
/// counted in `excluded`.
inline double van_der_waals(const Catalog& cat, int state, const Eigen::Vector3d& r_vec, double floor,
                            int* excluded = nullptr) {
  const double r = r_vec.norm();
  if (!(r > 0)) throw ZeroSeparation("dipole coupling needs a nonzero separation");
  const Eigen::Vector3d n = r_vec / r;
  const double r3 = r * r * r;
  std::vector<int> idx;
  std::vector<Eigen::Vector3d> d;
  for (int k = 0; k < cat.size(); ++k) {
    const Eigen::Vector3d v = cat.dipole(k, state);
    if (v.squaredNorm() > 0) {
      idx.push_back(k);
      d.push_back(v);
    }
  }
  const double es = cat.states[state].energy;
  double sum = 0;
  int skipped = 0;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const double m = (d[a].dot(d[b]) - 3.0 * n.dot(d[a]) * n.dot(d[b])) / r3;
      if (m == 0) continue;
      const double den = cat.states[idx[a]].energy + cat.states[idx[b]].energy - 2.0 * es;
      if (std::abs(den) < floor) {
        ++skipped;
        continue;
      }
      sum -= m * m / den;
    }
  if (excluded) *excluded = skipped;
  return sum;
}

// ---------------------------------------------------------------------------
// Assembled interaction

/// Everything the per-geometry evaluation needs, built once per catalog.
struct InteractionContext {
  const Catalog* catalog = nullptr;
  int rydberg = -1, ground = -1;
  MultivalleyWavefunction psi_r, psi_g;
  std::shared_ptr<const SmoothCharge> charge_r, charge_g;
  Eigen::Matrix3d alpha_r = Eigen::Matrix3d::Zero(), alpha_g = Eigen::Matrix3d::Zero();

  static InteractionContext make(const Catalog& cat, long norm_samples = 1 << 20, std::uint64_t seed = 1,
                                 double floor_meV = 0.01) {
    InteractionContext c;
    c.catalog = &cat;
    c.rydberg = cat.rydberg();
    c.ground = cat.ground();
    cat.precompute_dipoles();
    c.psi_r = catalog_wavefunction(cat, c.rydberg, norm_samples, derive_seed(seed, 101));
    c.psi_g = catalog_wavefunction(cat, c.ground, norm_samples, derive_seed(seed, 102));
    c.charge_r = std::make_shared<SmoothCharge>(c.psi_r);
    c.charge_g = std::make_shared<SmoothCharge>(c.psi_g);
    c.alpha_r = polarizability_tensor(cat, c.rydberg, floor_meV / cat.hartree_meV);
    c.alpha_g = polarizability_tensor(cat, c.ground, floor_meV / cat.hartree_meV);
    return c;
  }
};

/// All channels at one geometry. With a field, u = V_dd - J + V_VdW; without,
/// u = (W_rr - 2 W_rg + W_gg) - J + V_VdW. J and V_VdW are kept for the
/// doubly excited pair only.
inline InteractionBreakdown total_interaction(const DonorPairGeometry& geo, const InteractionContext& ctx,
                                              const InteractionOptions& opt = {}) {
  geo.check();
  const Catalog& cat = *ctx.catalog;
  const double to_mev = cat.hartree_meV;
  const Eigen::Vector3d r_vec = (geo.displacement_nm + geo.offset_nm) / cat.bohr_nm;
  InteractionBreakdown out;

  const CoulombSet w = coulomb_set(*ctx.charge_r, *ctx.charge_g, r_vec, opt.samples, derive_seed(opt.seed, 1));
  out.w_rr = w.rr.value * to_mev;
  out.w_rg = w.rg.value * to_mev;
  out.w_gg = w.gg.value * to_mev;
  out.w_combination = w.combination.value * to_mev;
  out.mc_errors.w_rr = w.rr.error * to_mev;
  out.mc_errors.w_rg = w.rg.error * to_mev;
  out.mc_errors.w_gg = w.gg.error * to_mev;
  out.mc_errors.w_combination = w.combination.error * to_mev;

  const Estimate j = exchange(ctx.psi_r, ctx.psi_r, r_vec, opt.samples, derive_seed(opt.seed, 2));
  out.j_rr = j.value * to_mev;
  out.mc_errors.j_rr = j.error * to_mev;

  out.v_vdw_rr = van_der_waals(cat, ctx.rydberg, r_vec, opt.vdw_floor_meV / to_mev, &out.vdw_excluded) * to_mev;

  const EffectiveAtomicUnits au;
  const Eigen::Vector3d field = geo.field_V_per_um * au.field_to_atomic(1.0);
  out.field_on = field.norm() > 0;
  // Singly and doubly excited dipole couplings combine into (p_r - p_g).
  const Eigen::Vector3d dp = (ctx.alpha_r - ctx.alpha_g) * field;
  out.v_dd_rr = out.field_on ? induced_dipole(dp, dp, r_vec) * to_mev : 0.0;

  out.total_u = (out.field_on ? out.v_dd_rr : out.w_combination) - out.j_rr + out.v_vdw_rr;
  return out;
}

// ---------------------------------------------------------------------------
// Maps

struct InteractionMap {
  int axis_a = 0, axis_b = 2;  // plane spanned by these coordinate axes
  std::vector<double> coords;  // cell centres along both axes (nm)
  std::vector<InteractionBreakdown> cells;  // row-major, index = i_a * n + i_b
  std::vector<char> masked;                 // inside the guard

  int n() const { return int(coords.size()); }
  const InteractionBreakdown& at(int ia, int ib) const { return cells[std::size_t(ia) * n() + ib]; }
  bool is_masked(int ia, int ib) const { return masked[std::size_t(ia) * n() + ib]; }
};

/// Parses "xz", "xy" or "yz".
inline std::pair<int, int> plane_axes(const std::string& plane) {
  auto axis = [&](char c) {
    if (c < 'x' || c > 'z') throw ConfigError("plane must name two of x, y, z: " + plane);
    return c - 'x';
  };
  if (plane.size() != 2 || plane[0] == plane[1]) throw ConfigError("plane must name two of x, y, z: " + plane);
  return {axis(plane[0]), axis(plane[1])};
}

/// R and -R give the same pair for identical donors; both map to the
/// representative whose first nonzero component is positive.
inline Eigen::Vector3d canonical_displacement(const Eigen::Vector3d& r) {
  for (int k = 0; k < 3; ++k) {
    if (r(k) > 0) return r;
    if (r(k) < 0) return -r;
  }
  return r;
}

/// total_u over donor-2 positions on a centred n x n grid spanning
/// [-extent, extent] nm in the plane, donor 1 at the origin. Cells inside the
/// guard are masked. Seeds depend on the cell, so the thread count does not
/// change the result.
inline InteractionMap interaction_map(const std::string& plane, double extent_nm, int resolution,
                                      const DonorPairGeometry& base, const InteractionContext& ctx,
                                      const InteractionOptions& opt = {}, int threads = 1) {
  if (resolution < 2) throw ConfigError("map resolution must be at least 2");
  if (!(extent_nm > 0)) throw ConfigError("map extent must be positive");
  InteractionMap map;
  std::tie(map.axis_a, map.axis_b) = plane_axes(plane);
  const int n = resolution;
  for (int i = 0; i < n; ++i) map.coords.push_back(extent_nm * (2 * i - (n - 1)) / (n - 1));
  map.cells.assign(std::size_t(n) * n, InteractionBreakdown{});
  map.masked.assign(std::size_t(n) * n, 0);
  const bool symmetric = base.offset_nm.squaredNorm() == 0;
  // With no offset the mirror cell is the same pair; evaluate half and copy.
  const int count = symmetric ? (n * n + 1) / 2 : n * n;
  parallel_for(count, threads, [&](int k) {
    const int ia = k / n, ib = k % n;
    DonorPairGeometry g = base;
    g.displacement_nm = Eigen::Vector3d::Zero();
    g.displacement_nm(map.axis_a) = map.coords[ia];
    g.displacement_nm(map.axis_b) = map.coords[ib];
    const int mirror = n * n - 1 - k;
    if ((g.displacement_nm + g.offset_nm).norm() < g.guard_nm) {
      map.masked[k] = 1;
      if (symmetric) map.masked[mirror] = 1;
      return;
    }
    InteractionOptions o = opt;
    if (symmetric) g.displacement_nm = canonical_displacement(g.displacement_nm);
    o.seed = derive_seed(opt.seed, std::uint64_t(k));
    map.cells[k] = total_interaction(g, ctx, o);
    if (symmetric) map.cells[mirror] = map.cells[k];
  });
  return map;
}

}  // namespace rydsi
