#pragma once

// Single-valley effective-mass envelope solver. The anisotropic kinetic
// term is made isotropic by z' = z / sqrt(gamma); in polar coordinates
// (r', theta, phi) the envelope is F = Phi_m(phi) Y(r', theta) / r' and the
// radius is compressed as r' = r0 tan(eta). Y(eta, theta) is discretized
// with bilinear elements on a uniform mesh and the lowest states come from a
// shift-invert Lanczos solve.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rydsi/eigensolver.hpp"
#include "rydsi/errors.hpp"

namespace rydsi {

/// Reflection symmetry z' -> -z'. `None` solves on the full theta range.
enum class Parity { Even, Odd, None };

inline std::string to_string(Parity p) {
  switch (p) {
    case Parity::Even: return "even";
    case Parity::Odd: return "odd";
    case Parity::None: return "none";
  }
  return "?";
}

struct CentralCell {
  double depth = 0;   // E_H, potential is -depth inside the radius
  double radius = 0;  // a_B
};

struct FieldTerm {
  double strength = 0;      // E_H / (e a_B), along the valley axis
  double onset_radius = 0;  // a_B; field acts for r >= onset
};

struct SolverConfig {
  double anisotropy_ratio = 1.0;
  int magnetic_quantum_number = 0;
  double scaling_radius = 2.0;
  int n_eta = 128;
  int n_theta = 96;  // elements on [0, pi/2]; the full range uses twice as many
  double core_charge = 1.0;
  std::optional<CentralCell> central_cell;
  std::optional<FieldTerm> field;
  int eigenpair_count = 4;
  Parity parity = Parity::Even;

  bool full_domain() const { return parity == Parity::None; }
  int theta_elements() const { return full_domain() ? 2 * n_theta : n_theta; }

  void validate() const {
    if (!(anisotropy_ratio > 0 && anisotropy_ratio <= 1.0)) throw ConfigError("anisotropy ratio must lie in (0, 1]");
    if (n_eta < 32 || n_theta < 32) throw ConfigError("mesh must be at least 32 x 32");
    if (!(scaling_radius > 0)) throw ConfigError("scaling radius must be positive");
    if (magnetic_quantum_number < 0) throw ConfigError("use m >= 0; cos/sin azimuthal forms cover -m");
    if (eigenpair_count < 1) throw ConfigError("eigenpair count must be positive");
    if (field && field->strength != 0 && !full_domain())
      throw ConfigError("a field along the valley axis breaks parity; use Parity::None");
    if (central_cell && (central_cell->radius < 0 || !std::isfinite(central_cell->depth)))
      throw ConfigError("invalid central cell");
  }
};

struct StateLabels {
  int m = 0;
  int radial_nodes = 0;
  int angular_nodes = 0;  // counted on the full theta range
  Parity parity = Parity::Even;
  bool sine = false;  // m > 0: sin(m phi) instead of cos(m phi)
};

/// One eigenpair. `surface` holds Y on all mesh nodes (row = eta index,
/// column = theta index) normalized so that the 3D envelope has unit norm.
struct EnvelopeState {
  double energy = 0;
  Eigen::MatrixXd surface;
  StateLabels labels;
  double norm_check = 0;
  double anisotropy_ratio = 1.0;
  double scaling_radius = 1.0;
  bool full_domain = false;

  int n_eta() const { return int(surface.rows()) - 1; }
  int theta_elements() const { return int(surface.cols()) - 1; }
  double theta_max() const { return full_domain ? M_PI : 0.5 * M_PI; }
};

namespace detail {

struct Mesh {
  int ne = 0, nt = 0;  // elements
  double he = 0, ht = 0;
  double theta_max = 0;

  Mesh(int n_eta, int n_theta, double tmax)
      : ne(n_eta), nt(n_theta), he(0.5 * M_PI / n_eta), ht(tmax / n_theta), theta_max(tmax) {}
  int nodes() const { return (ne + 1) * (nt + 1); }
  int node(int i, int j) const { return i * (nt + 1) + j; }
};

/// Matrices assembled on every mesh node; Dirichlet rows are dropped later.
struct Operators {
  SparseMatrix kinetic_coulomb;  // kinetic + Coulomb + central cell
  SparseMatrix mass;
  SparseMatrix field;  // coefficient of the field strength
};

inline constexpr std::array<double, 3> kGaussX{0.1127016653792583, 0.5, 0.8872983346207417};
inline constexpr std::array<double, 3> kGaussW{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

inline Operators assemble(const SolverConfig& c, const Mesh& mesh) {
  const double g = c.anisotropy_ratio, r0 = c.scaling_radius, z = c.core_charge;
  const double m2 = double(c.magnetic_quantum_number) * c.magnetic_quantum_number;
  const double rc = c.central_cell ? c.central_cell->radius : 0.0;
  const double depth = c.central_cell ? c.central_cell->depth : 0.0;
  const double rm = c.field ? c.field->onset_radius : 0.0;
  std::vector<Eigen::Triplet<double>> tk, tm, tf;
  tk.reserve(16 * mesh.ne * mesh.nt);
  tm.reserve(16 * mesh.ne * mesh.nt);
  tf.reserve(16 * mesh.ne * mesh.nt);

  for (int ie = 0; ie < mesh.ne; ++ie) {
    for (int it = 0; it < mesh.nt; ++it) {
      const double e0 = ie * mesh.he, t0 = it * mesh.ht;
      // Elements cut by the central-cell sphere get a finer rule.
      bool straddles = false;
      if (depth != 0.0) {
        double rmin = 1e300, rmax = 0;
        for (int a = 0; a <= 1; ++a)
          for (int b = 0; b <= 1; ++b) {
            const double ct = std::cos(t0 + b * mesh.ht);
            const double rr = r0 * std::tan(std::min(e0 + a * mesh.he, 0.5 * M_PI - 1e-12)) *
                              std::sqrt(1.0 - (1.0 - g) * ct * ct);
            rmin = std::min(rmin, rr);
            rmax = std::max(rmax, rr);
          }
        straddles = rmin < rc * 1.05 && rmax > rc * 0.95;
      }
      const int sub = straddles ? 8 : 1;
      double ke[4][4] = {}, me[4][4] = {}, fe[4][4] = {};
      for (int sa = 0; sa < sub; ++sa)
        for (int sb = 0; sb < sub; ++sb)
          for (int qa = 0; qa < 3; ++qa)
            for (int qb = 0; qb < 3; ++qb) {
              const double xi = (sa + kGaussX[qa]) / sub, zt = (sb + kGaussX[qb]) / sub;
              const double w = kGaussW[qa] * kGaussW[qb] / (sub * sub) * mesh.he * mesh.ht;
              const double eta = e0 + xi * mesh.he, th = t0 + zt * mesh.ht;
              const double se = std::sin(eta), ce = std::cos(eta), st = std::sin(th), ct = std::cos(th);
              const double s = std::sqrt(1.0 - (1.0 - g) * ct * ct);
              const double rp = r0 * se / ce;
              const double jac = st * r0 / (ce * ce);  // sin(theta) dr'/deta
              double pot = -z * st / (se * ce * s);
              if (depth != 0.0 && rp * s < rc) pot -= depth * jac;
              const double fld = (rp * s >= rm) ? std::sqrt(g) * rp * ct * jac : 0.0;
              const double kin_e = 0.5 * ce * ce / r0 * st;
              const double kin_t = 0.5 * st / (r0 * se * se);
              const double cent = m2 > 0 ? kin_t * m2 / (st * st) : 0.0;
              // Bilinear shape functions on the unit square.
              const double n[4] = {(1 - xi) * (1 - zt), xi * (1 - zt), (1 - xi) * zt, xi * zt};
              const double dn_e[4] = {-(1 - zt) / mesh.he, (1 - zt) / mesh.he, -zt / mesh.he, zt / mesh.he};
              const double dn_t[4] = {-(1 - xi) / mesh.ht, -xi / mesh.ht, (1 - xi) / mesh.ht, xi / mesh.ht};
              for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                  ke[a][b] += w * (kin_e * dn_e[a] * dn_e[b] + kin_t * dn_t[a] * dn_t[b] +
                                   (cent + pot) * n[a] * n[b]);
                  me[a][b] += w * jac * n[a] * n[b];
                  fe[a][b] += w * fld * n[a] * n[b];
                }
            }
      const int nodes[4] = {mesh.node(ie, it), mesh.node(ie + 1, it), mesh.node(ie, it + 1),
                            mesh.node(ie + 1, it + 1)};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          tk.emplace_back(nodes[a], nodes[b], ke[a][b]);
          tm.emplace_back(nodes[a], nodes[b], me[a][b]);
          if (fe[a][b] != 0.0) tf.emplace_back(nodes[a], nodes[b], fe[a][b]);
        }
    }
  }
  Operators op;
  const int n = mesh.nodes();
  op.kinetic_coulomb.resize(n, n);
  op.mass.resize(n, n);
  op.field.resize(n, n);
  op.kinetic_coulomb.setFromTriplets(tk.begin(), tk.end());
  op.mass.setFromTriplets(tm.begin(), tm.end());
  op.field.setFromTriplets(tf.begin(), tf.end());
  return op;
}

/// Free degrees of freedom for a sector: node -> dof index or -1.
inline std::vector<int> dof_map(const Mesh& mesh, int m, Parity parity) {
  std::vector<int> map(mesh.nodes(), -1);
  int k = 0;
  for (int i = 0; i <= mesh.ne; ++i)
    for (int j = 0; j <= mesh.nt; ++j) {
      bool fixed = i == 0 || i == mesh.ne;
      if (m != 0 && j == 0) fixed = true;
      if (parity == Parity::Odd && j == mesh.nt) fixed = true;
      if (parity == Parity::None && m != 0 && j == mesh.nt) fixed = true;
      if (!fixed) map[mesh.node(i, j)] = k++;
    }
  return map;
}

inline SparseMatrix restrict(const SparseMatrix& a, const std::vector<int>& rows, const std::vector<int>& cols) {
  const int nr = *std::max_element(rows.begin(), rows.end()) + 1;
  const int nc = *std::max_element(cols.begin(), cols.end()) + 1;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      const int r = rows[it.row()], c = cols[it.col()];
      if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
    }
  SparseMatrix out(nr, nc);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline Eigen::MatrixXd to_surface(const Eigen::VectorXd& y, const Mesh& mesh, const std::vector<int>& map) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(mesh.ne + 1, mesh.nt + 1);
  for (int i = 0; i <= mesh.ne; ++i)
    for (int j = 0; j <= mesh.nt; ++j) {
      const int d = map[mesh.node(i, j)];
      if (d >= 0) s(i, j) = y(d);
    }
  return s;
}

inline Eigen::VectorXd from_surface(const Eigen::MatrixXd& s, const Mesh& mesh, const std::vector<int>& map) {
  const int n = *std::max_element(map.begin(), map.end()) + 1;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (int i = 0; i <= mesh.ne; ++i)
    for (int j = 0; j <= mesh.nt; ++j) {
      const int d = map[mesh.node(i, j)];
      if (d >= 0) y(d) = s(i, j);
    }
  return y;
}

inline int sign_changes(const std::vector<double>& v) {
  double peak = 0;
  for (double x : v) peak = std::max(peak, std::abs(x));
  int count = 0, last = 0;
  for (double x : v) {
    if (std::abs(x) < 1e-3 * peak) continue;
    const int s = x > 0 ? 1 : -1;
    if (last != 0 && s != last) ++count;
    last = s;
  }
  return count;
}

inline StateLabels count_nodes(const Eigen::MatrixXd& s, int m, Parity parity) {
  Eigen::Index bi = 0, bj = 0;
  s.cwiseAbs().maxCoeff(&bi, &bj);
  std::vector<double> radial(s.rows()), angular(s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) radial[i] = s(i, bj);
  for (Eigen::Index j = 0; j < s.cols(); ++j) angular[j] = s(bi, j);
  StateLabels l;
  l.m = m;
  l.parity = parity;
  l.radial_nodes = sign_changes(radial);
  const int half = sign_changes(angular);
  l.angular_nodes = parity == Parity::None ? half : 2 * half + (parity == Parity::Odd ? 1 : 0);
  return l;
}

/// Shift guaranteed below the spectrum without a field; verified by the
/// LDLT inertia and pushed further down if needed.
inline double lower_shift(const SolverConfig& c) {
  const double depth = c.central_cell ? std::max(0.0, c.central_cell->depth) : 0.0;
  return -(c.core_charge * c.core_charge / (2.0 * c.anisotropy_ratio) + depth) - 0.5;
}

inline bool positive_definite(const SparseMatrix& a) {
  Eigen::SimplicialLDLT<SparseMatrix> f(a);
  return f.info() == Eigen::Success && f.vectorD().minCoeff() > 0;
}

}  // namespace detail

/// Matrices of one sector with Dirichlet nodes removed.
struct SectorSystem {
  detail::Mesh mesh{32, 32, M_PI / 2};
  std::vector<int> map;
  SparseMatrix k, m, field;
};

inline SectorSystem build_sector(const SolverConfig& c) {
  c.validate();
  const double tmax = c.full_domain() ? M_PI : 0.5 * M_PI;
  SectorSystem s{detail::Mesh(c.n_eta, c.theta_elements(), tmax), {}, {}, {}, {}};
  const auto op = detail::assemble(c, s.mesh);
  s.map = detail::dof_map(s.mesh, c.magnetic_quantum_number, c.parity);
  s.k = detail::restrict(op.kinetic_coulomb, s.map, s.map);
  s.m = detail::restrict(op.mass, s.map, s.map);
  s.field = detail::restrict(op.field, s.map, s.map);
  if (c.field) s.k += c.field->strength * s.field;
  return s;
}

inline EnvelopeState make_state(const SolverConfig& c, const SectorSystem& sys, const Eigen::VectorXd& y,
                                double energy) {
  EnvelopeState st;
  st.energy = energy;
  st.anisotropy_ratio = c.anisotropy_ratio;
  st.scaling_radius = c.scaling_radius;
  st.full_domain = c.full_domain();
  // y^T M y = int Y^2 sin(theta) dr' dtheta over the solved range.
  const double ymy = y.dot(sys.m * y);
  const double full = c.full_domain() ? ymy : 2.0 * ymy;
  const double scale = 1.0 / std::sqrt(std::sqrt(c.anisotropy_ratio) * full);
  st.surface = detail::to_surface(y * scale, sys.mesh, sys.map);
  st.norm_check = std::sqrt(c.anisotropy_ratio) * full * scale * scale;
  st.labels = detail::count_nodes(st.surface, c.magnetic_quantum_number, c.parity);
  // Deterministic sign: largest component positive.
  Eigen::Index bi, bj;
  st.surface.cwiseAbs().maxCoeff(&bi, &bj);
  if (st.surface(bi, bj) < 0) st.surface = -st.surface;
  return st;
}

/// Lowest `eigenpair_count` states of the sector, ascending; near-ties
/// ordered by node count then parity.
inline std::vector<EnvelopeState> assemble_and_solve(const SolverConfig& c) {
  const SectorSystem sys = build_sector(c);
  if (c.field && c.field->strength != 0)
    throw ConfigError("use stark_energy_direct for solves with a field");
  double sigma = detail::lower_shift(c);
  for (int tries = 0; !detail::positive_definite(SparseMatrix(sys.k - sigma * sys.m)); ++tries) {
    if (tries > 8) throw EigensolverFailure("could not find a shift below the spectrum");
    sigma = 2.0 * sigma - 1.0;
  }
  const int count = std::min<int>(c.eigenpair_count, int(sys.k.rows()));
  // Rough ground state estimates walk the shift up to just below the ground
  // state, which spreads out the clustered upper part of the spectrum.
  LanczosOptions rough;
  rough.max_steps = 300;
  rough.tol = 1e-5;
  for (int round = 0; round < 3; ++round) {
    const double e0 = shift_invert_lanczos(sys.k, sys.m, sigma, 1, rough).values(0);
    const double closer = e0 - 0.1 * std::abs(e0) - 1e-3;
    if (!(closer > sigma) || !detail::positive_definite(SparseMatrix(sys.k - closer * sys.m))) break;
    const bool done = closer - sigma < 0.2 * std::abs(e0);
    sigma = closer;
    if (done) break;
  }
  LanczosOptions lo;
  lo.max_steps = std::max(600, 12 * count);
  lo.tol = 1e-9;
  EigenPairs ep = shift_invert_lanczos(sys.k, sys.m, sigma, count, lo);
  std::vector<EnvelopeState> out;
  for (int i = 0; i < count; ++i) out.push_back(make_state(c, sys, ep.vectors.col(i), ep.values(i)));
  std::stable_sort(out.begin(), out.end(), [](const EnvelopeState& a, const EnvelopeState& b) {
    const double tie = 1e-9 * std::max(1.0, std::abs(a.energy));
    if (std::abs(a.energy - b.energy) > tie) return a.energy < b.energy;
    const int na = a.labels.radial_nodes + a.labels.angular_nodes;
    const int nb = b.labels.radial_nodes + b.labels.angular_nodes;
    if (na != nb) return na < nb;
    return int(a.labels.parity) < int(b.labels.parity);
  });
  return out;
}

/// Raises MeshTooCoarse if the lowest energy moves by more than 0.5% when
/// both mesh dimensions are refined by 1.5x.
inline void check_mesh(const SolverConfig& c) {
  SolverConfig one = c;
  one.eigenpair_count = 1;
  SolverConfig fine = one;
  fine.n_eta = c.n_eta * 3 / 2;
  fine.n_theta = c.n_theta * 3 / 2;
  const double e0 = assemble_and_solve(one).front().energy;
  const double e1 = assemble_and_solve(fine).front().energy;
  if (std::abs(e1 - e0) > 0.005 * std::abs(e1))
    throw MeshTooCoarse("ground energy moved from " + std::to_string(e0) + " to " + std::to_string(e1));
}

/// Envelope amplitude at a point given in the valley frame (valley axis
/// along z), in effective Bohr radii. m > 0 states use the cos(m phi) form
/// unless `sine` or the state's own sine label is set.
inline double evaluate_envelope(const EnvelopeState& s, double x, double y, double z, bool sine = false) {
  const double g = s.anisotropy_ratio;
  const double zp = z / std::sqrt(g);
  const double rho2 = x * x + y * y;
  double rp = std::sqrt(rho2 + zp * zp);
  const int m = s.labels.m;
  const double eta = std::atan(rp / s.scaling_radius);
  double theta = rp > 0 ? std::acos(std::clamp(zp / rp, -1.0, 1.0)) : 0.0;
  double sign = 1.0;
  if (!s.full_domain && theta > 0.5 * M_PI) {
    theta = M_PI - theta;
    if (s.labels.parity == Parity::Odd) sign = -1.0;
  }
  const int ne = s.n_eta(), nt = s.theta_elements();
  const double fe = eta / (0.5 * M_PI / ne), ft = theta / (s.theta_max() / nt);
  const int i = std::clamp(int(fe), 0, ne - 1), j = std::clamp(int(ft), 0, nt - 1);
  const double a = fe - i, b = ft - j;
  const double yv = (1 - a) * (1 - b) * s.surface(i, j) + a * (1 - b) * s.surface(i + 1, j) +
                    (1 - a) * b * s.surface(i, j + 1) + a * b * s.surface(i + 1, j + 1);
  if (rp < 1e-12) {
    // Y ~ c r' near the origin; use the slope of the first element.
    rp = 1e-12;
  }
  double ang;
  if (m == 0) {
    ang = 1.0 / std::sqrt(2.0 * M_PI);
  } else {
    const double phi = std::atan2(y, x);
    ang = (sine || s.labels.sine ? std::sin(m * phi) : std::cos(m * phi)) / std::sqrt(M_PI);
  }
  return sign * ang * yv / rp;
}

/// Depth of the central-cell well that puts the selected state of the
/// sector at `target` (E_H), by bisection. Deeper targets need deeper wells.
inline double calibrate_central_cell(double target, double radius, SolverConfig c, int state_index = 0,
                                     double rel_tol = 1e-5) {
  c.eigenpair_count = state_index + 1;
  auto energy = [&](double depth) {
    c.central_cell = CentralCell{depth, radius};
    return assemble_and_solve(c)[state_index].energy;
  };
  const double e0 = energy(0.0);
  const double tol = rel_tol * std::abs(target);
  if (std::abs(e0 - target) <= tol) return 0.0;
  if (target > e0) throw BracketFailure("target lies above the uncorrected energy");
  double lo = 0.0, hi = 1.0, elo = e0, ehi = energy(hi);
  for (int k = 0; ehi > target; ++k) {
    if (ehi > elo + 1e-12) throw BracketFailure("energy not monotone in the well depth");
    if (k > 60) throw BracketFailure("no sign change found while expanding the depth bracket");
    lo = hi;
    elo = ehi;
    hi *= 2.0;
    ehi = energy(hi);
  }
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double em = energy(mid);
    if (std::abs(em - target) <= tol) return mid;
    if (em > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14 * hi) return mid;
  }
  throw BracketFailure("bisection did not converge");
}

namespace detail {

/// Extends a half-range surface to the full theta range.
inline Eigen::MatrixXd mirror_surface(const EnvelopeState& s) {
  const int nt = s.theta_elements();
  Eigen::MatrixXd out(s.surface.rows(), 2 * nt + 1);
  const double sign = s.labels.parity == Parity::Odd ? -1.0 : 1.0;
  for (Eigen::Index i = 0; i < s.surface.rows(); ++i)
    for (int j = 0; j <= 2 * nt; ++j) out(i, j) = j <= nt ? s.surface(i, j) : sign * s.surface(i, 2 * nt - j);
  return out;
}

}  // namespace detail

struct StarkTrackResult {
  double energy = 0;
  double overlap = 1;
  EnvelopeState state;
};

/// Energy of a state with a field along the valley axis. The state is
/// followed from zero field over `ramp_steps` equal increments, each time
/// taking the eigenvector nearest the previous energy with the largest
/// overlap. Raises StateCrossing when the best overlap drops below 0.5.
/// `config.parity` names the zero-field sector the state starts in; the
/// ramp itself always runs on the full theta range.
inline StarkTrackResult stark_track(const SolverConfig& config, int state_index, int ramp_steps = 8) {
  if (!config.field) throw ConfigError("stark_energy_direct needs a field");
  SolverConfig zero = config;
  zero.field.reset();
  if (zero.parity == Parity::None) zero.parity = Parity::Even;
  // The starting state comes from whichever parity sector holds it.
  zero.eigenpair_count = state_index + 1;
  const auto states = assemble_and_solve(zero);
  const EnvelopeState& s0 = states[state_index];
  StarkTrackResult result{s0.energy, 1.0, s0};
  if (config.field->strength == 0.0) return result;

  SolverConfig full = config;
  full.parity = Parity::None;
  full.field = FieldTerm{0.0, config.field->onset_radius};
  SectorSystem sys = build_sector(full);
  const SparseMatrix k0 = sys.k;
  Eigen::VectorXd prev = detail::from_surface(detail::mirror_surface(s0), sys.mesh, sys.map);
  prev /= std::sqrt(prev.dot(sys.m * prev));
  double e_prev = s0.energy;
  for (int step = 1; step <= ramp_steps; ++step) {
    const double f = config.field->strength * step / ramp_steps;
    const SparseMatrix k = k0 + f * sys.field;
    const double sigma = e_prev - 1e-3 * std::max(1e-3, std::abs(e_prev));
    LanczosOptions lo;
    lo.max_steps = 400;
    lo.tol = 1e-9;
    const EigenPairs ep = shift_invert_lanczos(k, sys.m, sigma, 6, lo, &prev);
    const Eigen::VectorXd mprev = sys.m * prev;
    int best = 0;
    double ov = 0;
    for (int i = 0; i < ep.values.size(); ++i) {
      const double o = std::abs(ep.vectors.col(i).dot(mprev));
      if (o > ov) {
        ov = o;
        best = i;
      }
    }
    if (ov < 0.5) throw StateCrossing("overlap " + std::to_string(ov) + " at field " + std::to_string(f));
    Eigen::VectorXd y = ep.vectors.col(best);
    if (y.dot(mprev) < 0) y = -y;
    prev = y;
    e_prev = ep.values(best);
    result.overlap = std::min(result.overlap, ov);
  }
  full.field = config.field;
  result.energy = e_prev;
  result.state = make_state(full, sys, prev, e_prev);
  result.state.labels.parity = Parity::None;
  return result;
}

inline double stark_energy_direct(const SolverConfig& config, int state_index, int ramp_steps = 8) {
  return stark_track(config, state_index, ramp_steps).energy;
}

/// Second-order field shift of a zero-field state, from the exact discrete
/// response in the opposite-parity sector: dE = -F^2 b^T (K - E0 M)^-1 b.
inline double stark_second_order(const SolverConfig& config, int state_index, double field) {
  SolverConfig c = config;
  c.field.reset();
  if (c.parity == Parity::None) throw ConfigError("second-order shift needs a parity sector");
  c.eigenpair_count = state_index + 1;
  const auto states = assemble_and_solve(c);
  const EnvelopeState& s0 = states[state_index];
  SolverConfig o = c;
  o.parity = c.parity == Parity::Even ? Parity::Odd : Parity::Even;
  const detail::Mesh mesh(c.n_eta, c.n_theta, 0.5 * M_PI);
  const auto op = detail::assemble(o, mesh);
  const auto map_s = detail::dof_map(mesh, c.magnetic_quantum_number, c.parity);
  const auto map_o = detail::dof_map(mesh, c.magnetic_quantum_number, o.parity);
  const SparseMatrix k = detail::restrict(op.kinetic_coulomb, map_o, map_o);
  const SparseMatrix m = detail::restrict(op.mass, map_o, map_o);
  const SparseMatrix p = detail::restrict(op.field, map_o, map_s);
  const SparseMatrix ms = detail::restrict(op.mass, map_s, map_s);
  Eigen::VectorXd y0 = detail::from_surface(s0.surface, mesh, map_s);
  y0 /= std::sqrt(y0.dot(ms * y0));
  const Eigen::VectorXd b = p * y0;
  Eigen::SimplicialLDLT<SparseMatrix> solver(SparseMatrix(k - s0.energy * m));
  if (solver.info() != Eigen::Success) throw EigensolverFailure("response factorization failed");
  const Eigen::VectorXd x = solver.solve(b);
  return -field * field * b.dot(x);
}

}  // namespace rydsi
