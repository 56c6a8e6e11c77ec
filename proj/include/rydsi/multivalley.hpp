#pragma once

// Six-valley donor wavefunctions built from one single-valley envelope solve.
// Valley order is (+x, -x, +y, -y, +z, -z). Each axis carries the envelope in
// a cyclic frame whose third coordinate is the valley axis, times the
// plane-wave pair of that axis; the lattice-periodic Bloch part is set to 1.

#include <array>
#include <complex>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydsi/envelope.hpp"
#include "rydsi/errors.hpp"
#include "rydsi/montecarlo.hpp"

namespace rydsi {

enum class ManifoldLabel { A1, E, T2, Pair };

inline std::string to_string(ManifoldLabel l) {
  switch (l) {
    case ManifoldLabel::A1: return "A1";
    case ManifoldLabel::E: return "E";
    case ManifoldLabel::T2: return "T2";
    case ManifoldLabel::Pair: return "pair";
  }
  return "?";
}

enum class BlochFactor { Absent, Cosine, Sine, Mixed };

struct ValleyManifold {
  ManifoldLabel label = ManifoldLabel::A1;
  std::array<double, 6> coefficients{};
  std::string name;  // e.g. "A1", "E1", "T2z", "z+"

  bool valid() const {
    double s = 0;
    for (double c : coefficients) s += c * c;
    return std::abs(s - 1.0) < 1e-12;
  }

  /// Weight of an axis, alpha_+^2 + alpha_-^2.
  double axis_weight(int axis) const {
    return coefficients[2 * axis] * coefficients[2 * axis] + coefficients[2 * axis + 1] * coefficients[2 * axis + 1];
  }

  BlochFactor bloch(int axis) const {
    const double p = coefficients[2 * axis], m = coefficients[2 * axis + 1];
    if (p == 0 && m == 0) return BlochFactor::Absent;
    if (p == m) return BlochFactor::Cosine;
    if (p == -m) return BlochFactor::Sine;
    return BlochFactor::Mixed;
  }

  static ValleyManifold a1() {
    const double c = 1.0 / std::sqrt(6.0);
    return {ManifoldLabel::A1, {c, c, c, c, c, c}, "A1"};
  }
  /// k = 0: (1,1,-1,-1,0,0)/2, k = 1: (1,1,1,1,-2,-2)/sqrt12.
  static ValleyManifold e(int k) {
    if (k == 0) return {ManifoldLabel::E, {0.5, 0.5, -0.5, -0.5, 0, 0}, "E1"};
    const double c = 1.0 / std::sqrt(12.0);
    return {ManifoldLabel::E, {c, c, c, c, -2 * c, -2 * c}, "E2"};
  }
  static ValleyManifold t2(int axis) {
    ValleyManifold m{ManifoldLabel::T2, {}, std::string("T2") + "xyz"[axis]};
    m.coefficients[2 * axis] = 1.0 / std::sqrt(2.0);
    m.coefficients[2 * axis + 1] = -1.0 / std::sqrt(2.0);
    return m;
  }
  /// Symmetric or antisymmetric pair of one axis; a basis for manifolds
  /// without valley-orbit splitting.
  static ValleyManifold pair(int axis, bool symmetric) {
    ValleyManifold m{ManifoldLabel::Pair, {}, std::string(1, "xyz"[axis]) + (symmetric ? "+" : "-")};
    m.coefficients[2 * axis] = 1.0 / std::sqrt(2.0);
    m.coefficients[2 * axis + 1] = (symmetric ? 1.0 : -1.0) / std::sqrt(2.0);
    return m;
  }
  static std::vector<ValleyManifold> members(ManifoldLabel l) {
    switch (l) {
      case ManifoldLabel::A1: return {a1()};
      case ManifoldLabel::E: return {e(0), e(1)};
      case ManifoldLabel::T2: return {t2(0), t2(1), t2(2)};
      case ManifoldLabel::Pair:
        return {pair(0, true), pair(0, false), pair(1, true), pair(1, false), pair(2, true), pair(2, false)};
    }
    return {};
  }
};

namespace detail {

/// Global point -> valley frame (u, v, w) with w along the valley axis.
inline Eigen::Vector3d to_valley_frame(int axis, const Eigen::Vector3d& r) {
  switch (axis) {
    case 0: return {r.y(), r.z(), r.x()};
    case 1: return {r.z(), r.x(), r.y()};
    default: return r;
  }
}

inline Eigen::Vector3d from_valley_frame(int axis, const Eigen::Vector3d& l) {
  switch (axis) {
    case 0: return {l.z(), l.x(), l.y()};
    case 1: return {l.y(), l.z(), l.x()};
    default: return l;
  }
}

}  // namespace detail

/// Proposal density for |F|^2 of one envelope in its valley frame: mesh
/// cells drawn by approximate mass, points uniform in volume inside a cell.
class EnvelopeSampler {
 public:
  explicit EnvelopeSampler(const EnvelopeState& s)
      : ne_(s.n_eta()),
        nt_(s.theta_elements()),
        r0_(s.scaling_radius),
        sg_(std::sqrt(s.anisotropy_ratio)),
        half_(!s.full_domain),
        he_(0.5 * M_PI / ne_),
        ht_(s.theta_max() / nt_) {
    mass_.assign(std::size_t(ne_) * nt_, 0.0);
    double peak = 0;
    for (int i = 0; i + 1 < ne_; ++i)
      for (int j = 0; j < nt_; ++j) {
        double y2 = 0;
        for (int a : {0, 1})
          for (int b : {0, 1}) y2 += 0.25 * s.surface(i + a, j + b) * s.surface(i + a, j + b);
        const double m = y2 * (radius(i + 1) - radius(i)) * (std::cos(j * ht_) - std::cos((j + 1) * ht_));
        mass_[cell(i, j)] = m;
        peak = std::max(peak, m);
      }
    if (!(peak > 0)) throw NotConverged("envelope surface is empty");
    // Floor keeps the proposal positive wherever the mesh has support.
    for (int i = 0; i + 1 < ne_; ++i)
      for (int j = 0; j < nt_; ++j) mass_[cell(i, j)] = std::max(mass_[cell(i, j)], 1e-9 * peak);
    cumulative_.resize(mass_.size());
    double acc = 0;
    for (std::size_t k = 0; k < mass_.size(); ++k) cumulative_[k] = (acc += mass_[k]);
    for (auto& m : mass_) m /= acc;
    for (auto& c : cumulative_) c /= acc;
  }

  /// Point in the valley frame, physical coordinates (a_B).
  template <class Rng>
  Eigen::Vector3d sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double pick = u(rng);
    std::size_t k = std::size_t(std::upper_bound(cumulative_.begin(), cumulative_.end(), pick) - cumulative_.begin());
    k = std::min(k, cumulative_.size() - 1);
    const int i = int(k / nt_), j = int(k % nt_);
    const double ra = radius(i), rb = radius(i + 1);
    const double r = std::cbrt(ra * ra * ra + u(rng) * (rb * rb * rb - ra * ra * ra));
    const double ca = std::cos(j * ht_), cb = std::cos((j + 1) * ht_);
    double c = ca - u(rng) * (ca - cb);
    const double phi = 2.0 * M_PI * u(rng);
    if (half_ && u(rng) < 0.5) c = -c;
    const double st = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {r * st * std::cos(phi), r * st * std::sin(phi), sg_ * r * c};
  }

  /// Density of `sample` at a valley-frame point.
  double density(const Eigen::Vector3d& p) const {
    const double zp = p.z() / sg_;
    const double r = std::sqrt(p.x() * p.x() + p.y() * p.y() + zp * zp);
    if (r == 0) return 0;
    double theta = std::acos(std::clamp(zp / r, -1.0, 1.0));
    if (half_ && theta > 0.5 * M_PI) theta = M_PI - theta;
    const int i = int(std::atan(r / r0_) / he_);
    if (i >= ne_ - 1) return 0;
    const int j = std::min(int(theta / ht_), nt_ - 1);
    const double ra = radius(i), rb = radius(i + 1);
    const double vol = 2.0 * M_PI / 3.0 * (rb * rb * rb - ra * ra * ra) *
                       (std::cos(j * ht_) - std::cos((j + 1) * ht_));
    return mass_[cell(i, j)] / (vol * (half_ ? 2.0 : 1.0) * sg_);
  }

 private:
  std::size_t cell(int i, int j) const { return std::size_t(i) * nt_ + j; }
  double radius(int i) const { return r0_ * std::tan(i * he_); }

  int ne_, nt_;
  double r0_, sg_;
  bool half_;
  double he_, ht_;
  std::vector<double> mass_, cumulative_;
};

/// Envelope plus valley combination, evaluable at 3D points (a_B). The
/// amplitude is scale * sum_axis F_axis * [(a+ + a-) cos(k0 q) + i (a+ - a-) sin(k0 q)]
/// with q the coordinate along the axis measured from the donor site.
struct MultivalleyWavefunction {
  std::shared_ptr<const EnvelopeState> envelope;
  ValleyManifold manifold;
  double valley_wavevector = 0;  // 1/a_B
  std::string species;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();  // donor site offset (a_B)
  double scale = 1.0;
  Estimate raw_norm;  // Monte Carlo norm before rescaling

  std::complex<double> operator()(const Eigen::Vector3d& point) const {
    const Eigen::Vector3d r = point - origin;
    std::complex<double> amp = 0;
    for (int axis = 0; axis < 3; ++axis) {
      const double p = manifold.coefficients[2 * axis], m = manifold.coefficients[2 * axis + 1];
      if (p == 0 && m == 0) continue;
      const Eigen::Vector3d l = detail::to_valley_frame(axis, r);
      const double f = evaluate_envelope(*envelope, l.x(), l.y(), l.z());
      const double q = valley_wavevector * r(axis);
      amp += f * std::complex<double>((p + m) * std::cos(q), (p - m) * std::sin(q));
    }
    return scale * amp;
  }

  double density(const Eigen::Vector3d& point) const { return std::norm((*this)(point)); }
};

inline std::complex<double> evaluate(const MultivalleyWavefunction& psi, const Eigen::Vector3d& point) {
  return psi(point);
}

/// Mixture proposal over the occupied axes, weighted by alpha^2.
class MultivalleySampler {
 public:
  explicit MultivalleySampler(const MultivalleyWavefunction& psi)
      : sampler_(std::make_shared<EnvelopeSampler>(*psi.envelope)), origin_(psi.origin) {
    for (int a = 0; a < 3; ++a) weight_[a] = psi.manifold.axis_weight(a);
  }

  template <class Rng>
  Eigen::Vector3d sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double pick = u(rng);
    int axis = 0;
    double acc = weight_[0];
    while (axis < 2 && pick >= acc) acc += weight_[++axis];
    return origin_ + detail::from_valley_frame(axis, sampler_->sample(rng));
  }

  double density(const Eigen::Vector3d& point) const {
    const Eigen::Vector3d r = point - origin_;
    double q = 0;
    for (int a = 0; a < 3; ++a)
      if (weight_[a] > 0) q += weight_[a] * sampler_->density(detail::to_valley_frame(a, r));
    return q;
  }

 private:
  std::shared_ptr<const EnvelopeSampler> sampler_;
  Eigen::Vector3d origin_;
  std::array<double, 3> weight_{};
};

/// Monte Carlo estimate of the integral of |psi|^2.
inline Estimate monte_carlo_norm(const MultivalleyWavefunction& psi, long samples, std::uint64_t seed) {
  const MultivalleySampler sampler(psi);
  std::mt19937_64 rng(seed);
  BatchAccumulator acc(samples);
  for (long i = 0; i < samples; ++i) {
    const Eigen::Vector3d r = sampler.sample(rng);
    const double q = sampler.density(r);
    acc.add(i, q > 0 ? psi.density(r) / q : 0.0);
  }
  return acc.result();
}

/// Attaches the valley combination and renormalizes by Monte Carlo.
inline MultivalleyWavefunction build_multivalley(std::shared_ptr<const EnvelopeState> envelope,
                                                 const ValleyManifold& manifold, const std::string& species,
                                                 double valley_wavevector, long samples = 1 << 18,
                                                 std::uint64_t seed = 1) {
  if (!envelope || envelope->surface.size() == 0) throw NotConverged("missing envelope");
  if (std::abs(envelope->norm_check - 1.0) > 1e-6) throw NotConverged("envelope is not normalized");
  if (!manifold.valid()) throw ConfigError("valley coefficients must have unit norm");
  MultivalleyWavefunction psi{std::move(envelope), manifold, valley_wavevector, species};
  psi.raw_norm = monte_carlo_norm(psi, samples, seed);
  if (!(psi.raw_norm.value > 0)) throw NotConverged("zero Monte Carlo norm");
  psi.scale = 1.0 / std::sqrt(psi.raw_norm.value);
  return psi;
}

// ---------------------------------------------------------------------------
// Dipole matrix elements. Cross-valley terms oscillate on the scale of the
// lattice and are dropped, so only same-valley envelope integrals enter.

struct EnvelopeMoments {
  double overlap = 0;
  Eigen::Vector3d dipole = Eigen::Vector3d::Zero();  // valley frame, a_B
};

namespace detail {

inline double azimuth(int m, bool sine, double phi) {
  if (m == 0) return 1.0 / std::sqrt(2.0 * M_PI);
  return (sine ? std::sin(m * phi) : std::cos(m * phi)) / std::sqrt(M_PI);
}

inline Eigen::MatrixXd full_surface(const EnvelopeState& s) { return s.full_domain ? s.surface : mirror_surface(s); }

}  // namespace detail

/// <F_a| 1 |F_b> and <F_a| r |F_b> in the valley frame, by 2x2 Gauss
/// quadrature on the (eta, theta) mesh. Both states must share the mesh.
inline EnvelopeMoments envelope_moments(const EnvelopeState& a, const EnvelopeState& b) {
  if (a.surface.rows() != b.surface.rows() || a.scaling_radius != b.scaling_radius ||
      a.anisotropy_ratio != b.anisotropy_ratio || a.n_eta() != b.n_eta())
    throw ConfigError("dipole integrals need states on the same mesh");
  const Eigen::MatrixXd ya = detail::full_surface(a), yb = detail::full_surface(b);
  if (ya.cols() != yb.cols()) throw ConfigError("dipole integrals need states on the same mesh");
  // Azimuthal factors.
  constexpr int kPhi = 64;
  double a1 = 0, ac = 0, as = 0;
  for (int k = 0; k < kPhi; ++k) {
    const double phi = 2.0 * M_PI * k / kPhi, w = 2.0 * M_PI / kPhi;
    const double f = detail::azimuth(a.labels.m, a.labels.sine, phi) * detail::azimuth(b.labels.m, b.labels.sine, phi);
    a1 += w * f;
    ac += w * f * std::cos(phi);
    as += w * f * std::sin(phi);
  }
  const int ne = int(ya.rows()) - 1, nt = int(ya.cols()) - 1;
  const double he = 0.5 * M_PI / ne, ht = M_PI / nt, r0 = a.scaling_radius;
  const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  double i_ov = 0, i_perp = 0, i_par = 0;
  for (int i = 0; i + 1 < ne; ++i)
    for (int j = 0; j < nt; ++j)
      for (double s : g)
        for (double t : g) {
          auto interp = [&](const Eigen::MatrixXd& y) {
            return (1 - s) * (1 - t) * y(i, j) + s * (1 - t) * y(i + 1, j) + (1 - s) * t * y(i, j + 1) +
                   s * t * y(i + 1, j + 1);
          };
          const double eta = (i + s) * he, theta = (j + t) * ht;
          const double c = std::cos(eta);
          const double r = r0 * std::tan(eta);
          const double jac = r0 / (c * c) * 0.25 * he * ht;
          const double yy = interp(ya) * interp(yb) * jac;
          const double st = std::sin(theta), ct = std::cos(theta);
          i_ov += yy * st;
          i_perp += yy * r * st * st;
          i_par += yy * r * st * ct;
        }
  const double sg = std::sqrt(a.anisotropy_ratio);
  EnvelopeMoments out;
  out.overlap = sg * i_ov * a1;
  out.dipole = Eigen::Vector3d(sg * i_perp * ac, sg * i_perp * as, sg * sg * i_par * a1);
  return out;
}

/// Valley-diagonal dipole between two multivalley states, global frame.
inline Eigen::Vector3d multivalley_dipole(const EnvelopeState& fa, const ValleyManifold& ma, const EnvelopeState& fb,
                                          const ValleyManifold& mb) {
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
  std::optional<Eigen::Vector3d> local;
  for (int axis = 0; axis < 3; ++axis) {
    const double w = ma.coefficients[2 * axis] * mb.coefficients[2 * axis] +
                     ma.coefficients[2 * axis + 1] * mb.coefficients[2 * axis + 1];
    if (w == 0) continue;
    if (!local) local = envelope_moments(fa, fb).dipole;
    d += w * detail::from_valley_frame(axis, *local);
  }
  return d;
}

}  // namespace rydsi
