#pragma once

// Two three-level donors {|0>,|1>,|r>} under a piecewise-constant drive with
// spontaneous emission and dephasing, integrated as a full master equation.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rydsi/errors.hpp"
#include "rydsi/units.hpp"

namespace rydsi {

using cplx = std::complex<double>;
using Matrix3c = Eigen::Matrix<cplx, 3, 3>;
using Matrix9c = Eigen::Matrix<cplx, 9, 9>;
using Vector9c = Eigen::Matrix<cplx, 9, 1>;

/// Single-donor level index.
enum Level : int { kZero = 0, kOne = 1, kRydberg = 2 };

/// Product-basis index of |a>|b>.
constexpr int pair_index(int a, int b) { return 3 * a + b; }

inline Matrix9c kron3(const Matrix3c& a, const Matrix3c& b) {
  Matrix9c out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
  return out;
}

inline Matrix3c ket_bra(int i, int j) {
  Matrix3c m = Matrix3c::Zero();
  m(i, j) = 1.0;
  return m;
}

struct DensityTolerances {
  double hermiticity = 1e-10;
  double trace = 1e-9;
  double positivity = 1e-9;
};

class DensityMatrix {
 public:
  DensityMatrix() : m_(Matrix9c::Zero()) { m_(0, 0) = 1.0; }
  explicit DensityMatrix(const Matrix9c& m) : m_(m) {}

  static DensityMatrix pure(const Vector9c& psi) {
    return DensityMatrix(psi * psi.adjoint() / psi.squaredNorm());
  }
  static DensityMatrix maximally_mixed() {
    return DensityMatrix(Matrix9c::Identity() / 9.0);
  }

  const Matrix9c& matrix() const { return m_; }
  Matrix9c& matrix() { return m_; }
  cplx operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }
  double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix9c> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  double purity() const { return (m_ * m_).trace().real(); }
  double population(int index) const { return m_(index, index).real(); }

  bool valid(const DensityTolerances& tol = {}) const {
    return hermiticity_error() < tol.hermiticity && std::abs(trace() - 1.0) < tol.trace &&
           min_eigenvalue() > -tol.positivity;
  }

 private:
  Matrix9c m_;
};

struct DriveParameters {
  cplx rabi_1 = 0.0;
  cplx rabi_2 = 0.0;
  double detuning = 0.0;
  double interaction = 0.0;
};

inline Matrix9c build_hamiltonian(const DriveParameters& p) {
  const Matrix3c id = Matrix3c::Identity();
  auto single = [&](cplx rabi) -> Matrix3c {
    return 0.5 * rabi * ket_bra(kOne, kRydberg) + 0.5 * std::conj(rabi) * ket_bra(kRydberg, kOne) -
           p.detuning * ket_bra(kRydberg, kRydberg);
  };
  Matrix9c h = kron3(single(p.rabi_1), id) + kron3(id, single(p.rabi_2));
  h(pair_index(kRydberg, kRydberg), pair_index(kRydberg, kRydberg)) += p.interaction;
  return h;
}

struct JumpOperatorSet {
  std::vector<Matrix9c> operators;

  /// Dephasing of |1>-|r> and spontaneous emission |r> -> |1> on each donor.
  static JumpOperatorSet standard(const DecoherenceRates& rates) {
    const Matrix3c id = Matrix3c::Identity();
    const Matrix3c dephase = ket_bra(kRydberg, kRydberg) - ket_bra(kOne, kOne);
    const Matrix3c decay = ket_bra(kOne, kRydberg);
    const double de = std::sqrt(rates.gamma_de), se = std::sqrt(rates.gamma_se);
    return {{de * kron3(dephase, id), de * kron3(id, dephase), se * kron3(decay, id),
             se * kron3(id, decay)}};
  }
};

/// Right-hand side d(rho)/dt for a fixed generator. Operators are stored as
/// nonzero lists; the two-donor operators here have at most a few dozen.
class LindbladGenerator {
 public:
  LindbladGenerator(const Matrix9c& h, const JumpOperatorSet& jumps) {
    Matrix9c loss = Matrix9c::Zero();
    for (const auto& l : jumps.operators) loss += l.adjoint() * l;
    const Matrix9c heff = h - cplx(0, 0.5) * loss;
    heff_ = nonzeros(heff);
    for (const auto& l : jumps.operators) jumps_.push_back(nonzeros(l));
    scale_ = heff.cwiseAbs().rowwise().sum().maxCoeff();
    for (const auto& l : jumps.operators) scale_ += l.squaredNorm();
  }

  void apply(const Matrix9c& rho, Matrix9c& out) const {
    Matrix9c a = Matrix9c::Zero();
    for (const auto& e : heff_) a.row(e.i) += e.v * rho.row(e.k);
    out.noalias() = cplx(0, -1) * (a - a.adjoint());  // rho Heff^dag = (Heff rho)^dag
    for (const auto& l : jumps_)
      for (const auto& p : l)
        for (const auto& q : l) out(p.i, q.i) += p.v * rho(p.k, q.k) * std::conj(q.v);
  }

  double scale() const { return scale_; }

 private:
  struct Entry {
    int i, k;
    cplx v;
  };
  static std::vector<Entry> nonzeros(const Matrix9c& m) {
    std::vector<Entry> out;
    for (int i = 0; i < 9; ++i)
      for (int k = 0; k < 9; ++k)
        if (m(i, k) != cplx(0, 0)) out.push_back({i, k, m(i, k)});
    return out;
  }

  std::vector<Entry> heff_;
  std::vector<std::vector<Entry>> jumps_;
  double scale_ = 0;
};

/// Adaptive Dormand-Prince 5(4) integrator for the master equation.
class LindbladIntegrator {
 public:
  LindbladIntegrator(const LindbladGenerator& gen, double tol) : gen_(gen), tol_(tol) {
    if (!(tol > 0)) throw IntegrationFailure("tolerance must be positive");
  }

  /// Advances rho in place by `duration`.
  void advance(Matrix9c& rho, double duration) {
    if (duration < 0) throw IntegrationFailure("negative duration");
    if (duration == 0) return;
    if (step_ <= 0) step_ = std::min(duration, 0.05 / std::max(gen_.scale(), 1e-300));
    double t = 0.0;
    const double min_step = 1e-14 * duration;
    Matrix9c k1, k2, k3, k4, k5, k6, k7, y, y5;
    gen_.apply(rho, k1);
    while (t < duration) {
      double h = std::min(step_, duration - t);
      const bool last = (h == duration - t);
      gen_.apply(rho + h * (a21 * k1), k2);
      gen_.apply(rho + h * (a31 * k1 + a32 * k2), k3);
      gen_.apply(rho + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
      gen_.apply(rho + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
      gen_.apply(rho + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
      y5 = rho + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      gen_.apply(y5, k7);
      const Matrix9c err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double norm = 0.0;
      for (int i = 0; i < 81; ++i) {
        norm = std::max(norm, std::abs(err.data()[i]) / tol_);
      }
      if (norm <= 1.0) {
        t = last ? duration : t + h;
        rho = 0.5 * (y5 + y5.adjoint());
        k1 = 0.5 * (k7 + k7.adjoint());
        ++accepted_;
      }
      const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      if (!(last && norm <= 1.0)) step_ = h * factor;
      if (step_ < min_step) throw IntegrationFailure("step size underflow");
    }
  }

  long accepted_steps() const { return accepted_; }

 private:
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b(5th) - b(4th)
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const LindbladGenerator& gen_;
  double tol_;
  double step_ = 0.0;
  long accepted_ = 0;
};

inline void require_valid(const DensityMatrix& rho) {
  // Inputs are checked against looser bounds than outputs so that states
  // produced by earlier segments can be chained.
  const DensityTolerances loose{1e-8, 1e-7, 1e-7};
  if (!rho.valid(loose)) throw InvalidState("density matrix is not Hermitian, unit-trace and positive");
}

inline DensityMatrix evolve(const DensityMatrix& rho0, const DriveParameters& p,
                            const JumpOperatorSet& jumps, double duration, double tol = 1e-9) {
  require_valid(rho0);
  const LindbladGenerator gen(build_hamiltonian(p), jumps);
  LindbladIntegrator integrator(gen, tol);
  Matrix9c rho = rho0.matrix();
  integrator.advance(rho, duration);
  return DensityMatrix(rho);
}

inline Vector9c phi_plus() {
  Vector9c v = Vector9c::Zero();
  v(pair_index(kZero, kZero)) = v(pair_index(kOne, kOne)) = 1.0 / std::sqrt(2.0);
  return v;
}

/// <target| rho |target> for a normalized target vector.
inline double state_fidelity(const DensityMatrix& rho, const Vector9c& target) {
  return (target.adjoint() * rho.matrix() * target)(0, 0).real();
}

inline double bell_fidelity(const DensityMatrix& rho) { return state_fidelity(rho, phi_plus()); }

}  // namespace rydsi
