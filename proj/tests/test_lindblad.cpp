#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "rydsi/lindblad.hpp"

using namespace rydsi;

namespace {

DensityMatrix product(int a, int b) {
  Vector9c v = Vector9c::Zero();
  v(pair_index(a, b)) = 1.0;
  return DensityMatrix::pure(v);
}

// Column-stacked Liouvillian, built independently of the engine.
Eigen::MatrixXcd liouvillian(const Matrix9c& h, const std::vector<Matrix9c>& ls) {
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(9, 9);
  auto kron = [](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  };
  // vec(A X B) = (B^T kron A) vec(X)
  Eigen::MatrixXcd l = cplx(0, -1) * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& j : ls) {
    const Eigen::MatrixXcd jj = j.adjoint() * j;
    l += kron(j.conjugate(), j) - 0.5 * kron(id, jj) - 0.5 * kron(jj.transpose(), id);
  }
  return l;
}

}  // namespace

TEST(Hamiltonian, InteractionOnly) {
  const Matrix9c h = build_hamiltonian({0.0, 0.0, 0.0, 5.0});
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      const double expect = (i == 8 && j == 8) ? 5.0 : 0.0;
      EXPECT_EQ(h(i, j), cplx(expect, 0.0));
    }
}

TEST(Hamiltonian, HalfRabiCoupling) {
  const Matrix9c h = build_hamiltonian({2.0, 0.0, 0.0, 0.0});
  for (int x = 0; x < 3; ++x) EXPECT_EQ(h(pair_index(kOne, x), pair_index(kRydberg, x)), cplx(1.0, 0.0));
}

TEST(Hamiltonian, Hermitian) {
  const Matrix9c h = build_hamiltonian({cplx(0.3, -1.2), cplx(2.0, 0.7), 0.8, -3.0});
  EXPECT_EQ((h - h.adjoint()).norm(), 0.0);
}

TEST(Evolve, ZeroGeneratorLeavesStateUnchanged) {
  Vector9c v;
  for (int i = 0; i < 9; ++i) v(i) = cplx(0.1 * i + 0.2, 0.05 * i);
  const auto rho = DensityMatrix::pure(v);
  const auto out = evolve(rho, {}, JumpOperatorSet::standard(DecoherenceRates::none()), 3.7);
  EXPECT_LT((out.matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Evolve, SingleDonorPopulationDecay) {
  const auto jumps = JumpOperatorSet::standard(DecoherenceRates::normalized());
  for (double t : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    const auto out = evolve(product(kRydberg, kZero), {}, jumps, t);
    EXPECT_NEAR(out.population(pair_index(kRydberg, kZero)), std::exp(-t), 1e-6);
    EXPECT_NEAR(out.population(pair_index(kOne, kZero)), 1.0 - std::exp(-t), 1e-6);
  }
}

TEST(Evolve, SingleDonorCoherenceDecay) {
  const auto jumps = JumpOperatorSet::standard(DecoherenceRates::normalized());
  Vector9c v = Vector9c::Zero();
  v(pair_index(kOne, kZero)) = v(pair_index(kRydberg, kZero)) = 1.0 / std::sqrt(2.0);
  for (double t : {0.1, 0.7, 1.5, 3.0}) {
    const auto out = evolve(DensityMatrix::pure(v), {}, jumps, t);
    EXPECT_NEAR(std::abs(out(pair_index(kOne, kZero), pair_index(kRydberg, kZero))),
                0.5 * std::exp(-1.5 * t), 1e-6);
  }
}

TEST(Evolve, MatchesLiouvillianExponential) {
  const DriveParameters p{cplx(3.0, 1.0), cplx(2.5, -0.5), 0.7, 4.0};
  const auto jumps = JumpOperatorSet::standard({0.8, 0.3});
  Vector9c v;
  for (int i = 0; i < 9; ++i) v(i) = cplx(std::cos(i), std::sin(2.0 * i));
  const auto rho0 = DensityMatrix::pure(v);
  const double t = 1.3;
  const auto out = evolve(rho0, p, jumps, t);

  const Eigen::MatrixXcd prop = (liouvillian(build_hamiltonian(p), jumps.operators) * t).exp();
  Eigen::VectorXcd vec = Eigen::Map<const Eigen::VectorXcd>(rho0.matrix().data(), 81);
  Eigen::VectorXcd res = prop * vec;
  const Eigen::Map<Matrix9c> expected(res.data());
  EXPECT_LT((out.matrix() - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Evolve, UnitaryPreservesPurity) {
  const DriveParameters p{cplx(5.0, 0.0), cplx(0.0, 5.0), 1.1, 7.0};
  Vector9c v = Vector9c::Zero();
  v(0) = v(4) = v(3) = v(1) = 0.5;
  const auto out = evolve(DensityMatrix::pure(v), p, JumpOperatorSet::standard(DecoherenceRates::none()), 2.5);
  EXPECT_NEAR(out.purity(), 1.0, 1e-8);
}

TEST(Evolve, InvariantsUnderDrive) {
  const DriveParameters p{cplx(40.0, 0.0), cplx(40.0, 0.0), 12.0, 100.0};
  Vector9c v = Vector9c::Zero();
  v(0) = v(1) = v(3) = v(4) = 0.5;
  const auto out = evolve(DensityMatrix::pure(v), p, JumpOperatorSet::standard(DecoherenceRates::normalized()), 0.5);
  EXPECT_LT(std::abs(out.trace() - 1.0), 1e-9);
  EXPECT_LT(out.hermiticity_error(), 1e-10);
  EXPECT_GT(out.min_eigenvalue(), -1e-9);
}

TEST(Evolve, EmissionNeverFeedsGroundLevel) {
  const auto out = evolve(product(kRydberg, kRydberg), {}, JumpOperatorSet::standard({1.0, 0.5}), 5.0);
  for (int b = 0; b < 3; ++b) {
    EXPECT_LT(std::abs(out.population(pair_index(kZero, b))), 1e-10);
    EXPECT_LT(std::abs(out.population(pair_index(b, kZero))), 1e-10);
  }
}

TEST(Evolve, ToleranceConvergence) {
  const DriveParameters p{cplx(30.0, 0.0), cplx(30.0, 0.0), 8.0, 50.0};
  Vector9c v = Vector9c::Zero();
  v(0) = v(1) = v(3) = v(4) = 0.5;
  const auto jumps = JumpOperatorSet::standard(DecoherenceRates::normalized());
  for (double tol : {1e-7, 1e-8, 1e-9}) {
    const double f1 = bell_fidelity(evolve(DensityMatrix::pure(v), p, jumps, 0.4, tol));
    const double f2 = bell_fidelity(evolve(DensityMatrix::pure(v), p, jumps, 0.4, 0.5 * tol));
    EXPECT_LE(std::abs(f1 - f2), tol);
  }
}

TEST(Evolve, RejectsInvalidInput) {
  Matrix9c m = Matrix9c::Zero();
  m(0, 0) = 2.0;
  EXPECT_THROW(evolve(DensityMatrix(m), {}, JumpOperatorSet::standard({}), 1.0), InvalidState);
  EXPECT_THROW(evolve(DensityMatrix(), {}, JumpOperatorSet::standard({}), -1.0), IntegrationFailure);
  EXPECT_THROW(evolve(DensityMatrix(), {}, JumpOperatorSet::standard({}), 1.0, 0.0), IntegrationFailure);
}

TEST(Bell, Examples) {
  EXPECT_NEAR(bell_fidelity(DensityMatrix::pure(phi_plus())), 1.0, 1e-15);
  EXPECT_NEAR(bell_fidelity(product(kZero, kZero)), 0.5, 1e-15);
  EXPECT_NEAR(bell_fidelity(DensityMatrix::maximally_mixed()), 1.0 / 9.0, 1e-15);
}

TEST(Jumps, StandardSet) {
  const auto j = JumpOperatorSet::standard({4.0, 1.0});
  ASSERT_EQ(j.operators.size(), 4u);
  EXPECT_EQ(j.operators[0](pair_index(kRydberg, 0), pair_index(kRydberg, 0)), cplx(1.0, 0));
  EXPECT_EQ(j.operators[0](pair_index(kOne, 0), pair_index(kOne, 0)), cplx(-1.0, 0));
  EXPECT_EQ(j.operators[2](pair_index(kOne, 2), pair_index(kRydberg, 2)), cplx(2.0, 0));
  EXPECT_EQ(j.operators[3](pair_index(2, kOne), pair_index(2, kRydberg)), cplx(2.0, 0));
}
