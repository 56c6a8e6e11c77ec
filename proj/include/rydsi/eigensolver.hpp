#pragma once

// Shift-invert Lanczos for the symmetric generalized problem K x = lambda M x
// with M positive definite. Returns the eigenpairs closest to the shift.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "rydsi/errors.hpp"

namespace rydsi {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct EigenPairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // M-orthonormal columns
};

struct LanczosOptions {
  int max_steps = 600;
  double tol = 1e-10;  // relative residual of the shifted problem
};

namespace detail {

/// Deterministic start vector with support on every degree of freedom.
inline Eigen::VectorXd lanczos_start(Eigen::Index n) {
  Eigen::VectorXd v(n);
  std::uint64_t s = 0x9E3779B97F4A7C15ull;
  for (Eigen::Index i = 0; i < n; ++i) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    v(i) = 1.0 + 0.5 * (double(s >> 11) / double(1ull << 53) - 0.5);
  }
  return v;
}

}  // namespace detail

/// `count` eigenpairs of K x = lambda M x nearest `sigma`. With sigma below
/// the spectrum these are the lowest ones.
inline EigenPairs shift_invert_lanczos(const SparseMatrix& k, const SparseMatrix& m, double sigma,
                                       int count, const LanczosOptions& opt = {},
                                       const Eigen::VectorXd* start = nullptr) {
  const Eigen::Index n = k.rows();
  if (count <= 0 || count > n) throw EigensolverFailure("invalid eigenpair count");
  SparseMatrix a = k - sigma * m;
  Eigen::SimplicialLDLT<SparseMatrix> solver(a);
  if (solver.info() != Eigen::Success) throw EigensolverFailure("factorization of K - sigma M failed");

  const int max_steps = int(std::min<Eigen::Index>(opt.max_steps, n));
  Eigen::MatrixXd v(n, max_steps + 1);
  Eigen::MatrixXd mv(n, max_steps + 1);  // M v_j, kept for reorthogonalization
  std::vector<double> alpha, beta;

  Eigen::VectorXd q = start ? *start : detail::lanczos_start(n);
  Eigen::VectorXd mq = m * q;
  double nrm = std::sqrt(q.dot(mq));
  v.col(0) = q / nrm;
  mv.col(0) = mq / nrm;

  Eigen::VectorXd theta;
  Eigen::MatrixXd s;
  int steps = 0;
  bool converged = false;
  for (int j = 0; j < max_steps; ++j) {
    Eigen::VectorXd w = solver.solve(mv.col(j));
    if (solver.info() != Eigen::Success) throw EigensolverFailure("shift-invert solve failed");
    const double a_j = w.dot(mv.col(j));
    alpha.push_back(a_j);
    // Two passes of full Gram-Schmidt in the M inner product.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd c = mv.leftCols(j + 1).transpose() * w;
      w.noalias() -= v.leftCols(j + 1) * c;
    }
    Eigen::VectorXd mw = m * w;
    const double b = std::sqrt(std::max(0.0, w.dot(mw)));
    steps = j + 1;

    const bool check = steps >= count && (steps % 10 == 0 || steps == max_steps || b < 1e-14);
    if (check) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
      for (int i = 0; i < steps; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < steps) t(i, i + 1) = t(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      theta = es.eigenvalues();
      s = es.eigenvectors();
      // Closest to sigma = largest |theta|.
      std::vector<int> idx(steps);
      for (int i = 0; i < steps; ++i) idx[i] = i;
      std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return std::abs(theta(x)) > std::abs(theta(y)); });
      bool ok = true;
      for (int i = 0; i < count && ok; ++i) {
        const double res = std::abs(b * s(steps - 1, idx[i]));
        if (res > opt.tol * std::abs(theta(idx[i]))) ok = false;
      }
      if (ok || b < 1e-14) {
        converged = ok;
        Eigen::MatrixXd sel(steps, count);
        Eigen::VectorXd th(count);
        for (int i = 0; i < count; ++i) {
          sel.col(i) = s.col(idx[i]);
          th(i) = theta(idx[i]);
        }
        s = sel;
        theta = th;
        break;
      }
    }
    if (j + 1 == max_steps) break;
    beta.push_back(b);
    v.col(j + 1) = w / b;
    mv.col(j + 1) = mw / b;
  }
  if (!converged) throw EigensolverFailure("Lanczos did not converge in " + std::to_string(steps) + " steps");

  EigenPairs out;
  std::vector<std::pair<double, Eigen::VectorXd>> pairs;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x = v.leftCols(steps) * s.col(i);
    const Eigen::VectorXd mx = m * x;
    x /= std::sqrt(x.dot(mx));
    const double lambda = x.dot(k * x);  // Rayleigh quotient, x is M-normalized
    pairs.emplace_back(lambda, std::move(x));
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  out.values.resize(count);
  out.vectors.resize(n, count);
  for (int i = 0; i < count; ++i) {
    out.values(i) = pairs[i].first;
    out.vectors.col(i) = pairs[i].second;
  }
  return out;
}

}  // namespace rydsi
