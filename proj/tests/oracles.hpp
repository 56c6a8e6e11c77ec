#pragma once

// Reference values computed independently of the library's solvers.

#include <cmath>
#include <vector>

#include "rydsi/nelder_mead.hpp"

namespace oracles {

// Independent variational oracle. Trial psi = w^p exp(-s) in the scaled
// coordinates u = x/a, v = y/a, w = z/b with s = |(u, v, w)|, for
// H = -(d_x^2 + d_y^2 + gamma d_z^2)/2 - 1/r. p = 0 is the ground state,
// p = 1 the lowest odd (2p0-like) state. Quadrature in (s, theta); the
// azimuth averages out.
inline double trial_energy(double a, double b, double gamma, int p) {
  const int ns = 1500, nt = 200;
  const double smax = 30.0, hs = smax / ns, ht = M_PI / nt;
  double norm = 0, kin = 0, pot = 0;
  for (int i = 0; i <= ns; ++i) {
    const double s = i * hs;
    const double ws = (i == 0 || i == ns) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double e = std::exp(-2.0 * s);
    for (int j = 0; j <= nt; ++j) {
      const double t = j * ht;
      const double wt = (j == 0 || j == nt) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      const double ct = std::cos(t), st = std::sin(t);
      const double w = ws * wt * s * s * st;
      double psi2, grad_perp2, grad_z2;
      if (p == 0) {
        psi2 = e;
        grad_perp2 = st * st * e;
        grad_z2 = ct * ct * e;
      } else {
        psi2 = s * s * ct * ct * e;
        grad_perp2 = s * s * ct * ct * st * st * e;
        grad_z2 = (1.0 - s * ct * ct) * (1.0 - s * ct * ct) * e;
      }
      norm += w * psi2;
      kin += w * 0.5 * (grad_perp2 / (a * a) + gamma * grad_z2 / (b * b));
      const double r = s * std::sqrt(a * a * st * st + b * b * ct * ct);
      if (r > 0) pot -= w * psi2 / r;
    }
  }
  return (kin + pot) / norm;
}

inline double variational_oracle(double gamma, int p) {
  auto f = [&](const std::vector<double>& x) {
    return trial_energy(std::exp(x[0]), std::exp(x[1]), gamma, p);
  };
  rydsi::NelderMeadOptions o;
  o.xtol = 1e-6;
  o.ftol = 1e-12;
  const auto r = rydsi::nelder_mead(f, {p == 0 ? 0.0 : -0.7, p == 0 ? -0.5 : -1.2}, {0.3, 0.3}, o);
  return r.value;
}

}  // namespace oracles
