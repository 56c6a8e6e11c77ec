#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace rydsi {

struct NelderMeadOptions {
  double ftol = 1e-11;  // absolute spread of simplex values
  double xtol = 1e-8;   // max vertex distance from the best vertex
  int max_evaluations = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Plain Nelder-Mead minimizer (reflection 1, expansion 2, contraction and
/// shrink 1/2). `steps` sets the initial simplex edge per coordinate.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const std::vector<double>& steps,
                                    const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> s(n + 1, x0);
  std::vector<double> fv(n + 1);
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };
  for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += steps[i];
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(s[i]);

  std::vector<std::size_t> order(n + 1);
  NelderMeadResult res;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    {
      auto s2 = s;
      auto f2 = fv;
      for (std::size_t i = 0; i <= n; ++i) {
        s[i] = s2[order[i]];
        fv[i] = f2[order[i]];
      }
    }
    double size = 0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) size = std::max(size, std::abs(s[i][k] - s[0][k]));
    if (fv[n] - fv[0] <= opt.ftol && size <= opt.xtol * 1e3) {
      res.converged = true;
      break;
    }
    if (size <= opt.xtol) {
      res.converged = true;
      break;
    }
    if (evals >= opt.max_evaluations) break;

    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) c[k] += s[i][k] / n;
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = c[k] + t * (s[n][k] - c[k]);
      return x;
    };
    auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        s[n] = xe;
        fv[n] = fe;
      } else {
        s[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      s[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[n])) {
        s[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t k = 0; k < n; ++k) s[i][k] = s[0][k] + 0.5 * (s[i][k] - s[0][k]);
          fv[i] = eval(s[i]);
        }
      }
    }
  }
  res.x = s[0];
  res.value = fv[0];
  res.evaluations = evals;
  return res;
}

}  // namespace rydsi
