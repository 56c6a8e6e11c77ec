#pragma once

// Pulse-parameter optimization of the three gate protocols, optimum curves
// along u/gamma grids and the robustness scans.

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "rydsi/errors.hpp"
#include "rydsi/nelder_mead.hpp"
#include "rydsi/protocols.hpp"

namespace rydsi {

enum class Parameter { Rabi, DetuningRatio, Phase };

struct Bounds {
  double lo = 0, hi = 0;
};

struct OptimizationSpec {
  ProtocolKind protocol_kind = ProtocolKind::BlockadeInspired;
  double interaction_over_gamma = 1e4;
  std::vector<Parameter> free_parameters;
  Bounds rabi;            // in units of gamma_se
  Bounds detuning_ratio{0.0, 1.0};
  Bounds phase{0.0, 2.0 * M_PI};
  double tolerance = 1e-11;
  int evaluation_budget = 2000;
  int multistarts = 4;
  double integrator_tol = 1e-9;

  /// Defaults for a protocol: which parameters are free and the bounds.
  static OptimizationSpec make(ProtocolKind kind, double u_over_gamma) {
    if (!(u_over_gamma > 0)) throw ConfigError("u/gamma must be positive");
    OptimizationSpec s;
    s.protocol_kind = kind;
    s.interaction_over_gamma = u_over_gamma;
    s.rabi = {1.0, 10.0 * u_over_gamma};
    s.free_parameters = {Parameter::Rabi};
    if (kind == ProtocolKind::BlockadeInspired)
      s.free_parameters = {Parameter::Rabi, Parameter::DetuningRatio, Parameter::Phase};
    return s;
  }
};

struct GateParameters {
  double rabi = 0;
  double detuning_ratio = 0;
  double phase = 0;

  double detuning() const { return detuning_ratio * rabi; }
};

struct OptimumRecord {
  ProtocolKind kind = ProtocolKind::BlockadeInspired;
  double interaction_over_gamma = 0;
  GateParameters parameters;
  double fidelity = 0;
  int evaluations = 0;
  bool certified = false;  // +-5% perturbations of each free parameter do not improve F
};

inline PulseProtocol make_protocol(ProtocolKind kind, const GateParameters& g) {
  switch (kind) {
    case ProtocolKind::ResonantBlockade: return make_resonant_blockade(g.rabi);
    case ProtocolKind::OffResonantBlockade:
      return make_off_resonant_blockade(g.rabi, g.detuning_ratio, g.phase);
    case ProtocolKind::BlockadeInspired: return make_blockade_inspired(g.rabi, g.detuning_ratio, g.phase);
  }
  throw ConfigError("unknown protocol kind");
}

inline GateParameters default_parameters(ProtocolKind kind, double rabi) {
  switch (kind) {
    case ProtocolKind::ResonantBlockade: return {rabi, 0.0, 0.0};
    case ProtocolKind::OffResonantBlockade:
      return {rabi, kOffResonantDetuningRatio, kOffResonantPhase};
    case ProtocolKind::BlockadeInspired: return {rabi, kInspiredDetuningRatio, kInspiredPhase};
  }
  return {rabi, 0, 0};
}

/// Bell fidelity in gate units (gamma_se = 1) with the local phase optimized.
inline double gate_fidelity(ProtocolKind kind, const GateParameters& g, double u_over_gamma,
                            const DecoherenceRates& rates = DecoherenceRates::normalized(),
                            double tol = 1e-9) {
  return run_protocol(make_protocol(kind, g), u_over_gamma, rates, {true, tol, 0}).fidelity;
}

namespace detail {

inline double wrap_phase(double x) {
  x = std::fmod(x, 2.0 * M_PI);
  return x < 0 ? x + 2.0 * M_PI : x;
}

/// Maps the free-coordinate vector (log Omega, Delta/Omega, xi) onto
/// parameters, clamping into bounds.
struct Coordinates {
  const OptimizationSpec& spec;
  GateParameters fixed;

  GateParameters resolve(const std::vector<double>& x) const {
    GateParameters g = fixed;
    for (std::size_t i = 0; i < spec.free_parameters.size(); ++i) {
      switch (spec.free_parameters[i]) {
        case Parameter::Rabi:
          g.rabi = std::clamp(std::exp(x[i]), spec.rabi.lo, spec.rabi.hi);
          break;
        case Parameter::DetuningRatio:
          g.detuning_ratio = std::clamp(x[i], spec.detuning_ratio.lo, spec.detuning_ratio.hi);
          break;
        case Parameter::Phase: g.phase = wrap_phase(x[i]); break;
      }
    }
    return g;
  }

  std::vector<double> encode(const GateParameters& g) const {
    std::vector<double> x;
    for (auto p : spec.free_parameters) {
      switch (p) {
        case Parameter::Rabi: x.push_back(std::log(g.rabi)); break;
        case Parameter::DetuningRatio: x.push_back(g.detuning_ratio); break;
        case Parameter::Phase: x.push_back(g.phase); break;
      }
    }
    return x;
  }

  std::vector<double> steps(double log_rabi_step) const {
    std::vector<double> s;
    for (auto p : spec.free_parameters) {
      switch (p) {
        case Parameter::Rabi: s.push_back(log_rabi_step); break;
        case Parameter::DetuningRatio: s.push_back(0.1); break;
        case Parameter::Phase: s.push_back(0.4); break;
      }
    }
    return s;
  }
};

inline bool local_max_certificate(const OptimizationSpec& spec, const GateParameters& g, double f) {
  const double slack = 1e-9;
  for (auto p : spec.free_parameters) {
    for (double factor : {0.95, 1.05}) {
      GateParameters h = g;
      switch (p) {
        case Parameter::Rabi: h.rabi *= factor; break;
        case Parameter::DetuningRatio: h.detuning_ratio *= factor; break;
        case Parameter::Phase: h.phase *= factor; break;
      }
      if (gate_fidelity(spec.protocol_kind, h, spec.interaction_over_gamma,
                        DecoherenceRates::normalized(), spec.integrator_tol) > f + slack)
        return false;
    }
  }
  return true;
}

}  // namespace detail

/// Runs Nelder-Mead from a given start and returns the record (without the
/// certificate).
inline OptimumRecord optimize_from(const OptimizationSpec& spec, const GateParameters& start,
                                   double log_rabi_step, const DecoherenceRates& rates,
                                   int* evaluations = nullptr) {
  detail::Coordinates coords{spec, start};
  auto objective = [&](const std::vector<double>& x) {
    return 1.0 - gate_fidelity(spec.protocol_kind, coords.resolve(x), spec.interaction_over_gamma,
                               rates, spec.integrator_tol);
  };
  NelderMeadOptions opt;
  opt.ftol = spec.tolerance;
  opt.max_evaluations = spec.evaluation_budget;
  const auto r = nelder_mead(objective, coords.encode(start), coords.steps(log_rabi_step), opt);
  if (evaluations) *evaluations += r.evaluations;
  OptimumRecord rec;
  rec.kind = spec.protocol_kind;
  rec.interaction_over_gamma = spec.interaction_over_gamma;
  rec.parameters = coords.resolve(r.x);
  rec.fidelity = 1.0 - r.value;
  rec.evaluations = r.evaluations;
  rec.certified = r.converged;
  return rec;
}

/// Multistart optimization. Starts are the best distinct points of a coarse
/// grid over log Omega (and Delta/Omega, xi when free); the grid is fixed so
/// results are deterministic.
inline OptimumRecord optimize(const OptimizationSpec& spec,
                              const DecoherenceRates& rates = DecoherenceRates::normalized()) {
  if (!(spec.interaction_over_gamma > 0)) throw ConfigError("u/gamma must be positive");
  const double u = spec.interaction_over_gamma;
  const bool full = spec.free_parameters.size() == 3;
  // Scan Omega over [0.01 u, 10 u] within bounds; slower drives are far from
  // any optimum and cost many integrator steps.
  const double lo = std::log(std::max(spec.rabi.lo, 0.01 * u));
  const double hi = std::log(spec.rabi.hi);
  const int n_rabi = full ? 16 : 40;
  const std::vector<double> ratios = full ? std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9}
                                          : std::vector<double>{};
  const int n_phase = full ? 8 : 0;
  const double dlog = (hi - lo) / (n_rabi - 1);

  struct Candidate {
    double f;
    int i, j, k;
    GateParameters g;
  };
  std::vector<Candidate> grid;
  int evals = 0;
  for (int i = 0; i < n_rabi; ++i) {
    const double rabi = std::exp(lo + i * dlog);
    if (!full) {
      const auto g = default_parameters(spec.protocol_kind, rabi);
      grid.push_back({gate_fidelity(spec.protocol_kind, g, u, rates, spec.integrator_tol), i, 0, 0, g});
      ++evals;
      continue;
    }
    for (std::size_t j = 0; j < ratios.size(); ++j)
      for (int k = 0; k < n_phase; ++k) {
        const GateParameters g{rabi, ratios[j], 2.0 * M_PI * k / n_phase};
        grid.push_back({gate_fidelity(spec.protocol_kind, g, u, rates, spec.integrator_tol), i,
                        int(j), k, g});
        ++evals;
      }
  }
  std::vector<Candidate> sorted = grid;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.f > b.f; });
  std::vector<Candidate> starts;
  for (const auto& c : sorted) {
    bool near = false;
    for (const auto& s : starts) {
      const int dk = std::min(std::abs(c.k - s.k), n_phase - std::abs(c.k - s.k));
      if (std::abs(c.i - s.i) <= 1 && std::abs(c.j - s.j) <= 1 && dk <= 1) near = true;
    }
    if (!near) starts.push_back(c);
    if (int(starts.size()) == spec.multistarts) break;
  }

  OptimumRecord best;
  best.fidelity = -1;
  int converged = 0;
  for (const auto& s : starts) {
    auto rec = optimize_from(spec, s.g, 0.5 * dlog, rates, &evals);
    converged += rec.certified;
    if (rec.fidelity > best.fidelity) best = rec;
  }
  if (converged == 0) throw NoConvergence("no multistart converged within the evaluation budget");
  best.evaluations = evals;
  best.certified = detail::local_max_certificate(spec, best.parameters, best.fidelity);
  return best;
}

/// Optima along an ascending u/gamma grid; each point is warm-started from
/// the previous optimum with Omega/u held.
inline std::vector<OptimumRecord> optimal_curve(ProtocolKind kind, const std::vector<double>& grid,
                                                const DecoherenceRates& rates = DecoherenceRates::normalized()) {
  std::vector<OptimumRecord> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0) || (i > 0 && grid[i] <= grid[i - 1]))
      throw ConfigError("u/gamma grid must be positive and ascending");
    const auto spec = OptimizationSpec::make(kind, grid[i]);
    if (i == 0) {
      out.push_back(optimize(spec, rates));
      continue;
    }
    GateParameters start = out.back().parameters;
    start.rabi = std::clamp(start.rabi * grid[i] / grid[i - 1], spec.rabi.lo, spec.rabi.hi);
    auto rec = optimize_from(spec, start, 0.1, rates);
    rec.certified = detail::local_max_certificate(spec, rec.parameters, rec.fidelity);
    out.push_back(rec);
  }
  return out;
}

/// Fidelity with Omega scaled by each multiplier and the pulse rebuilt from
/// it: Delta/Omega and xi stay at the optimum and the segment durations
/// follow the new Omega, so the scan moves along Omega/u.
inline std::vector<std::pair<double, double>> robustness_scan_rabi(
    const OptimumRecord& optimum, const std::vector<double>& multipliers,
    const DecoherenceRates& rates = DecoherenceRates::normalized()) {
  std::vector<std::pair<double, double>> out;
  for (double m : multipliers) {
    if (!(m > 0)) throw ConfigError("Rabi multipliers must be positive");
    GateParameters g = optimum.parameters;
    g.rabi *= m;
    out.emplace_back(m, run_protocol(make_protocol(optimum.kind, g), optimum.interaction_over_gamma, rates).fidelity);
  }
  return out;
}

inline std::vector<std::pair<double, double>> robustness_scan_rabi(
    double u_over_gamma, const std::vector<double>& multipliers) {
  return robustness_scan_rabi(optimize(OptimizationSpec::make(ProtocolKind::BlockadeInspired, u_over_gamma)),
                              multipliers);
}

/// Infidelity with the detuning shifted by offset * Omega (a common shift of
/// the transition), other parameters at the optimum.
inline std::vector<std::pair<double, double>> robustness_scan_detuning(
    const OptimumRecord& optimum, const std::vector<double>& offsets,
    const DecoherenceRates& rates = DecoherenceRates::normalized()) {
  std::vector<std::pair<double, double>> out;
  const PulseProtocol base = make_protocol(optimum.kind, optimum.parameters);
  for (double o : offsets) {
    if (!std::isfinite(o)) throw ConfigError("detuning offsets must be finite");
    PulseProtocol p = base;
    for (auto& s : p.segments) s.detuning += o * optimum.parameters.rabi;
    out.emplace_back(o, 1.0 - run_protocol(p, optimum.interaction_over_gamma, rates).fidelity);
  }
  return out;
}

inline std::vector<std::pair<double, double>> robustness_scan_detuning(
    double u_over_gamma, const std::vector<double>& offsets) {
  return robustness_scan_detuning(
      optimize(OptimizationSpec::make(ProtocolKind::BlockadeInspired, u_over_gamma)), offsets);
}

}  // namespace rydsi
