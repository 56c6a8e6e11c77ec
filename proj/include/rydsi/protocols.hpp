#pragma once

// Pulse sequences for the resonant blockade, off-resonant blockade and
// blockade-inspired gates, plus the ideal single-qubit correction stage.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rydsi/errors.hpp"
#include "rydsi/lindblad.hpp"

namespace rydsi {

enum class ProtocolKind { ResonantBlockade, OffResonantBlockade, BlockadeInspired };

inline std::string to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::ResonantBlockade: return "resonant";
    case ProtocolKind::OffResonantBlockade: return "off-resonant";
    case ProtocolKind::BlockadeInspired: return "blockade-inspired";
  }
  return "?";
}

inline ProtocolKind protocol_from_string(const std::string& s) {
  if (s == "resonant" || s == "jaksch") return ProtocolKind::ResonantBlockade;
  if (s == "off-resonant" || s == "levine") return ProtocolKind::OffResonantBlockade;
  if (s == "blockade-inspired" || s == "new") return ProtocolKind::BlockadeInspired;
  throw ConfigError("unknown protocol '" + s + "'");
}

struct PulseSegment {
  double rabi_magnitude = 0;
  double phase = 0;  // applied as Omega * exp(i phase)
  double detuning = 0;
  double duration = 0;
  std::array<bool, 2> addressing{true, true};

  bool valid() const { return duration > 0 && (addressing[0] || addressing[1]); }
};

struct PulseProtocol {
  ProtocolKind kind = ProtocolKind::BlockadeInspired;
  std::vector<PulseSegment> segments;
  double local_phase = 0;

  double duration() const {
    double t = 0;
    for (const auto& s : segments) t += s.duration;
    return t;
  }
};

inline constexpr double kOffResonantDetuningRatio = 0.377371;
inline constexpr double kOffResonantPhase = 3.90242;
inline constexpr double kInspiredRabiOverInteraction = 1.45747;
inline constexpr double kInspiredDetuningRatio = 0.28757;
inline constexpr double kInspiredPhase = 1.5306;

namespace detail {
inline void require_positive_rabi(double rabi) {
  if (!(rabi > 0) || !std::isfinite(rabi)) throw NonPositiveRabi("Rabi frequency must be positive");
}

inline PulseProtocol two_global_pulses(ProtocolKind kind, double rabi, double detuning_ratio,
                                       double xi, double tau) {
  const double detuning = detuning_ratio * rabi;
  PulseProtocol p{kind, {}, 0.0};
  p.segments.push_back({rabi, 0.0, detuning, tau, {true, true}});
  p.segments.push_back({rabi, xi, detuning, tau, {true, true}});
  return p;
}
}  // namespace detail

/// pi on donor 1, 2 pi on donor 2, pi on donor 1, all on resonance.
inline PulseProtocol make_resonant_blockade(double rabi) {
  detail::require_positive_rabi(rabi);
  const double pi_time = M_PI / rabi;
  PulseProtocol p{ProtocolKind::ResonantBlockade, {}, 0.0};
  p.segments.push_back({rabi, 0.0, 0.0, pi_time, {true, false}});
  p.segments.push_back({rabi, 0.0, 0.0, 2.0 * pi_time, {false, true}});
  p.segments.push_back({rabi, 0.0, 0.0, pi_time, {true, false}});
  return p;
}

/// Two global pulses timed to a blockaded 2 pi rotation.
inline PulseProtocol make_off_resonant_blockade(double rabi,
                                                double detuning_ratio = kOffResonantDetuningRatio,
                                                double xi = kOffResonantPhase) {
  detail::require_positive_rabi(rabi);
  const double d = detuning_ratio * rabi;
  const double tau = 2.0 * M_PI / std::sqrt(2.0 * rabi * rabi + d * d);
  return detail::two_global_pulses(ProtocolKind::OffResonantBlockade, rabi, detuning_ratio, xi, tau);
}

/// Two global pulses timed to an unblockaded 2 pi rotation.
inline PulseProtocol make_blockade_inspired(double rabi,
                                            double detuning_ratio = kInspiredDetuningRatio,
                                            double xi = kInspiredPhase) {
  detail::require_positive_rabi(rabi);
  const double d = detuning_ratio * rabi;
  const double tau = 2.0 * M_PI / std::sqrt(rabi * rabi + d * d);
  return detail::two_global_pulses(ProtocolKind::BlockadeInspired, rabi, detuning_ratio, xi, tau);
}

/// Initial product state (|0>+|1>)(|0>+|1>)/2.
inline Vector9c plus_plus_state() {
  Vector9c v = Vector9c::Zero();
  for (int a : {kZero, kOne})
    for (int b : {kZero, kOne}) v(pair_index(a, b)) = 0.5;
  return v;
}

/// Applies diag(1, e^{i phi}, 1) to both donors.
inline DensityMatrix apply_local_phase(const DensityMatrix& rho, double phi) {
  Vector9c d;
  const cplx e = std::polar(1.0, phi);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) d(pair_index(a, b)) = (a == kOne ? e : 1.0) * (b == kOne ? e : 1.0);
  return DensityMatrix(d.asDiagonal() * rho.matrix() * d.conjugate().asDiagonal());
}

/// Ideal Hadamard on the qubit levels of donor 2; |r> is left untouched.
inline Matrix9c hadamard_on_second() {
  Matrix3c h = Matrix3c::Identity();
  const double s = 1.0 / std::sqrt(2.0);
  h(0, 0) = s;
  h(0, 1) = s;
  h(1, 0) = s;
  h(1, 1) = -s;
  return kron3(Matrix3c::Identity(), h);
}

/// Target that maps onto |Phi+> after the Hadamard on donor 2, i.e. the
/// controlled-Z image of the initial |++> state.
inline Vector9c controlled_z_target() { return hadamard_on_second() * phi_plus(); }

/// Phase phi maximizing the overlap of (P_phi x P_phi) rho (..)^dag with `target`:
/// dense scan followed by golden-section refinement.
inline double optimal_local_phase(const DensityMatrix& rho, const Vector9c& target = phi_plus()) {
  // The overlap is a trigonometric polynomial in phi: entry (i, j) picks up
  // exp(i (n_i - n_j) phi), n = number of donors in |1>.
  std::array<cplx, 5> c{};
  auto ones = [](int idx) { return int(idx / 3 == kOne) + int(idx % 3 == kOne); };
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      c[ones(i) - ones(j) + 2] += std::conj(target(i)) * rho(i, j) * target(j);
  auto fidelity = [&](double phi) {
    double f = 0;
    for (int k = -2; k <= 2; ++k) f += (c[k + 2] * std::polar(1.0, k * phi)).real();
    return f;
  };
  constexpr int kScan = 720;
  const double step = 2.0 * M_PI / kScan;
  int best = 0;
  double best_f = -1.0;
  for (int i = 0; i < kScan; ++i) {
    const double f = fidelity(i * step);
    if (f > best_f) {
      best_f = f;
      best = i;
    }
  }
  double lo = (best - 1) * step, hi = (best + 1) * step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = fidelity(x1), f2 = fidelity(x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = fidelity(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = fidelity(x1);
    }
  }
  double phi = 0.5 * (lo + hi);
  if (fidelity(phi) < best_f) phi = best * step;
  phi = std::fmod(phi, 2.0 * M_PI);
  return phi < 0 ? phi + 2.0 * M_PI : phi;
}

struct PopulationTrace {
  std::vector<double> times;
  std::vector<std::array<double, 9>> populations;
};

struct GateResult {
  DensityMatrix final_state;  // after local phase and the Hadamard on donor 2
  DensityMatrix raw_state;    // straight out of the pulse sequence
  double fidelity = 0;
  double gate_duration = 0;
  double local_phase = 0;
  std::optional<PopulationTrace> population_traces;
};

struct RunOptions {
  bool optimize_local_phase = true;
  double tol = 1e-9;
  int trace_samples = 0;  // 0: no traces; 512 reproduces the population panel
};

/// Runs the protocol from |++> and scores the Bell fidelity. Negative
/// interactions flip the detuning and phase signs, which maps the dynamics
/// onto the complex conjugate of the |u| problem.
inline GateResult run_protocol(const PulseProtocol& protocol, double interaction,
                               const DecoherenceRates& rates, const RunOptions& opt = {}) {
  for (const auto& s : protocol.segments)
    if (!s.valid()) throw ConfigError("invalid pulse segment");
  const double sign = interaction < 0 ? -1.0 : 1.0;
  const JumpOperatorSet jumps = JumpOperatorSet::standard(rates);
  Matrix9c rho = DensityMatrix::pure(plus_plus_state()).matrix();
  const double total = protocol.duration();

  GateResult result;
  result.gate_duration = total;
  std::vector<double> sample_times;
  if (opt.trace_samples > 0) {
    result.population_traces.emplace();
    for (int i = 0; i < opt.trace_samples; ++i)
      sample_times.push_back(total * i / std::max(1, opt.trace_samples - 1));
  }
  auto record = [&](double t, const Matrix9c& m) {
    std::array<double, 9> pops{};
    for (int i = 0; i < 9; ++i) pops[i] = m(i, i).real();
    result.population_traces->times.push_back(t);
    result.population_traces->populations.push_back(pops);
  };

  double t0 = 0;
  std::size_t next_sample = 0;
  for (const auto& seg : protocol.segments) {
    const cplx rabi = std::polar(seg.rabi_magnitude, sign * seg.phase);
    DriveParameters p{seg.addressing[0] ? rabi : 0.0, seg.addressing[1] ? rabi : 0.0,
                      sign * seg.detuning, interaction};
    const LindbladGenerator gen(build_hamiltonian(p), jumps);
    LindbladIntegrator integrator(gen, opt.tol);
    double t = 0;
    while (next_sample < sample_times.size() && sample_times[next_sample] <= t0 + seg.duration) {
      integrator.advance(rho, sample_times[next_sample] - t0 - t);
      t = sample_times[next_sample] - t0;
      record(sample_times[next_sample], rho);
      ++next_sample;
    }
    integrator.advance(rho, seg.duration - t);
    t0 += seg.duration;
  }
  result.raw_state = DensityMatrix(rho);
  const Vector9c target = controlled_z_target();
  double phi = sign * protocol.local_phase;
  if (opt.optimize_local_phase) phi = optimal_local_phase(result.raw_state, target);
  result.local_phase = sign * phi;
  const DensityMatrix corrected = apply_local_phase(result.raw_state, phi);
  const Matrix9c h = hadamard_on_second();
  result.final_state = DensityMatrix(h * corrected.matrix() * h.adjoint());
  result.fidelity = std::clamp(bell_fidelity(result.final_state), 0.0, 1.0);
  return result;
}

}  // namespace rydsi
