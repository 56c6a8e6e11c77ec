#include <gtest/gtest.h>

#include "rydsi/protocols.hpp"

using namespace rydsi;

namespace {

// Phase acquired by |ab> relative to |00> under decoherence-free evolution
// of (|00> + |ab>)/sqrt2. For the resonant protocol |00> is never driven.
cplx return_amplitude(const PulseProtocol& p, int a, int b, double u) {
  Vector9c w = Vector9c::Zero();
  w(pair_index(kZero, kZero)) += 1.0;
  w(pair_index(a, b)) += 1.0;
  DensityMatrix rho = DensityMatrix::pure(w);
  const auto jumps = JumpOperatorSet::standard(DecoherenceRates::none());
  for (const auto& s : p.segments) {
    const cplx r = std::polar(s.rabi_magnitude, s.phase);
    rho = evolve(rho, {s.addressing[0] ? r : 0.0, s.addressing[1] ? r : 0.0, s.detuning, u}, jumps,
                 s.duration, 1e-10);
  }
  return 2.0 * rho(pair_index(a, b), pair_index(kZero, kZero));
}

}  // namespace

TEST(Protocols, ResonantDurations) {
  const auto p = make_resonant_blockade(M_PI);
  ASSERT_EQ(p.segments.size(), 3u);
  EXPECT_NEAR(p.segments[0].duration, 1.0, 1e-15);
  EXPECT_NEAR(p.segments[1].duration, 2.0, 1e-15);
  EXPECT_NEAR(p.segments[2].duration, 1.0, 1e-15);
  for (const auto& s : p.segments) EXPECT_EQ(s.detuning, 0.0);
  EXPECT_TRUE(p.segments[0].addressing[0] && !p.segments[0].addressing[1]);
  EXPECT_TRUE(!p.segments[1].addressing[0] && p.segments[1].addressing[1]);
  EXPECT_NEAR(p.duration(), 4.0, 1e-15);
}

TEST(Protocols, OffResonantDurations) {
  const auto d = make_off_resonant_blockade(1.0);
  EXPECT_DOUBLE_EQ(d.segments[0].detuning, kOffResonantDetuningRatio);
  EXPECT_DOUBLE_EQ(d.segments[1].phase, 3.90242);
  const auto p = make_off_resonant_blockade(1.0, 0.0, 0.0);
  EXPECT_NEAR(p.segments[0].duration, 2.0 * M_PI / std::sqrt(2.0), 1e-14);
  for (double rabi : {0.3, 2.0, 170.0}) {
    const auto q = make_off_resonant_blockade(rabi);
    const double tau = q.segments[0].duration, dl = q.segments[0].detuning;
    EXPECT_NEAR(tau * tau * (2 * rabi * rabi + dl * dl), 4 * M_PI * M_PI, 1e-10);
    EXPECT_EQ(q.segments[0].duration, q.segments[1].duration);
    EXPECT_EQ(q.segments[0].rabi_magnitude, q.segments[1].rabi_magnitude);
  }
}

TEST(Protocols, InspiredDurations) {
  const auto d = make_blockade_inspired(1.0);
  EXPECT_DOUBLE_EQ(d.segments[0].detuning, 0.28757);
  EXPECT_DOUBLE_EQ(d.segments[1].phase, 1.5306);
  const auto p = make_blockade_inspired(3.0, 4.0 / 3.0, 0.0);
  EXPECT_NEAR(p.segments[0].duration, 2.0 * M_PI / 5.0, 1e-14);
  for (double rabi : {0.3, 2.0, 170.0}) {
    const auto q = make_blockade_inspired(rabi);
    const double tau = q.segments[0].duration, dl = q.segments[0].detuning;
    EXPECT_NEAR(tau * tau * (rabi * rabi + dl * dl), 4 * M_PI * M_PI, 1e-10);
  }
}

TEST(Protocols, RejectNonPositiveRabi) {
  EXPECT_THROW(make_resonant_blockade(0.0), NonPositiveRabi);
  EXPECT_THROW(make_off_resonant_blockade(-1.0), NonPositiveRabi);
  EXPECT_THROW(make_blockade_inspired(std::nan("")), NonPositiveRabi);
}

TEST(Protocols, ResonantTruthTable) {
  const auto p = make_resonant_blockade(1.0);
  const double u = 1e4;
  const std::array<std::pair<int, int>, 3> flipped{{{kOne, kOne}, {kOne, kZero}, {kZero, kOne}}};
  for (auto [a, b] : flipped) {
    const cplx amp = return_amplitude(p, a, b, u);
    EXPECT_NEAR(std::abs(amp), 1.0, 1e-3);
    EXPECT_NEAR(std::abs(std::arg(amp)), M_PI, 1e-3) << a << b;
  }
}

TEST(Protocols, DecoherenceFreeLimits) {
  const auto none = DecoherenceRates::none();
  EXPECT_GT(run_protocol(make_resonant_blockade(1.0), 1e4, none).fidelity, 0.9999);
  const double f_lev = run_protocol(make_off_resonant_blockade(1.0), 1e4, none).fidelity;
  EXPECT_NEAR(f_lev, 1.0, 1e-4);
  const double u = 100.0;
  EXPECT_GT(run_protocol(make_blockade_inspired(kInspiredRabiOverInteraction * u), u, none).fidelity, 0.9999);
}

TEST(Protocols, InspiredUnblockadedReturn) {
  const double u = 1.0, rabi = kInspiredRabiOverInteraction * u;
  const auto p = make_blockade_inspired(rabi);
  const auto& s = p.segments[0];
  const auto rho = evolve(DensityMatrix::pure(plus_plus_state()), {rabi, rabi, s.detuning, u},
                          JumpOperatorSet::standard(DecoherenceRates::none()), s.duration, 1e-11);
  EXPECT_NEAR(rho.population(pair_index(kZero, kOne)), 0.25, 1e-4);
  EXPECT_NEAR(rho.population(pair_index(kOne, kZero)), 0.25, 1e-4);
}

TEST(Protocols, InspiredHeadlineFidelity) {
  const double u = 1e4;
  const auto r = run_protocol(make_blockade_inspired(kInspiredRabiOverInteraction * u), u,
                              DecoherenceRates::normalized());
  EXPECT_NEAR(r.fidelity, 0.999, 0.002);
  EXPECT_NEAR(r.gate_duration, make_blockade_inspired(kInspiredRabiOverInteraction * u).duration(), 0);
  EXPECT_TRUE(r.final_state.valid());
}

TEST(Protocols, NegativeInteractionMirrorsPositive) {
  const double u = 300.0;
  const auto p = make_blockade_inspired(kInspiredRabiOverInteraction * u);
  const double fp = run_protocol(p, u, DecoherenceRates::normalized()).fidelity;
  const double fm = run_protocol(p, -u, DecoherenceRates::normalized()).fidelity;
  EXPECT_NEAR(fp, fm, 1e-8);
}

TEST(Protocols, GlobalPhaseRotationInvariance) {
  const double u = 500.0;
  auto p = make_blockade_inspired(kInspiredRabiOverInteraction * u);
  const double f0 = run_protocol(p, u, DecoherenceRates::normalized()).fidelity;
  for (auto& s : p.segments) s.phase += 0.9;
  EXPECT_NEAR(run_protocol(p, u, DecoherenceRates::normalized()).fidelity, f0, 1e-8);
}

TEST(Protocols, PopulationTraces) {
  const double u = 200.0;
  const auto p = make_off_resonant_blockade(0.1 * u);
  const auto r = run_protocol(p, u, DecoherenceRates::normalized(), {true, 1e-9, 512});
  ASSERT_TRUE(r.population_traces.has_value());
  ASSERT_EQ(r.population_traces->times.size(), 512u);
  EXPECT_DOUBLE_EQ(r.population_traces->times.front(), 0.0);
  EXPECT_NEAR(r.population_traces->times.back(), p.duration(), 1e-12);
  for (const auto& pops : r.population_traces->populations) {
    double sum = 0;
    for (double x : pops) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  const auto& first = r.population_traces->populations.front();
  EXPECT_NEAR(first[pair_index(kOne, kOne)], 0.25, 1e-12);
}

TEST(Protocols, SuiteKeepsDensityInvariants) {
  const auto rates = DecoherenceRates::normalized();
  for (double u : {1e2, 1e3}) {
    for (const auto& p : {make_resonant_blockade(0.3 * u), make_off_resonant_blockade(0.3 * u),
                          make_blockade_inspired(kInspiredRabiOverInteraction * u)}) {
      const auto r = run_protocol(p, u, rates);
      EXPECT_LT(std::abs(r.raw_state.trace() - 1.0), 1e-9);
      EXPECT_LT(r.raw_state.hermiticity_error(), 1e-10);
      EXPECT_GT(r.raw_state.min_eigenvalue(), -1e-9);
      EXPECT_GE(r.fidelity, 0.0);
      EXPECT_LE(r.fidelity, 1.0);
    }
  }
}

TEST(Protocols, DecoherenceFreeRunsStayPure) {
  const auto none = DecoherenceRates::none();
  const double u = 1e3;
  for (const auto& p : {make_resonant_blockade(0.1 * u), make_off_resonant_blockade(0.1 * u),
                        make_blockade_inspired(kInspiredRabiOverInteraction * u)})
    EXPECT_NEAR(run_protocol(p, u, none).raw_state.purity(), 1.0, 1e-8);
}

TEST(LocalPhase, AlreadyMaximal) {
  const double phi = optimal_local_phase(DensityMatrix::pure(phi_plus()));
  EXPECT_NEAR(std::remainder(phi, 2.0 * M_PI), 0.0, 1e-7);
}

TEST(LocalPhase, CancelsSquaredPhase) {
  for (double alpha : {0.3, 1.2, 2.9}) {
    Vector9c v = Vector9c::Zero();
    v(pair_index(kZero, kZero)) = 1.0;
    v(pair_index(kOne, kOne)) = std::polar(1.0, -2.0 * alpha);
    const double phi = optimal_local_phase(DensityMatrix::pure(v));
    // phi and phi + pi both cancel exp(-2 i alpha)
    EXPECT_NEAR(std::remainder(2.0 * (phi - alpha), 2.0 * M_PI), 0.0, 1e-7);
  }
}

TEST(LocalPhase, MatchesDenseScan) {
  const double u = 1e4;
  const auto r = run_protocol(make_blockade_inspired(kInspiredRabiOverInteraction * u), u,
                              DecoherenceRates::normalized(), {false, 1e-9, 0});
  const Vector9c target = controlled_z_target();
  const double phi = optimal_local_phase(r.raw_state, target);
  const double f = state_fidelity(apply_local_phase(r.raw_state, phi), target);
  double best = 0;
  for (int i = 0; i < 200000; ++i)
    best = std::max(best, state_fidelity(apply_local_phase(r.raw_state, 2 * M_PI * i / 200000), target));
  EXPECT_NEAR(f, best, 1e-6);
  EXPECT_GE(f, best - 1e-12);
}

TEST(LocalPhase, HadamardTargetIsControlledZImage) {
  // CZ|++> = (|00> + |01> + |10> - |11>)/2
  const Vector9c t = controlled_z_target();
  EXPECT_NEAR(t(pair_index(0, 0)).real(), 0.5, 1e-15);
  EXPECT_NEAR(t(pair_index(0, 1)).real(), 0.5, 1e-15);
  EXPECT_NEAR(t(pair_index(1, 0)).real(), 0.5, 1e-15);
  EXPECT_NEAR(t(pair_index(1, 1)).real(), -0.5, 1e-15);
}
