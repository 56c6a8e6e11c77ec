#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "rydsi/interaction.hpp"

using namespace rydsi;

namespace {

const InteractionContext& ctx() { return fixtures::phosphorus_context(); }

double mev() { return fixtures::phosphorus().hartree_meV; }

Eigen::Vector3d along(int axis, double nm) {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  r(axis) = nm / fixtures::phosphorus().bohr_nm;
  return r;
}

DonorPairGeometry pair_at(const Eigen::Vector3d& nm, double field = 0.0) {
  DonorPairGeometry g;
  g.displacement_nm = nm;
  g.field_V_per_um = Eigen::Vector3d(0, 0, field);
  return g;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Copy of the Phosphorus catalog keeping its `n` lowest states.
Catalog truncated(int n) {
  Catalog cat = fixtures::phosphorus();
  std::vector<CatalogState> s = cat.states;
  std::stable_sort(s.begin(), s.end(),
                   [](const CatalogState& a, const CatalogState& b) { return a.energy < b.energy; });
  s.resize(n);
  cat.states = s;
  return cat;
}

}  // namespace

// ---------------------------------------------------------------------------
// Coulomb repulsion

TEST(Coulomb, PointChargeLimit) {
  for (int axis : {0, 2}) {
    const Eigen::Vector3d r = along(axis, 60.0);
    const Estimate w = coulomb_repulsion(ctx().psi_r, ctx().psi_g, r, 1 << 17, 3);
    EXPECT_NEAR(w.value * r.norm(), 1.0, 0.01);
  }
}

TEST(Coulomb, SymmetricUnderInversion) {
  const Eigen::Vector3d r(1.0, 0.5, 3.0);
  const Estimate a = coulomb_repulsion(ctx().psi_r, ctx().psi_r, r, 1 << 17, 5);
  const Estimate b = coulomb_repulsion(ctx().psi_r, ctx().psi_r, -r, 1 << 17, 6);
  EXPECT_LT(std::abs(a.value - b.value), 4.0 * std::hypot(a.error, b.error));
}

TEST(Coulomb, AgreesWithTheFullSixDimensionalIntegral) {
  // Smoothed charges against the full oscillating densities.
  const Eigen::Vector3d r = along(2, 10.0);
  const Estimate smooth = coulomb_repulsion(ctx().psi_r, ctx().psi_r, r, 1 << 17, 7);
  const Estimate full = coulomb_repulsion_6d(ctx().psi_r, ctx().psi_r, r, 1 << 20, 8);
  EXPECT_LT(std::abs(smooth.value - full.value), 4.0 * std::hypot(smooth.error, full.error) + 1e-3 * full.value);
}

TEST(Coulomb, CombinationDecaysFasterThanMonopole) {
  std::vector<double> lr, lw;
  for (double nm : {10.0, 12.0, 15.0}) {
    const CoulombSet s = coulomb_set(*ctx().charge_r, *ctx().charge_g, along(2, nm), 1 << 17, 9);
    ASSERT_GT(std::abs(s.combination.value), 3.0 * s.combination.error) << nm;
    lr.push_back(std::log(nm));
    lw.push_back(std::log(std::abs(s.combination.value)));
  }
  EXPECT_LT(slope(lr, lw), -1.0);
}

TEST(Coulomb, CombinationIsExactOnSharedSamples) {
  const CoulombSet s = coulomb_set(*ctx().charge_r, *ctx().charge_g, along(0, 11.0), 1 << 14, 10);
  EXPECT_NEAR(s.combination.value, s.rr.value - 2.0 * s.rg.value + s.gg.value, 1e-12);
}

TEST(Coulomb, QuadruplingSamplesHalvesTheError) {
  const Eigen::Vector3d r = along(2, 10.0);
  const Estimate a = coulomb_repulsion(ctx().psi_r, ctx().psi_g, r, 1 << 16, 11);
  const Estimate b = coulomb_repulsion(ctx().psi_r, ctx().psi_g, r, 1 << 18, 12);
  EXPECT_NEAR(b.error / a.error, 0.5, 0.15);
}

// ---------------------------------------------------------------------------
// Exchange

TEST(Exchange, IsFerromagneticAndHalvesWithQuadrupledSamples) {
  const Eigen::Vector3d r = along(0, 10.0);
  const Estimate a = exchange(ctx().psi_r, ctx().psi_r, r, 1 << 15, 13);
  const Estimate b = exchange(ctx().psi_r, ctx().psi_r, r, 1 << 17, 14);
  EXPECT_GT(a.value, 0.0);
  EXPECT_GT(b.value, 0.0);
  EXPECT_NEAR(b.error / a.error, 0.5, 0.15);
}

TEST(Exchange, DecaysExponentiallyPerpendicularToThePolarization) {
  std::vector<double> rs, lj;
  for (double nm = 8.0; nm <= 15.0; nm += 1.0) {
    const Estimate j = exchange(ctx().psi_r, ctx().psi_r, along(0, nm), 1 << 16, 15);
    ASSERT_GT(j.value, 5.0 * j.error) << nm;
    rs.push_back(nm);
    lj.push_back(std::log(j.value));
  }
  const double b = slope(rs, lj);
  EXPECT_LT(b, 0.0);
  // Straight line on the log-linear plot.
  const double mx = std::accumulate(rs.begin(), rs.end(), 0.0) / rs.size();
  const double my = std::accumulate(lj.begin(), lj.end(), 0.0) / lj.size();
  double ss = 0, res = 0;
  for (std::size_t k = 0; k < rs.size(); ++k) {
    ss += (lj[k] - my) * (lj[k] - my);
    res += std::pow(lj[k] - my - b * (rs[k] - mx), 2);
  }
  EXPECT_GT(1.0 - res / ss, 0.98);
}

TEST(Exchange, OscillatesAlongThePolarizationOnly) {
  // Across one valley period pi/k0 the z-direction exchange swings strongly;
  // in the perpendicular direction it only follows the envelope.
  const double k0 = ctx().psi_r.valley_wavevector;
  auto spread = [&](int axis) {
    double lo = 1e300, hi = 0;
    for (int k = 0; k <= 6; ++k) {
      Eigen::Vector3d r = along(axis, 10.0);
      r(axis) += k * M_PI / k0 / 6.0;
      const Estimate j = exchange(ctx().psi_r, ctx().psi_r, r, 1 << 15, 16);
      lo = std::min(lo, j.value);
      hi = std::max(hi, j.value);
    }
    return (hi - lo) / hi;
  };
  EXPECT_GT(spread(2), 0.3);
  EXPECT_LT(spread(0), 0.1);
}

// ---------------------------------------------------------------------------
// Dipole channels

TEST(InducedDipole, AngularLaw) {
  const Eigen::Vector3d p(0, 0, 1.3);
  const double par = induced_dipole(p, p, Eigen::Vector3d(0, 0, 3.0));
  const double perp = induced_dipole(p, p, Eigen::Vector3d(3.0, 0, 0));
  EXPECT_DOUBLE_EQ(par / perp, -2.0);
  EXPECT_NEAR(induced_dipole(p, p, Eigen::Vector3d(0, 0, 6.0)), par / 8.0, 1e-15);
  const double c = 1.0 / std::sqrt(3.0), s = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(induced_dipole(p, p, 3.0 * Eigen::Vector3d(s, 0, c)), 0.0, 1e-15);
  for (double t = 0.0; t < M_PI; t += 0.1) {
    const Eigen::Vector3d n(std::sin(t), 0, std::cos(t));
    EXPECT_NEAR(induced_dipole(p, p, 3.0 * n), p.squaredNorm() * (1 - 3 * std::cos(t) * std::cos(t)) / 27.0, 1e-14);
  }
  EXPECT_THROW(induced_dipole(p, p, Eigen::Vector3d::Zero()), ZeroSeparation);
}

TEST(VanDerWaals, FallsOffAsInverseSixthPower) {
  const Catalog& cat = fixtures::phosphorus();
  std::vector<double> lr, lv;
  for (double nm : {20.0, 25.0, 30.0, 40.0}) {
    const double v = van_der_waals(cat, cat.rydberg(), along(2, nm), 0.01 / cat.hartree_meV);
    lr.push_back(std::log(nm));
    lv.push_back(std::log(std::abs(v)));
  }
  EXPECT_NEAR(slope(lr, lv), -6.0, 0.2);
}

TEST(VanDerWaals, TruncationFortyToThirtyStates) {
  const Catalog c40 = truncated(40), c30 = truncated(30);
  const Eigen::Vector3d r = along(2, 12.0);
  const double v40 = van_der_waals(c40, c40.rydberg(), r, 0.01 / c40.hartree_meV);
  const double v30 = van_der_waals(c30, c30.rydberg(), r, 0.01 / c30.hartree_meV);
  EXPECT_LT(std::abs(v30 - v40) / std::abs(v40), 0.05);
}

TEST(VanDerWaals, GroundPairIsNegative) {
  const Catalog& cat = fixtures::phosphorus();
  for (int axis : {0, 2}) EXPECT_LT(van_der_waals(cat, cat.ground(), along(axis, 10.0), 1e-6), 0.0);
}

TEST(VanDerWaals, DegenerateTermsAreCounted) {
  const Catalog& cat = fixtures::phosphorus();
  int excluded = -1;
  van_der_waals(cat, cat.rydberg(), along(2, 10.0), 0.01 / cat.hartree_meV, &excluded);
  EXPECT_GE(excluded, 0);
  int none = -1;
  van_der_waals(cat, cat.rydberg(), along(2, 10.0), 0.0, &none);
  EXPECT_EQ(none, 0);
}

// ---------------------------------------------------------------------------
// Assembled interaction

TEST(Total, AssemblesTheChannels) {
  InteractionOptions o;
  o.samples = 1 << 15;
  const auto off = total_interaction(pair_at({0, 0, 11.0}), ctx(), o);
  EXPECT_FALSE(off.field_on);
  EXPECT_DOUBLE_EQ(off.total_u, off.w_combination - off.j_rr + off.v_vdw_rr);
  EXPECT_NEAR(off.w_combination, off.w_rr - 2 * off.w_rg + off.w_gg, 1e-9);
  const auto on = total_interaction(pair_at({0, 0, 11.0}, 0.18), ctx(), o);
  EXPECT_TRUE(on.field_on);
  EXPECT_DOUBLE_EQ(on.total_u, on.v_dd_rr - on.j_rr + on.v_vdw_rr);
  EXPECT_LT(on.v_dd_rr, 0.0);  // collinear induced dipoles attract
  for (double e : {on.mc_errors.w_rr, on.mc_errors.w_rg, on.mc_errors.w_gg, on.mc_errors.j_rr}) EXPECT_GT(e, 0.0);
}

TEST(Total, InducedDipoleUsesTheDifferenceOfPolarizabilities) {
  const double f = EffectiveAtomicUnits().field_to_atomic(0.18);
  const Eigen::Vector3d dp = (ctx().alpha_r - ctx().alpha_g) * Eigen::Vector3d(0, 0, f);
  InteractionOptions o;
  o.samples = 1 << 12;
  const auto b = total_interaction(pair_at({0, 0, 12.0}), ctx(), o);
  const auto on = total_interaction(pair_at({0, 0, 12.0}, 0.18), ctx(), o);
  EXPECT_EQ(b.v_dd_rr, 0.0);
  EXPECT_NEAR(on.v_dd_rr, induced_dipole(dp, dp, along(2, 12.0)) * mev(), 1e-12);
}

TEST(Total, GroundPairIsNegligibleAtZeroField) {
  InteractionContext g = ctx();
  g.rydberg = g.ground;
  g.psi_r = g.psi_g;
  g.charge_r = g.charge_g;
  g.alpha_r = g.alpha_g;
  InteractionOptions o;
  o.samples = 1 << 15;
  const auto b = total_interaction(pair_at({0, 0, 15.0}), g, o);
  EXPECT_EQ(b.w_combination, 0.0);
  EXPECT_LT(std::abs(b.total_u), 1e-3);
}

TEST(Total, GuardIsEnforced) {
  EXPECT_THROW(total_interaction(pair_at({0, 0, 5.0}), ctx()), GuardViolation);
  EXPECT_THROW(total_interaction(pair_at({0, 0, 0.0}), ctx()), GuardViolation);
}

TEST(Total, SeleniumTripletIsExchangeDominated) {
  const Catalog& se = fixtures::catalog("Se+", "1sT2");
  const InteractionContext sctx = InteractionContext::make(se);
  InteractionOptions o;
  o.samples = 1 << 15;
  for (double nm : {4.0, 6.0}) {
    DonorPairGeometry g;
    g.guard_nm = 2.0;
    g.displacement_nm = Eigen::Vector3d(nm, 0, 0);
    g.field_V_per_um = Eigen::Vector3d(0, 0, 8.0);
    const auto b = total_interaction(g, sctx, o);
    EXPECT_GT(b.j_rr, 10.0 * (std::abs(b.v_dd_rr) + std::abs(b.v_vdw_rr))) << nm;
  }
}

// ---------------------------------------------------------------------------
// Maps

TEST(Map, SymmetricMaskedAndThreadIndependent) {
  InteractionOptions o;
  o.samples = 1 << 12;
  DonorPairGeometry base = pair_at({0, 0, 0}, 0.18);
  const auto m1 = interaction_map("xz", 14.0, 7, base, ctx(), o, 1);
  const auto m2 = interaction_map("xz", 14.0, 7, base, ctx(), o, 3);
  const int n = m1.n();
  int masked = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      ASSERT_EQ(m1.is_masked(i, j), m1.is_masked(n - 1 - i, n - 1 - j));
      EXPECT_EQ(m1.is_masked(i, j), std::hypot(m1.coords[i], m1.coords[j]) < 8.0);
      masked += m1.is_masked(i, j);
      if (m1.is_masked(i, j)) continue;
      EXPECT_EQ(m1.at(i, j).total_u, m1.at(n - 1 - i, n - 1 - j).total_u);
      EXPECT_EQ(m1.at(i, j).total_u, m2.at(i, j).total_u);
    }
  EXPECT_GT(masked, 0);
}

TEST(Map, AxisCutMatchesOneDimensionalCurve) {
  InteractionOptions o;
  o.samples = 1 << 14;
  DonorPairGeometry base = pair_at({0, 0, 0}, 0.18);
  const auto m = interaction_map("xz", 12.0, 5, base, ctx(), o, 1);
  const int mid = m.n() / 2;
  for (int j = 0; j < m.n(); ++j) {
    if (m.is_masked(mid, j)) continue;
    o.seed = 777 + j;
    const auto b = total_interaction(pair_at({0, 0, m.coords[j]}, 0.18), ctx(), o);
    const double err = std::hypot(b.mc_errors.j_rr, m.at(mid, j).mc_errors.j_rr);
    EXPECT_LT(std::abs(b.total_u - m.at(mid, j).total_u), 4.0 * err + 1e-9) << m.coords[j];
  }
}

TEST(Map, BadArgumentsRaiseConfigErrors) {
  EXPECT_THROW(plane_axes("xx"), ConfigError);
  EXPECT_THROW(plane_axes("xw"), ConfigError);
  EXPECT_THROW(interaction_map("xz", 10.0, 1, DonorPairGeometry{}, ctx()), ConfigError);
}
