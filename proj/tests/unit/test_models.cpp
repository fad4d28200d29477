#include "ipsukf/chain_model.hpp"
#include "ipsukf/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ipsukf;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

ChainModel linear3(ObservationLayout layout = ObservationLayout::full()) {
  return build_linear_chain({v({1, 1, 1}), v({0.25, 0.5, 0.75}), v({9, 11, 13}), {}, {}, layout});
}

ChainModel duffing(ObservationLayout layout = ObservationLayout::full()) {
  return build_duffing_chain(
      {v({1, 1}), v({0.5, 0.5}), v({3, 4.5}), v({15, 27}), {}, {}, {}, layout});
}

}  // namespace

TEST(ChainAssembly, LinearThreeStory) {
  const StructuralMatrices s = linear3().nominal().matrices();
  EXPECT_EQ(s.stiffness.row(0), v({20, -11, 0}).transpose());
  EXPECT_EQ(s.damping.row(1), v({-0.5, 1.25, -0.75}).transpose());
  EXPECT_EQ(s.stiffness, oracle::chain(v({9, 11, 13})));
  EXPECT_EQ(s.damping, oracle::chain(v({0.25, 0.5, 0.75})));
  EXPECT_TRUE(s.cubic.isZero(0.0));
}

TEST(ChainAssembly, DuffingTwoStory) {
  const StructuralMatrices s = duffing().nominal().matrices();
  Matrix E(2, 2), K(2, 2);
  E << 15, -27, 0, 27;
  K << 7.5, -4.5, -4.5, 4.5;
  EXPECT_EQ(s.cubic, E);
  EXPECT_EQ(s.stiffness, K);
}

TEST(ChainAssembly, CubicForceAtOneTwo) {
  const StructuralMatrices s = duffing().nominal().matrices();
  const Vector d = cubic_deformations(v({1, 2}));
  EXPECT_EQ(d, v({1, 1}));
  EXPECT_EQ(s.cubic * d, v({-12, 27}));
}

TEST(ChainAssembly, SingleDof) {
  const ChainModel m = build_linear_chain({v({2}), v({0.3}), v({5}), {}, {}, {}});
  Vector z(4);
  z << 0.1, -0.4, 0.3, 5.0;  // x, xd, c, k
  const Vector a = m.acceleration(z, v({1.5}));
  EXPECT_NEAR(a(0), (1.5 - 0.3 * -0.4 - 5.0 * 0.1) / 2.0, 1e-15);
}

TEST(ChainModel, ForceFreeEulerStep) {
  const ChainModel m = build_linear_chain({v({1, 1}), v({0, 0}), v({0, 0}), {}, {}, {}});
  Vector z(8);
  z << 0.1, 0.2, 1.0, -2.0, 0.0, 0.0, 0.0, 0.0;  // c1 c2 k1 k2 all zero
  const Vector next = m.transition(z, Vector::Zero(2), 0.01);
  EXPECT_DOUBLE_EQ(next(0), 0.1 + 0.01 * 1.0);
  EXPECT_DOUBLE_EQ(next(1), 0.2 - 0.01 * 2.0);
  EXPECT_EQ(next.segment(2, 2), z.segment(2, 2));
  EXPECT_EQ(next.tail(4), z.tail(4));
}

TEST(ChainModel, ZeroCubicMatchesLinear) {
  const ChainModel lin = build_linear_chain({v({1, 2}), v({0.5, 0.2}), v({3, 4.5}), {}, {}, {}});
  const ChainModel duf = build_duffing_chain({v({1, 2}), v({0.5, 0.2}), v({3, 4.5}), v({0, 0}),
                                              {}, {}, {false, false}, {}});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> r(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    Vector state(4);
    for (int i = 0; i < 4; ++i) state(i) = r(rng);
    Vector zl(8);
    zl << state, lin.nominal_parameters();
    const Vector u = v({r(rng), r(rng)});
    ASSERT_EQ(duf.state_dim(), 8);
    EXPECT_EQ(lin.transition(zl, u, 0.01), duf.transition(zl, u, 0.01));
    EXPECT_EQ(lin.observe(zl, u), duf.observe(zl, u));
    const Vector a = lin.acceleration(zl, u);
    EXPECT_EQ(lin.recover_input(a, zl), duf.recover_input(a, zl));
  }
}

TEST(ChainModel, ParameterOrderAndNames) {
  const ChainModel m = duffing();
  std::vector<std::string> names;
  for (const auto& s : m.parameter_slots()) names.push_back(s.name());
  EXPECT_EQ(names, (std::vector<std::string>{"c1", "c2", "k1", "k2", "e1", "e2"}));
  EXPECT_EQ(m.nominal_parameters(), v({0.5, 0.5, 3, 4.5, 15, 27}));
  EXPECT_TRUE(m.nonlinear());
}

TEST(ChainModel, PartialEstimation) {
  const ChainModel m = build_linear_chain(
      {v({1, 1, 1}), v({0.25, 0.5, 0.75}), v({9, 11, 13}), {false, true, false}, {}, {}});
  EXPECT_EQ(m.n_params(), 4);
  Vector z = Vector::Zero(10);
  z.tail(4) << 0.6, 1, 2, 3;
  const ChainProperties p = m.properties_from(z);
  EXPECT_EQ(p.damping, v({0.25, 0.6, 0.75}));
  EXPECT_EQ(p.stiffness, v({1, 2, 3}));
}

TEST(ChainModel, RejectsWrongStateSize) {
  const ChainModel m = build_linear_chain({v({1, 1}), v({0, 0}), v({0, 0}), {}, {}, {}});
  EXPECT_THROW(m.transition(Vector::Zero(6), Vector::Zero(2), 0.01), ConfigError);
  EXPECT_THROW(m.recover_input(Vector::Zero(2), Vector::Zero(9)), ConfigError);
}

TEST(ChainModel, RejectsBadSpecs) {
  EXPECT_THROW(build_linear_chain({v({1, 0}), v({1, 1}), v({1, 1}), {}, {}, {}}), ConfigError);
  EXPECT_THROW(build_linear_chain({v({1, 1}), v({1}), v({1, 1}), {}, {}, {}}), ConfigError);
  EXPECT_THROW(build_linear_chain({v({1, 1}), v({1, 1}), v({1, 1}), {true}, {}, {}}),
               ConfigError);
  EXPECT_THROW(build_linear_chain({v({1}), v({1}), v({1}), {}, {}, {true, true, false}}),
               ConfigError);
}

TEST(ObservationLayout, Dimensions) {
  EXPECT_EQ(ObservationLayout::full().dimension(3), 9);
  EXPECT_EQ(ObservationLayout::acceleration_only().dimension(2), 2);
  EXPECT_EQ(ObservationLayout::no_displacement().acceleration_offset(2), 2);
  EXPECT_EQ(ObservationLayout::no_velocity().acceleration_offset(2), 2);
  EXPECT_EQ(ObservationLayout::full().acceleration_offset(3), 6);
  EXPECT_EQ((ObservationLayout{true, true, false}).acceleration_offset(3), -1);
}

TEST(ObservationLayout, FullVectorOrdering) {
  const ChainModel m = linear3();
  Vector z(12);
  z << 1, 2, 3, 4, 5, 6, m.nominal_parameters();
  const Vector u = v({0.5, -1, 2});
  const Vector y = m.observe(z, u);
  ASSERT_EQ(y.size(), 9);
  EXPECT_EQ(y.head(6), z.head(6));
  EXPECT_EQ(y.tail(3), m.acceleration(z, u));
}

TEST(ObservationLayout, ReducedLayoutsDropGroups) {
  const ChainModel full = duffing();
  Vector z(10);
  z << 0.1, -0.2, 0.3, 0.4, full.nominal_parameters();
  const Vector u = v({0, 1});
  const Vector a = full.acceleration(z, u);
  EXPECT_EQ(observe(full, z, u, ObservationLayout::acceleration_only()), a);
  Vector nd(4);
  nd << 0.3, 0.4, a;
  EXPECT_EQ(observe(full, z, u, ObservationLayout::no_displacement()), nd);
  Vector nv(4);
  nv << 0.1, -0.2, a;
  EXPECT_EQ(observe(full, z, u, ObservationLayout::no_velocity()), nv);
  EXPECT_EQ(full.with_layout(ObservationLayout::no_velocity()).observe(z, u), nv);
}

TEST(ObservationLayout, BalancedForceGivesZeroAcceleration) {
  const ChainModel m = duffing();
  Vector z(10);
  z << 0.3, -0.1, 0.2, 0.5, m.nominal_parameters();
  const StructuralMatrices s = m.nominal().matrices();
  const Vector u = s.restoring_force(z.head(2), z.segment(2, 2));
  EXPECT_LT(m.observe(z, u).tail(2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ObservationLayout, ModelWithoutAccelerationsRejected) {
  EXPECT_THROW(linear3({true, true, false}), ConfigError);
}

TEST(InputFrame, MaskRules) {
  InputFrame f{v({5, 7}), {true, false}, v({0, 0})};
  EXPECT_EQ(apply_known_mask(f).values, v({0, 7}));
  f.known_mask = {false, false};
  EXPECT_EQ(apply_known_mask(f).values, v({5, 7}));
  f.known_mask = {true, true};
  f.known_values = v({1, 2});
  EXPECT_EQ(apply_known_mask(f).values, v({1, 2}));
  EXPECT_TRUE(apply_known_mask(f).satisfies_mask());
  f.known_mask = {true};
  EXPECT_THROW(apply_known_mask(f), ConfigError);
}
