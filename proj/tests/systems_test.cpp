#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "morse/errors.hpp"
#include "morse/flow.hpp"
#include "morse/systems.hpp"
#include "oracles.hpp"

using namespace morse;

namespace {

MatrixXd diag(std::initializer_list<double> d) {
  VectorXd v(d.size());
  int i = 0;
  for (double x : d) v[i++] = x;
  return v.asDiagonal();
}

MorseSturm constant_ms(const MatrixXd& g, const MatrixXd& r, double a, double b, InitialData init) {
  return MorseSturm{a, b, g, [r](double) { return r; }, std::move(init)};
}

Eigen::Vector2d vec2(double x, double y) { return Eigen::Vector2d(x, y); }

}  // namespace

TEST(ToSymplectic, ScalarOscillator) {
  auto sys = to_symplectic(constant_ms(diag({1}), diag({-1}), 0, 1, InitialData::zero(1)));
  EXPECT_DOUBLE_EQ(sys.coeffs.A(0.3)(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(sys.coeffs.B(0.3)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(sys.coeffs.C(0.3)(0, 0), -1.0);
}

TEST(ToSymplectic, ProductBlocks) {
  auto sys = to_symplectic(constant_ms(diag({1, -1}), diag({-1, -1}), 0, 1, InitialData::zero(2)));
  EXPECT_EQ(sys.coeffs.B(0.0), diag({1, -1}));
  EXPECT_EQ(sys.coeffs.C(0.0), diag({-1, 1}));
}

TEST(ToSymplectic, SolutionsCorrespond) {
  // v = (sin t, cosh t) solves v'' = R v for R = diag(-1, 1) with any g
  // making R g-symmetric; (v, g v') must solve the first-order system.
  MatrixXd g = diag({1, -1}), r = diag({-1, 1});
  auto sys = to_symplectic(constant_ms(g, r, 0, 2, InitialData::zero(2)));
  for (double t : {0.1, 0.7, 1.9}) {
    VectorXd v = vec2(std::sin(t), std::cosh(t)), dv = vec2(std::cos(t), std::sinh(t));
    VectorXd ddv = vec2(-std::sin(t), std::cosh(t));
    VectorXd alpha = alpha_of(sys.coeffs, t, v, dv);
    EXPECT_LT((alpha - g * dv).norm(), 1e-14);
    VectorXd state(4), dstate(4);
    state << v, alpha;
    dstate << dv, g * ddv;
    EXPECT_LT((sys.coeffs.generator(t) * state - dstate).norm(), 1e-12);
  }
}

TEST(ToSymplectic, RejectsNonGSymmetricR) {
  MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  EXPECT_THROW(to_symplectic(constant_ms(diag({1, -1}), swap, 0, 1, InitialData::zero(2))), Error);
}

TEST(ToSymplectic, RejectsDegenerateInitialGate) {
  // g(e1 + e2, e1 + e2) = 0, so B(a)^-1 = g is degenerate on P.
  InitialData init{Subspace(vec2(1, 1)), MatrixXd::Zero(1, 1)};
  EXPECT_THROW(to_symplectic(constant_ms(diag({1, -1}), diag({0, 0}), 0, 1, init)), Error);
}

TEST(AlphaOf, Examples) {
  CoefficientPath c;
  c.n = 2;
  c.A = [](double) { return MatrixXd::Zero(2, 2).eval(); };
  c.B = [](double) { return MatrixXd::Identity(2, 2).eval(); };
  c.C = c.A;
  VectorXd v0 = vec2(0.3, -2.0);
  EXPECT_LT((alpha_of(c, 0.5, 0.5 * v0, v0) - v0).norm(), 1e-15);
  EXPECT_EQ(alpha_of(c, 0.5, VectorXd::Zero(2), VectorXd::Zero(2)), VectorXd::Zero(2));
}

TEST(InitialData, FrameIsLagrangianAndRoundTrips) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4, p = trial % (n + 1);
    MatrixXd pb = oracle::random_matrix(rng, n, p);
    MatrixXd s = oracle::random_symmetric(rng, p);
    InitialData d{p ? Subspace(pb) : Subspace::zero(n), p ? s : MatrixXd(0, 0)};
    LagrangianFrame l = d.frame();
    EXPECT_LT(l.isotropy_residual(), 1e-9);
    // Every (v, alpha) in l0 has v in P and alpha|P = -S(v, .).
    for (int j = 0; j < n; ++j) {
      VectorXd v = l.x().col(j), alpha = l.y().col(j);
      if (p == 0) {
        EXPECT_LT(v.norm(), 1e-12);
        continue;
      }
      VectorXd coords = pb.colPivHouseholderQr().solve(v);
      EXPECT_LT((pb * coords - v).norm(), 1e-9);
      EXPECT_LT((pb.transpose() * alpha + s * coords).norm(), 1e-9);
    }
    InitialData back = InitialData::from_lagrangian(l);
    EXPECT_EQ(intersection_dim(back.frame(), l), n);
  }
}

TEST(Distribution, ValidationCatchesWrongFrames) {
  auto sys = to_symplectic(constant_ms(diag({1, -1}), diag({-1, -1}), 0, 1, InitialData::zero(2)));
  EXPECT_NO_THROW(validate_distribution(sys, Distribution::constant(vec2(0, 1))));
  EXPECT_THROW(validate_distribution(sys, Distribution::constant(vec2(1, 0))), Error);
  EXPECT_THROW(validate_distribution(sys, Distribution::empty(2)), Error);
  Distribution vanishing;
  vanishing.k = 1;
  vanishing.Y = [](double t) { return MatrixXd(Eigen::Vector2d(t - 0.5, 0.0)); };
  EXPECT_THROW(validate_distribution(sys, vanishing), Error);
}

TEST(Reduced, ProductGivesHarmonicOscillator) {
  auto sys = to_symplectic(constant_ms(diag({1, -1}), diag({-1, -1}), 0, 1, InitialData::zero(2)));
  auto d = Distribution::constant(vec2(0, 1));
  auto r = reduced_coefficients(sys, d, 0.4);
  EXPECT_NEAR(r.calB(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(r.calC(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(r.calI(0, 0), 1.0, 1e-15);
  auto red = reduced_system(sys, d);
  EXPECT_NEAR(red.coeffs.A(0.4)(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(red.coeffs.B(0.4)(0, 0), 1.0, 1e-15);  // positive definite
  EXPECT_NEAR(red.coeffs.C(0.4)(0, 0), -1.0, 1e-15);
  EXPECT_EQ(red.init.P.dim(), 0);
  auto crit = criterion_semidefinite(sys, d);
  EXPECT_FALSE(crit.holds);
  EXPECT_NEAR(crit.min_eig_reduced, -1.0, 1e-12);
}

TEST(Reduced, LorentzianFlatDirection) {
  auto sys = to_symplectic(constant_ms(diag({1, -1}), diag({-1, 0}), 0, 1, InitialData::zero(2)));
  auto d = Distribution::constant(vec2(0, 1));
  auto r = reduced_coefficients(sys, d, 0.2);
  EXPECT_NEAR(r.calI(0, 0), 0.0, 1e-15);
  EXPECT_TRUE(criterion_semidefinite(sys, d).holds);
  auto fs = integrate(reduced_system(sys, d), IntegrationOptions{});
  EXPECT_TRUE(focal_instants(fs).empty());
}

TEST(Reduced, NegativeSemidefiniteCurvatureParallelFrame) {
  // gR = diag(0, -1) is negative semidefinite.
  auto sys = to_symplectic(constant_ms(diag({1, -1}), diag({0, 1}), 0, 3, InitialData::zero(2)));
  auto crit = criterion_semidefinite(sys, Distribution::constant(vec2(0, 1)));
  EXPECT_TRUE(crit.holds);
  EXPECT_TRUE(crit.reduced_form_psd);
}

TEST(Reduced, AlternativeFormWithSymmetricC) {
  // Y(t) = (0, 1 + t): calC = alpha_Y(Y) = g(Y', Y) is symmetric, so the
  // alternative system is f' = calB^-1 phi, phi' = (calI - Cs') f.
  auto sys = to_symplectic(constant_ms(diag({1, -1}), diag({-1, -1}), 0, 1, InitialData::zero(2)));
  Distribution d;
  d.k = 1;
  d.Y = [](double t) { return MatrixXd(Eigen::Vector2d(0, 1 + t)); };
  d.dY = [](double) { return MatrixXd(Eigen::Vector2d(0, 1)); };
  auto alt = alt_reduced_system(sys, d);
  const double t = 0.3, y = 1 + t;
  // calB = -y^2, calC = -y, Cs' = -1, calI = -1 + y^2.
  EXPECT_NEAR(alt.coeffs.A(t)(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(alt.coeffs.B(t)(0, 0), -1.0 / (y * y), 1e-12);
  EXPECT_NEAR(alt.coeffs.C(t)(0, 0), (-1 + y * y) - (-1.0), 1e-6);
}

TEST(Reduced, AlternativeFormMatchesFocalDataUpToSign) {
  auto sys = to_symplectic(constant_ms(diag({1, -1}), diag({-1, -1}), 0, 4, InitialData::zero(2)));
  auto d = Distribution::constant(vec2(0, 1));
  auto red = focal_instants(integrate(reduced_system(sys, d)));
  auto alt = focal_instants(integrate(alt_reduced_system(sys, d)));
  auto alt_neg = focal_instants(integrate(negate_momentum(alt_reduced_system(sys, d))));
  ASSERT_EQ(red.size(), 1u);
  ASSERT_EQ(alt.size(), 1u);
  ASSERT_EQ(alt_neg.size(), 1u);
  EXPECT_NEAR(red[0].t, M_PI, 1e-8);
  EXPECT_NEAR(alt[0].t, red[0].t, 1e-7);
  EXPECT_EQ(alt[0].multiplicity, red[0].multiplicity);
  EXPECT_EQ(alt[0].signature, -red[0].signature);
  EXPECT_EQ(alt_neg[0].signature, red[0].signature);
}

TEST(Reduced, JacobiFrameSatisfiesAlternativeCriterion) {
  // Y is the Jacobi field with Y(0) = e2, Y'(0) = 0 of R = [[-1, s], [-s, 1]].
  MatrixXd g = diag({1, -1}), r(2, 2);
  r << -1, 0.2, -0.2, 1;
  auto sys = to_symplectic(constant_ms(g, r, 0, 2, InitialData::zero(2)));
  SystemData jac = sys;
  jac.init = InitialData::whole(2);
  auto fs = std::make_shared<FundamentalSolution>(jac, IntegrationOptions{});
  VectorXd start(4);
  start << 0, 1, 0, 0;
  Distribution d;
  d.k = 1;
  d.Y = [fs, start](double t) { return MatrixXd(fs->psi_at(t).topRows(2) * start); };
  d.dY = [fs, start, g](double t) { return MatrixXd(g.inverse() * fs->psi_at(t).bottomRows(2) * start); };
  auto crit = criterion_semidefinite(sys, d);
  EXPECT_TRUE(crit.holds);
  EXPECT_TRUE(crit.alternative_form_psd);
  EXPECT_TRUE(focal_instants(integrate(reduced_system(sys, d))).empty());
}

TEST(Isomorphism, IdentityAndConstant) {
  auto sys = to_symplectic(constant_ms(diag({1}), diag({-1}), 0, 1, InitialData::zero(1)));
  L0Isomorphism id;
  id.Z = [](double) { return MatrixXd::Identity(1, 1).eval(); };
  id.W = [](double) { return MatrixXd::Zero(1, 1).eval(); };
  auto same = apply_isomorphism(sys, id);
  for (double t : {0.0, 0.5, 1.0}) EXPECT_LT(max_abs(same.coeffs.generator(t) - sys.coeffs.generator(t)), 1e-9);

  SystemData zero = sys;
  zero.coeffs.C = [](double) { return MatrixXd::Zero(1, 1).eval(); };
  zero.coeffs.B = [](double) { return MatrixXd::Identity(1, 1).eval(); };
  L0Isomorphism c;
  c.Z = [](double) { return MatrixXd::Constant(1, 1, 2.0); };
  c.W = [](double) { return MatrixXd::Constant(1, 1, 0.5); };
  auto moved = apply_isomorphism(zero, c);
  MatrixXd p = c.matrix(0.0);
  EXPECT_LT(max_abs(moved.coeffs.generator(0.5) - p * zero.coeffs.generator(0.5) * p.inverse()), 1e-8);
}

TEST(Isomorphism, IsSymplecticAndPreservesL0) {
  L0Isomorphism phi;
  phi.Z = [](double t) {
    MatrixXd z(2, 2);
    z << 1 + 0.3 * t, 0.2, -0.1 * t, 1.5;
    return z;
  };
  phi.W = [](double t) {
    MatrixXd w(2, 2);
    w << t, 0.4, 0.4, -t * t;
    return w;
  };
  MatrixXd j = oracle::j_matrix(2);
  for (double t : {0.0, 0.7, 1.3}) {
    MatrixXd m = phi.matrix(t);
    EXPECT_LT(max_abs(m.transpose() * j * m - j), 1e-12);
    EXPECT_LT(max_abs(m.topRightCorner(2, 2)), 1e-15);
  }
}

TEST(Isomorphism, SolutionsTransformWithPhi0) {
  auto sys = to_symplectic(constant_ms(diag({1}), diag({-1}), 0, 4, InitialData::zero(1)));
  L0Isomorphism phi;
  phi.Z = [](double t) { return MatrixXd::Constant(1, 1, 1.0 + 0.5 * std::sin(t)); };
  phi.W = [](double t) { return MatrixXd::Constant(1, 1, 0.3 * t * t); };
  auto moved = apply_isomorphism(sys, phi);
  auto fs = integrate(sys), ft = integrate(moved);
  MatrixXd p0inv = phi.matrix(0.0).inverse();
  for (double t : {0.4, 1.1, 2.0, 3.9}) {
    MatrixXd expect = phi.matrix(t) * fs.psi_at(t) * p0inv;
    EXPECT_LT(max_abs(ft.psi_at(t) - expect), 1e-6) << "t=" << t;
  }
  auto a = focal_instants(fs), b = focal_instants(ft);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].t, b[i].t, 1e-7);
    EXPECT_EQ(a[i].signature, b[i].signature);
  }
}

TEST(Differentiate, CentralAndOneSided) {
  MatrixFn f = [](double t) { return MatrixXd::Constant(1, 1, t * t * t); };
  EXPECT_NEAR(differentiate(f, 0.5, 1e-4, 0, 1)(0, 0), 0.75, 1e-7);
  EXPECT_NEAR(differentiate(f, 0.0, 1e-4, 0, 1)(0, 0), 0.0, 1e-7);
  EXPECT_NEAR(differentiate(f, 1.0, 1e-4, 0, 1)(0, 0), 3.0, 1e-7);
}
