#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "morse/errors.hpp"
#include "morse/index_fem.hpp"
#include "oracles.hpp"

using namespace morse;

namespace {

MatrixXd diag(std::initializer_list<double> d) {
  VectorXd v(d.size());
  int i = 0;
  for (double x : d) v[i++] = x;
  return v.asDiagonal();
}

SystemData ms(const MatrixXd& g, const MatrixXd& r, double a, double b, InitialData init) {
  return to_symplectic(MorseSturm{a, b, g, [r](double) { return r; }, std::move(init)});
}

const double kThreeHalfPi = 1.5 * M_PI;

SystemData riemannian(double b = kThreeHalfPi) { return ms(diag({1}), diag({-1}), 0.0, b, InitialData::zero(1)); }
SystemData product(double b = kThreeHalfPi) {
  return ms(diag({1, -1}), diag({-1, -1}), 0.0, b, InitialData::zero(2));
}
Distribution e2() { return Distribution::constant(Eigen::Vector2d(0, 1)); }

SystemData free_particle_1d() { return ms(diag({1}), diag({0}), 0.0, 1.0, InitialData::zero(1)); }

}  // namespace

TEST(Assemble, HatFunctionStiffness) {
  // One interior hat on [0, 1] with slope +-2: int (h')^2 = 4.
  auto sys = free_particle_1d();
  auto s2 = DiscreteSpace::fixed_end(Mesh(0, 1, 2), sys.init.P);
  MatrixXd f2 = assemble_index_form(sys, s2);
  ASSERT_EQ(f2.rows(), 1);
  EXPECT_NEAR(f2(0, 0), 4.0, 1e-14);
  // With m = 4 the slope is 4 and the support has length 1/2: 8.
  auto s4 = DiscreteSpace::fixed_end(Mesh(0, 1, 4), sys.init.P);
  MatrixXd f4 = assemble_index_form(sys, s4);
  ASSERT_EQ(f4.rows(), 3);
  EXPECT_NEAR(f4(1, 1), 8.0, 1e-14);
  EXPECT_NEAR(f4(0, 1), -4.0, 1e-14);
}

TEST(Assemble, MassTermExactForQuadratics) {
  // C = -1: int h^2 over two elements of width 1/2 is 2 * (1/2) / 3.
  auto sys = ms(diag({1}), diag({-1}), 0.0, 1.0, InitialData::zero(1));
  MatrixXd f = assemble_index_form(sys, DiscreteSpace::fixed_end(Mesh(0, 1, 2), sys.init.P));
  EXPECT_NEAR(f(0, 0), 4.0 - 1.0 / 3.0, 1e-14);
}

TEST(Assemble, EndFormAddsAtLastNode) {
  auto sys = free_particle_1d();
  auto space = DiscreteSpace::free_end(Mesh(0, 1, 4), sys.init.P);
  MatrixXd base = assemble_index_form(sys, space);
  MatrixXd theta = MatrixXd::Constant(1, 1, 2.5);
  MatrixXd with = assemble_index_form(sys, space, theta);
  MatrixXd diff = with - base;
  EXPECT_NEAR(diff(diff.rows() - 1, diff.cols() - 1), 2.5, 1e-14);
  diff(diff.rows() - 1, diff.cols() - 1) = 0;
  EXPECT_EQ(max_abs(diff), 0.0);
}

TEST(Assemble, InitialFormSubtracted) {
  InitialData init{Subspace::whole(1), MatrixXd::Constant(1, 1, 0.75)};
  auto sys = ms(diag({1}), diag({0}), 0.0, 1.0, init);
  auto space = DiscreteSpace::fixed_end(Mesh(0, 1, 2), sys.init.P);
  MatrixXd f = assemble_index_form(sys, space);
  ASSERT_EQ(f.rows(), 2);
  EXPECT_NEAR(f(0, 0), 2.0 - 0.75, 1e-14);
}

TEST(Assemble, JacobiFieldIsAsymptoticKernel) {
  // sin t on [0, pi] vanishes at both ends and solves v'' = -v.
  auto sys = riemannian(M_PI);
  double last = INFINITY;
  for (int m : {16, 32, 64, 128}) {
    auto space = DiscreteSpace::fixed_end(Mesh(0, M_PI, m), sys.init.P);
    MatrixXd f = assemble_index_form(sys, space);
    VectorXd c(m - 1);
    for (int j = 1; j < m; ++j) c[j - 1] = std::sin(space.mesh.nodes[j]);
    double res = (f * c).cwiseAbs().maxCoeff();
    EXPECT_LT(res, last / 4) << "m=" << m;
    last = res;
  }
}

TEST(SubspaceS, DimensionAndPointwiseMembership) {
  auto sys = product();
  auto space = DiscreteSpace::fixed_end(Mesh(0, kThreeHalfPi, 4), sys.init.P);
  MatrixXd s = build_S_subspace(e2(), space);
  EXPECT_EQ(s.cols(), 3);
  for (int j = 0; j < s.cols(); ++j)
    for (int node = 1; node < 4; ++node) EXPECT_EQ(s(space.offset(node), j), 0.0);
}

TEST(SubspaceS, ProductPositiveIndexAndReducedForm) {
  auto sys = product();
  for (int m : {16, 32, 64}) {
    auto space = DiscreteSpace::fixed_end(Mesh(0, kThreeHalfPi, m), sys.init.P);
    MatrixXd form = assemble_index_form(sys, space);
    MatrixXd s = build_S_subspace(e2(), space);
    Inertia on_s = SymForm(s.transpose() * form * s).inertia();
    EXPECT_EQ(on_s.n_plus, 1);
    EXPECT_EQ(on_s.dgn, 0);
    EXPECT_EQ(on_s.n_minus, s.cols() - 1);
    // The reduced system f'' = -f carries minus the same form on H^1_0.
    auto red = reduced_system(sys, e2());
    auto rspace = DiscreteSpace::fixed_end(Mesh(0, kThreeHalfPi, m), red.init.P);
    Inertia red_in = SymForm(assemble_index_form(red, rspace)).inertia();
    EXPECT_EQ(red_in.n_minus, on_s.n_plus);
  }
}

TEST(SubspaceK, TrivialDistributionGivesWholeSpace) {
  auto sys = riemannian();
  auto space = DiscreteSpace::fixed_end(Mesh(0, kThreeHalfPi, 8), sys.init.P);
  MatrixXd form = assemble_index_form(sys, space);
  MatrixXd k = build_K_subspace(form, build_S_subspace(Distribution::empty(1), space));
  EXPECT_EQ(k.cols(), space.dim());
}

TEST(SubspaceK, ProductKIsPositiveFactor) {
  auto sys = product();
  auto space = DiscreteSpace::fixed_end(Mesh(0, kThreeHalfPi, 32), sys.init.P);
  MatrixXd form = assemble_index_form(sys, space);
  MatrixXd s = build_S_subspace(e2(), space);
  MatrixXd k = build_K_subspace(form, s);
  EXPECT_EQ(k.cols() + s.cols(), space.dim());
  for (int node = 1; node < 32; ++node) EXPECT_LT(k.row(space.offset(node) + 1).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(max_abs(k.transpose() * form * s), 1e-8 * max_abs(form));
}

TEST(SubspaceK, DegenerateOnSThrows) {
  MatrixXd form = diag({1, 0});
  try {
    build_K_subspace(form, Eigen::Vector2d(0, 1));
    FAIL() << "expected degenerate form";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
  }
}

TEST(IndexTerms, Riemannian) {
  IndexReport r = index_terms(riemannian(), Distribution::empty(1));
  EXPECT_EQ(r.maslov, 1);
  EXPECT_EQ(r.n_minus_K, 1);
  EXPECT_EQ(r.n_plus_S, 0);
  EXPECT_EQ(r.n_minus_gP, 0);
  EXPECT_EQ(r.identity_residual, 0);
  EXPECT_TRUE(r.diagnostics.converged);
  EXPECT_EQ(r.diagnostics.dim_K + r.diagnostics.dim_S, r.diagnostics.dim_H);
}

TEST(IndexTerms, Product) {
  IndexReport r = index_terms(product(), e2());
  EXPECT_EQ(r.maslov, 0);
  EXPECT_EQ(r.n_minus_K, 1);
  EXPECT_EQ(r.n_plus_S, 1);
  EXPECT_EQ(r.n_minus_gP, 0);
  EXPECT_EQ(r.identity_residual, 0);
  ASSERT_TRUE(r.diagnostics.n_plus_S_reduced_flow.has_value());
  EXPECT_EQ(*r.diagnostics.n_plus_S_reduced_flow, r.n_plus_S);
  EXPECT_LE(r.diagnostics.orthogonality, 1e-8);
}

TEST(IndexTerms, InitialManifoldTermIsNeeded) {
  InitialData init{Subspace(Eigen::Vector2d(0, 1)), MatrixXd::Zero(1, 1)};
  auto sys = ms(diag({1, -1}), diag({0, 0}), 0.0, 1.0, init);
  IndexReport r = index_terms(sys, e2());
  EXPECT_EQ(r.maslov, 0);
  EXPECT_EQ(r.n_plus_S, 0);
  EXPECT_EQ(r.n_minus_gP, 1);
  // K contains (1 - t) e2, where I = int g(v', v') = -1.
  EXPECT_EQ(r.n_minus_K, 1);
  EXPECT_EQ(r.identity_residual, 0);
  EXPECT_NE(r.maslov, r.n_minus_K - r.n_plus_S);
}

TEST(VariableEndpoint, ClosedFormQTerm) {
  auto sys = free_particle_1d();
  IndexReport zero = variable_endpoint_terms(sys, Distribution::empty(1), Subspace::whole(1), MatrixXd::Zero(1, 1));
  ASSERT_TRUE(zero.q_term.has_value());
  EXPECT_EQ(*zero.q_term, 0);
  EXPECT_EQ(zero.identity_residual, 0);
  IndexReport neg =
      variable_endpoint_terms(sys, Distribution::empty(1), Subspace::whole(1), MatrixXd::Constant(1, 1, -2.0));
  EXPECT_EQ(*neg.q_term, 1);
  EXPECT_EQ(neg.identity_residual, 0);
  EXPECT_EQ(*neg.n_minus_JQ, 1);
}

TEST(VariableEndpoint, TrivialQReducesToFixedEnd) {
  IndexReport fixed = index_terms(riemannian(), Distribution::empty(1));
  IndexReport var = variable_endpoint_terms(riemannian(), Distribution::empty(1), Subspace::zero(1), MatrixXd(0, 0));
  EXPECT_EQ(*var.q_term, 0);
  EXPECT_EQ(var.n_minus_K, fixed.n_minus_K);
  EXPECT_EQ(var.identity_residual, 0);
}

TEST(VariableEndpoint, FocalEndpointRejected) {
  EXPECT_THROW(variable_endpoint_terms(riemannian(M_PI), Distribution::empty(1), Subspace::whole(1),
                                       MatrixXd::Zero(1, 1)),
               Error);
}

TEST(Profile, RiemannianJumpsAtConjugatePoint) {
  std::vector<double> times{0.5, 1.5, 2.5, 3.0, 3.3, 4.0, kThreeHalfPi};
  auto prof = index_profile(riemannian(), Distribution::empty(1), times);
  std::vector<int> expect{0, 0, 0, 0, 1, 1, 1};
  for (size_t i = 0; i < times.size(); ++i) {
    ASSERT_TRUE(prof[i].index.has_value());
    EXPECT_EQ(*prof[i].index, expect[i]) << "t=" << times[i];
  }
}

TEST(Profile, InitialManifoldConstant) {
  InitialData init{Subspace(Eigen::Vector2d(0, 1)), MatrixXd::Zero(1, 1)};
  auto sys = ms(diag({1, -1}), diag({0, 0}), 0.0, 1.0, init);
  for (const auto& p : index_profile(sys, e2(), {0.1, 0.4, 0.7, 1.0})) {
    ASSERT_TRUE(p.index.has_value());
    EXPECT_EQ(*p.index, 1);
  }
}

TEST(Profile, ProductJumpsOnceAtPi) {
  auto prof = index_profile(product(), e2(), {1.0, 3.0, 3.3, 4.5});
  EXPECT_EQ(*prof[0].index, 0);
  EXPECT_EQ(*prof[1].index, 0);
  EXPECT_EQ(*prof[2].index, 1);
  EXPECT_EQ(*prof[3].index, 1);
}

TEST(Profile, FocalPointsFlagged) {
  auto prod = index_profile(product(), e2(), {M_PI});
  EXPECT_TRUE(prod[0].degenerate);
  EXPECT_FALSE(prod[0].index.has_value());
  auto riem = index_profile(riemannian(), Distribution::empty(1), {M_PI, 3.0});
  EXPECT_TRUE(riem[0].degenerate);
  EXPECT_FALSE(riem[1].degenerate);
}

TEST(Sharp, ComplementThetaAndPositiveShift) {
  for (auto sys : {riemannian(), product(), riemannian(2.0)}) {
    Distribution d = sys.n() == 2 ? e2() : Distribution::empty(1);
    auto fs = integrate(sys);
    SharpReport with_complement = sharp_decomposition_check(sys, d, complement_theta(fs));
    EXPECT_TRUE(with_complement.holds);
    EXPECT_EQ(with_complement.intersection_dim, d.k);
    MatrixXd theta = endpoint_chart(fs) + MatrixXd::Identity(sys.n(), sys.n());
    SharpReport shifted = sharp_decomposition_check(sys, d, theta);
    EXPECT_TRUE(shifted.holds);
    EXPECT_EQ(shifted.boundary_term, 0);
    EXPECT_EQ(shifted.lhs, shifted.n_minus_K);
    EXPECT_TRUE(shifted.form_nondegenerate);
  }
}

TEST(Sharp, NegativeShiftAddsBoundaryTerm) {
  auto sys = riemannian(2.0);
  auto fs = integrate(sys);
  SharpReport r = sharp_decomposition_check(sys, Distribution::empty(1), endpoint_chart(fs) - MatrixXd::Identity(1, 1));
  EXPECT_EQ(r.boundary_term, 1);
  EXPECT_EQ(r.lhs, r.n_minus_K + 1);
  EXPECT_TRUE(r.holds);
}

TEST(MeshStability, IntegersUnchangedUnderDoubling) {
  IndexOptions a;
  a.mesh = 32;
  IndexOptions b = a;
  b.mesh = 64;
  IndexReport ra = index_terms(product(), e2(), a), rb = index_terms(product(), e2(), b);
  EXPECT_EQ(ra.n_minus_K, rb.n_minus_K);
  EXPECT_EQ(ra.n_plus_S, rb.n_plus_S);
  EXPECT_EQ(ra.maslov, rb.maslov);
}

TEST(MeshStability, NonConvergenceReported) {
  // On a single coarse mesh the discrete count of a rapidly oscillating
  // system cannot settle.
  IndexOptions o;
  o.mesh = 2;
  o.mesh_max = 4;
  auto sys = ms(diag({1}), diag({-400}), 0.0, 1.0, InitialData::zero(1));
  IndexOptions fine;
  fine.integration.steps = 8192;
  o.integration = fine.integration;
  try {
    index_terms(sys, Distribution::empty(1), o);
    FAIL() << "expected non-convergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNonConvergence);
  }
}
