#include "morse/systems.hpp"

#include <algorithm>
#include <cmath>

#include "morse/errors.hpp"

namespace morse {

namespace {

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double rel_size(const MatrixXd& m) { return std::max(1.0, max_abs(m)); }

void check_shape(const MatrixXd& m, int n, const char* what) {
  if (m.rows() != n || m.cols() != n)
    throw Error(ErrorKind::kInvalidInput, std::string(what) + ": expected an n x n matrix");
  if (!m.allFinite()) throw Error(ErrorKind::kInvalidInput, std::string(what) + ": non-finite value");
}

}  // namespace

MatrixXd CoefficientPath::generator(double t) const {
  MatrixXd x(2 * n, 2 * n);
  MatrixXd a = A(t);
  x << a, B(t), C(t), -a.transpose();
  return x;
}

std::vector<double> CoefficientPath::validation_grid() const {
  const int m = std::max(validation_points, 2);
  std::vector<double> g(m);
  for (int i = 0; i < m; ++i) g[i] = a + (b - a) * i / (m - 1);
  return g;
}

void CoefficientPath::validate(double rel_tol) const {
  if (n <= 0) throw Error(ErrorKind::kInvalidInput, "CoefficientPath: n must be positive");
  if (!(b > a)) throw Error(ErrorKind::kInvalidInput, "CoefficientPath: need a < b");
  if (!A || !B || !C) throw Error(ErrorKind::kInvalidInput, "CoefficientPath: missing sampler");
  for (double t : validation_grid()) {
    MatrixXd am = A(t), bm = B(t), cm = C(t);
    check_shape(am, n, "A(t)");
    check_shape(bm, n, "B(t)");
    check_shape(cm, n, "C(t)");
    if (max_abs(bm - bm.transpose()) > rel_tol * rel_size(bm))
      throw Error(ErrorKind::kInvalidInput, "CoefficientPath: B(t) is not symmetric at t=" + std::to_string(t));
    if (max_abs(cm - cm.transpose()) > rel_tol * rel_size(cm))
      throw Error(ErrorKind::kInvalidInput, "CoefficientPath: C(t) is not symmetric at t=" + std::to_string(t));
    if (numerical_rank(bm, 1e-10) < n)
      throw Error(ErrorKind::kInvalidInput, "CoefficientPath: B(t) is singular at t=" + std::to_string(t));
  }
}

InitialData InitialData::zero(int n) { return {Subspace::zero(n), MatrixXd(0, 0)}; }

InitialData InitialData::whole(int n) { return {Subspace::whole(n), MatrixXd::Zero(n, n)}; }

LagrangianFrame InitialData::frame() const {
  const int n = P.ambient_dim();
  const int p = P.dim();
  if (S.rows() != p || S.cols() != p)
    throw Error(ErrorKind::kInvalidInput, "InitialData: S must be dim(P) x dim(P)");
  const MatrixXd& pb = P.basis();
  MatrixXd ann = p ? null_space(pb.transpose()) : MatrixXd::Identity(n, n);
  MatrixXd x = MatrixXd::Zero(n, n), y = MatrixXd::Zero(n, n);
  if (p) {
    x.leftCols(p) = pb;
    y.leftCols(p) = -pb * (pb.transpose() * pb).ldlt().solve(sym(S));
  }
  y.rightCols(n - p) = ann;
  return LagrangianFrame::from_blocks(x, y, 1e-8);
}

InitialData InitialData::from_lagrangian(const LagrangianFrame& l) {
  const int n = l.n();
  MatrixXd x = l.x(), y = l.y();
  Eigen::JacobiSVD<MatrixXd> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < n; ++i)
    if (s[i] > 1e-10 * std::max(1.0, s[0])) ++r;
  if (r == 0) return zero(n);
  MatrixXd u = svd.matrixU().leftCols(r);
  // X c = u_i for c = V_r Sigma_r^-1 e_i.
  MatrixXd c = svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal();
  MatrixXd sp = -(y * c).transpose() * u;
  return {Subspace(u), sym(sp)};
}

SystemData to_symplectic(const MorseSturm& ms) {
  const int n = ms.g.rows();
  check_shape(ms.g, n, "g");
  if (n == 0) throw Error(ErrorKind::kInvalidInput, "MorseSturm: empty metric");
  if (max_abs(ms.g - ms.g.transpose()) > 1e-12 * rel_size(ms.g))
    throw Error(ErrorKind::kInvalidInput, "MorseSturm: g is not symmetric");
  SymForm g(ms.g);
  if (!g.inertia().nondegenerate()) throw Error(ErrorKind::kDegenerate, "MorseSturm: g is degenerate");
  if (!ms.R) throw Error(ErrorKind::kInvalidInput, "MorseSturm: missing R");
  if (ms.init.P.ambient_dim() != n) throw Error(ErrorKind::kInvalidInput, "MorseSturm: P has wrong ambient dimension");

  const MatrixXd gm = g.matrix();
  const MatrixXd ginv = gm.inverse();
  SystemData sys;
  sys.coeffs.a = ms.a;
  sys.coeffs.b = ms.b;
  sys.coeffs.n = n;
  sys.coeffs.A = [n](double) { return MatrixXd::Zero(n, n).eval(); };
  sys.coeffs.B = [ginv](double) { return ginv; };
  MatrixFn r = ms.R;
  sys.coeffs.C = [gm, r](double t) { return sym(gm * r(t)); };
  sys.init = ms.init;
  sys.metric = gm;

  for (double t : sys.coeffs.validation_grid()) {
    MatrixXd rt = r(t);
    check_shape(rt, n, "R(t)");
    if (!check_g_symmetric(gm, rt, 1e-9 * rel_size(gm * rt)))
      throw Error(ErrorKind::kInvalidInput, "MorseSturm: R(t) is not g-symmetric at t=" + std::to_string(t));
  }
  sys.coeffs.validate();
  initial_index(sys);
  return sys;
}

int initial_index(const SystemData& sys) {
  if (sys.init.P.dim() == 0) return 0;
  MatrixXd binv = sys.coeffs.B(sys.a()).inverse();
  SymForm on_p = restrict(SymForm(binv), sys.init.P);
  if (!on_p.inertia().nondegenerate())
    throw Error(ErrorKind::kHypothesis, "initial data: B(a)^-1 is degenerate on P");
  return on_p.inertia().n_minus;
}

VectorXd alpha_of(const CoefficientPath& c, double t, const VectorXd& v, const VectorXd& dv) {
  return c.B(t).partialPivLu().solve(dv - c.A(t) * v);
}

MatrixXd differentiate(const MatrixFn& f, double t, double h, double lo, double hi) {
  if (t - h < lo) return (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2 * h)) / (2 * h);
  if (t + h > hi) return (3.0 * f(t) - 4.0 * f(t - h) + f(t - 2 * h)) / (2 * h);
  return (f(t + h) - f(t - h)) / (2 * h);
}

MatrixXd Distribution::derivative(double t, double a, double b) const {
  if (dY) return dY(t);
  return differentiate(Y, t, (b - a) * 1e-6, a, b);
}

Distribution Distribution::constant(const MatrixXd& y) {
  Distribution d;
  d.k = y.cols();
  d.Y = [y](double) { return y; };
  MatrixXd zero = MatrixXd::Zero(y.rows(), y.cols());
  d.dY = [zero](double) { return zero; };
  return d;
}

Distribution Distribution::empty(int n) { return constant(MatrixXd(n, 0)); }

void validate_distribution(const SystemData& sys, const Distribution& d) {
  const int n = sys.n();
  for (double t : sys.coeffs.validation_grid()) {
    MatrixXd binv = sys.coeffs.B(t).inverse();
    int index = SymForm(binv).inertia().n_minus;
    if (d.k != index)
      throw Error(ErrorKind::kHypothesis, "distribution: k differs from n_-(B^-1) at t=" + std::to_string(t));
    if (d.k == 0) continue;
    MatrixXd y = d.Y(t);
    if (y.rows() != n || y.cols() != d.k)
      throw Error(ErrorKind::kInvalidInput, "distribution: Y(t) must be n x k");
    if (numerical_rank(y, 1e-10) < d.k)
      throw Error(ErrorKind::kHypothesis, "distribution: Y(t) is rank deficient at t=" + std::to_string(t));
    Inertia in = SymForm(y.transpose() * binv * y).inertia();
    if (in.n_minus != d.k)
      throw Error(ErrorKind::kHypothesis,
                  "distribution: B^-1 is not negative definite on span Y at t=" + std::to_string(t));
  }
}

MatrixXd L0Isomorphism::matrix(double t) const {
  MatrixXd z = Z(t), w = sym(W(t));
  const int n = z.rows();
  MatrixXd zit = z.transpose().inverse();
  MatrixXd m = MatrixXd::Zero(2 * n, 2 * n);
  m.topLeftCorner(n, n) = z;
  m.bottomLeftCorner(n, n) = zit * w;
  m.bottomRightCorner(n, n) = zit;
  return m;
}

MatrixXd L0Isomorphism::derivative(double t, double a, double b) const {
  if (!dZ || !dW) return differentiate([this](double s) { return matrix(s); }, t, (b - a) * 1e-6, a, b);
  MatrixXd z = Z(t), w = sym(W(t)), dz = dZ(t), dw = sym(dW(t));
  const int n = z.rows();
  MatrixXd zit = z.transpose().inverse();
  MatrixXd dzit = -zit * dz.transpose() * zit;
  MatrixXd m = MatrixXd::Zero(2 * n, 2 * n);
  m.topLeftCorner(n, n) = dz;
  m.bottomLeftCorner(n, n) = dzit * w + zit * dw;
  m.bottomRightCorner(n, n) = dzit;
  return m;
}

SystemData apply_isomorphism(const SystemData& sys, const L0Isomorphism& phi0) {
  if (!phi0.Z || !phi0.W) throw Error(ErrorKind::kInvalidInput, "apply_isomorphism: missing Z or W");
  const int n = sys.n();
  for (double t : sys.coeffs.validation_grid()) {
    MatrixXd z = phi0.Z(t), w = phi0.W(t);
    check_shape(z, n, "Z(t)");
    check_shape(w, n, "W(t)");
    if (numerical_rank(z, 1e-10) < n)
      throw Error(ErrorKind::kInvalidInput, "apply_isomorphism: Z(t) is singular at t=" + std::to_string(t));
    if (max_abs(w - w.transpose()) > 1e-9 * rel_size(w))
      throw Error(ErrorKind::kInvalidInput, "apply_isomorphism: W(t) is not symmetric");
  }
  const CoefficientPath c = sys.coeffs;
  auto xt = [c, phi0](double t) {
    MatrixXd p = phi0.matrix(t);
    MatrixXd pinv = p.inverse();
    return (phi0.derivative(t, c.a, c.b) * pinv + p * c.generator(t) * pinv).eval();
  };
  SystemData out;
  out.coeffs.a = c.a;
  out.coeffs.b = c.b;
  out.coeffs.n = n;
  out.coeffs.validation_points = c.validation_points;
  out.coeffs.A = [xt, n](double t) { return xt(t).topLeftCorner(n, n).eval(); };
  out.coeffs.B = [xt, n](double t) { return sym(xt(t).topRightCorner(n, n)); };
  out.coeffs.C = [xt, n](double t) { return sym(xt(t).bottomLeftCorner(n, n)); };
  out.coeffs.validate(1e-6);
  out.init = InitialData::from_lagrangian(LagrangianFrame(phi0.matrix(c.a) * sys.init.frame().frame(), 1e-8));
  initial_index(out);
  return out;
}

ReducedCoefficients reduced_coefficients(const SystemData& sys, const Distribution& d, double t) {
  const CoefficientPath& c = sys.coeffs;
  MatrixXd y = d.Y(t), dy = d.derivative(t, c.a, c.b);
  MatrixXd bm = c.B(t);
  MatrixXd binv = bm.inverse();
  // Columns are alpha_{Y_j}.
  MatrixXd alpha = binv * (dy - c.A(t) * y);
  ReducedCoefficients r;
  r.calB = sym(y.transpose() * binv * y);
  r.calC = y.transpose() * alpha;  // (i, j) = alpha_{Y_j}(Y_i)
  r.calI = sym(alpha.transpose() * bm * alpha + y.transpose() * c.C(t) * y);
  return r;
}

namespace {

SystemData reduced_shell(const SystemData& sys, const Distribution& d) {
  validate_distribution(sys, d);
  if (d.k == 0) throw Error(ErrorKind::kInvalidInput, "reduced system: distribution is trivial");
  SystemData out;
  out.coeffs.a = sys.a();
  out.coeffs.b = sys.b();
  out.coeffs.n = d.k;
  out.coeffs.validation_points = sys.coeffs.validation_points;
  out.init = InitialData::zero(d.k);
  return out;
}

}  // namespace

SystemData reduced_system(const SystemData& sys, const Distribution& d) {
  SystemData out = reduced_shell(sys, d);
  auto coef = [sys, d](double t) { return reduced_coefficients(sys, d, t); };
  out.coeffs.A = [coef](double t) {
    auto r = coef(t);
    return (-r.calB.ldlt().solve(r.calC)).eval();
  };
  out.coeffs.B = [coef](double t) {
    auto r = coef(t);
    return (-sym(r.calB.inverse())).eval();
  };
  out.coeffs.C = [coef](double t) {
    auto r = coef(t);
    return sym(r.calC.transpose() * r.calB.ldlt().solve(r.calC) - r.calI);
  };
  out.coeffs.validate();
  return out;
}

namespace {

// Cs' by central differences of Cs. Cs already carries one numerical
// derivative, so a coarser step keeps the round-off in check.
MatrixXd cs_derivative(const SystemData& sys, const Distribution& d, double t) {
  auto cs = [&](double s) { return sym(reduced_coefficients(sys, d, s).calC); };
  return differentiate(cs, t, (sys.b() - sys.a()) * 1e-4, sys.a(), sys.b());
}

MatrixXd antisym(const MatrixXd& m) { return 0.5 * (m - m.transpose()); }

}  // namespace

SystemData alt_reduced_system(const SystemData& sys, const Distribution& d) {
  SystemData out = reduced_shell(sys, d);
  out.coeffs.A = [sys, d](double t) {
    auto r = reduced_coefficients(sys, d, t);
    return (-r.calB.ldlt().solve(antisym(r.calC))).eval();
  };
  out.coeffs.B = [sys, d](double t) {
    return sym(reduced_coefficients(sys, d, t).calB.inverse());
  };
  out.coeffs.C = [sys, d](double t) {
    auto r = reduced_coefficients(sys, d, t);
    MatrixXd ca = antisym(r.calC);
    return sym(r.calI - cs_derivative(sys, d, t) + ca * r.calB.ldlt().solve(ca));
  };
  out.coeffs.validate();
  return out;
}

SystemData negate_momentum(const SystemData& sys) {
  SystemData out = sys;
  MatrixFn bf = sys.coeffs.B, cf = sys.coeffs.C;
  out.coeffs.B = [bf](double t) { return (-bf(t)).eval(); };
  out.coeffs.C = [cf](double t) { return (-cf(t)).eval(); };
  LagrangianFrame l = sys.init.frame();
  out.init = InitialData::from_lagrangian(LagrangianFrame::from_blocks(l.x(), -l.y()));
  if (out.metric) out.metric = -*out.metric;
  return out;
}

CriterionResult criterion_semidefinite(const SystemData& sys, const Distribution& d, double rel_tol) {
  validate_distribution(sys, d);
  CriterionResult res;
  res.min_eig_reduced = INFINITY;
  res.min_eig_alternative = INFINITY;
  if (d.k == 0) {
    res.holds = res.reduced_form_psd = res.alternative_form_psd = true;
    return res;
  }
  bool red = true, alt = true;
  for (double t : sys.coeffs.validation_grid()) {
    auto r = reduced_coefficients(sys, d, t);
    MatrixXd f1 = sym(r.calC.transpose() * r.calB.ldlt().solve(r.calC) - r.calI);
    MatrixXd ca = antisym(r.calC);
    MatrixXd f2 = sym(cs_derivative(sys, d, t) - ca * r.calB.ldlt().solve(ca) - r.calI);
    double e1 = SymForm(f1).eigenvalues().minCoeff();
    double e2 = SymForm(f2).eigenvalues().minCoeff();
    res.min_eig_reduced = std::min(res.min_eig_reduced, e1);
    res.min_eig_alternative = std::min(res.min_eig_alternative, e2);
    if (e1 < -rel_tol * rel_size(f1)) red = false;
    // Cs' is a nested numerical derivative; allow for its error.
    if (e2 < -std::max(rel_tol, 1e-6) * rel_size(f2)) alt = false;
  }
  res.reduced_form_psd = red;
  res.alternative_form_psd = alt;
  res.holds = red || alt;
  return res;
}

}  // namespace morse
