#pragma once

#include <functional>
#include <optional>

#include "morse/bilinear.hpp"
#include "morse/lagrangian.hpp"

namespace morse {

using MatrixFn = std::function<MatrixXd(double)>;

// Coefficients of v' = A v + B alpha, alpha' = C v - A^T alpha on [a, b].
struct CoefficientPath {
  double a = 0.0;
  double b = 1.0;
  int n = 0;
  MatrixFn A, B, C;
  int validation_points = 512;

  // The sp(2n) generator [[A, B], [C, -A^T]].
  MatrixXd generator(double t) const;
  // B, C symmetric and B invertible at every validation point.
  void validate(double rel_tol = 1e-9) const;
  std::vector<double> validation_grid() const;
};

// Initial Lagrangian {(v, alpha) : v in P, alpha|_P + S(v) = 0}. S is given
// in the coordinates of P's basis.
struct InitialData {
  Subspace P;
  MatrixXd S;

  static InitialData zero(int n);    // P = {0}
  static InitialData whole(int n);   // P = R^n, S = 0
  LagrangianFrame frame() const;
  static InitialData from_lagrangian(const LagrangianFrame& l);
};

// g(v'', .) = g(R v, .) with g a constant nondegenerate symmetric matrix and
// R(t) g-symmetric.
struct MorseSturm {
  double a = 0.0;
  double b = 1.0;
  MatrixXd g;
  MatrixFn R;
  InitialData init;
};

struct SystemData {
  CoefficientPath coeffs;
  InitialData init;
  // Set when the system came from a Morse-Sturm problem.
  std::optional<MatrixXd> metric;

  int n() const { return coeffs.n; }
  double a() const { return coeffs.a; }
  double b() const { return coeffs.b; }
};

SystemData to_symplectic(const MorseSturm& ms);

// Checks the initial gate (B(a)^-1 nondegenerate on P) and returns
// n_-(B(a)^-1 restricted to P).
int initial_index(const SystemData& sys);

// alpha_v = B^-1 (v' - A v).
VectorXd alpha_of(const CoefficientPath& c, double t, const VectorXd& v, const VectorXd& dv);

// Derivative by central differences; one-sided near the ends of [lo, hi].
MatrixXd differentiate(const MatrixFn& f, double t, double h, double lo, double hi);

// Smooth frame Y_1..Y_k of a maximal negative distribution for B^-1.
struct Distribution {
  int k = 0;
  MatrixFn Y;   // n x k
  MatrixFn dY;  // optional; central differences with h = (b - a) 1e-6 otherwise

  MatrixXd frame(double t) const { return Y(t); }
  MatrixXd derivative(double t, double a, double b) const;
  static Distribution constant(const MatrixXd& y);
  static Distribution empty(int n);
};

// Throws kHypothesis unless Y has rank k, B^-1 is negative definite on it and
// k = n_-(B^-1) at every validation point.
void validate_distribution(const SystemData& sys, const Distribution& d);

// phi0 = [[Z, 0], [Z^-T W, Z^-T]] with W symmetric.
struct L0Isomorphism {
  MatrixFn Z, W;
  MatrixFn dZ, dW;  // optional

  MatrixXd matrix(double t) const;
  MatrixXd derivative(double t, double a, double b) const;
};

// X~ = phi0' phi0^-1 + phi0 X phi0^-1, initial Lagrangian phi0(a) l0.
SystemData apply_isomorphism(const SystemData& sys, const L0Isomorphism& phi0);

struct ReducedCoefficients {
  MatrixXd calB;  // B^-1(Y_i, Y_j)
  MatrixXd calC;  // alpha_{Y_j}(Y_i)
  MatrixXd calI;  // B(alpha_{Y_i}, alpha_{Y_j}) + C(Y_i, Y_j)
};

ReducedCoefficients reduced_coefficients(const SystemData& sys, const Distribution& d, double t);

// f' = -calB^-1 calC f - calB^-1 phi, phi' = (calC^T calB^-1 calC - calI) f + calC^T calB^-1 phi,
// on R^k with f(a) = 0.
SystemData reduced_system(const SystemData& sys, const Distribution& d);

// f' = -calB^-1 Ca f + calB^-1 phi, phi' = (calI - Cs' + Ca calB^-1 Ca) f - Ca calB^-1 phi
// with Ca, Cs the antisymmetric and symmetric parts of calC. This is the
// reduced system after (f, phi) -> (f, -phi - Cs f), which reverses the
// symplectic form: focal instants and multiplicities agree with
// reduced_system, signatures change sign.
SystemData alt_reduced_system(const SystemData& sys, const Distribution& d);

// (A, B, C) -> (A, -B, -C): the image under (v, alpha) -> (v, -alpha).
SystemData negate_momentum(const SystemData& sys);

struct CriterionResult {
  bool holds = false;
  bool reduced_form_psd = false;      // calC^T calB^-1 calC - calI >= 0
  bool alternative_form_psd = false;  // Cs' - Ca calB^-1 Ca - calI >= 0
  double min_eig_reduced = 0.0;
  double min_eig_alternative = 0.0;
};

// Sufficient condition for n_+(I|S) = 0, checked on the validation grid.
CriterionResult criterion_semidefinite(const SystemData& sys, const Distribution& d,
                                       double rel_tol = 1e-9);

}  // namespace morse
