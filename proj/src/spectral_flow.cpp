#include "morse/spectral_flow.hpp"

#include <algorithm>
#include <cmath>

#include "morse/errors.hpp"

namespace morse {

namespace {

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

MatrixXd pinv(const MatrixXd& f) {
  return f.completeOrthogonalDecomposition().pseudoInverse();
}

// Restricted form with the zero threshold scaled by the ambient B(t):
// projecting onto D_t leaves round-off of that size.
SymForm restricted_form(const FormCurve& c, double t) {
  MatrixXd b = c.form(t);
  MatrixXd d = c.subspace(t);
  MatrixXd r = sym(d.transpose() * b * d);
  double scale = std::max(max_abs(r), b.size() ? b.norm() : 0.0);
  return SymForm(r, default_tolerance(std::max<int>(b.rows(), 1), scale));
}

}  // namespace

MatrixXd FormCurve::subspace(double t) const {
  MatrixXd b = form(t);
  if (!constraint) return MatrixXd::Identity(b.rows(), b.cols());
  MatrixXd f = constraint(t);
  if (f.cols() != b.rows()) throw Error(ErrorKind::kInvalidInput, "FormCurve: F(t) has the wrong width");
  if (numerical_rank(f, 1e-10) != f.rows())
    throw Error(ErrorKind::kHypothesis, "FormCurve: F(t) is not surjective");
  return null_space(f, 1e-10);
}

MatrixXd FormCurve::restricted(double t) const {
  MatrixXd d = subspace(t);
  return sym(d.transpose() * form(t) * d);
}

DerivativeForm restricted_derivative(const FormCurve& c, double t0, const JumpOptions& opts) {
  const double h = opts.fd_step_rel * (c.t_end - c.t_start);
  MatrixXd d0 = c.subspace(t0);
  SymForm bar = restricted_form(c, t0);
  DerivativeForm out;
  out.kernel = d0 * bar.kernel();
  const int r = out.kernel.cols();
  if (r == 0) {
    out.form = SymForm(MatrixXd(0, 0));
    out.kernel_in_ker_b = true;
    return out;
  }
  // Two extension curves through the kernel vectors, both inside D_t.
  auto orthogonal_ext = [&](double t) -> MatrixXd {
    if (!c.constraint) return out.kernel;
    MatrixXd f = c.constraint(t);
    return out.kernel - pinv(f) * (f * out.kernel);
  };
  MatrixXd g = c.constraint ? MatrixXd(c.constraint(t0).transpose()) : MatrixXd();
  auto oblique_ext = [&](double t) -> MatrixXd {
    if (!c.constraint) return out.kernel;
    MatrixXd f = c.constraint(t);
    return out.kernel - g * (f * g).partialPivLu().solve(f * out.kernel);
  };
  auto deriv = [&](auto&& ext) {
    auto value = [&](double t) {
      MatrixXd v = ext(t);
      return MatrixXd(v.transpose() * c.form(t) * v);
    };
    return sym((value(t0 + h) - value(t0 - h)) / (2 * h));
  };
  MatrixXd d1 = deriv(orthogonal_ext);
  MatrixXd d2 = deriv(oblique_ext);
  out.extension_discrepancy = max_abs(d1 - d2);
  // Scale the zero threshold with the finite-difference error.
  double scale = std::max(max_abs(c.form(t0)), 1.0);
  out.form = SymForm(d1, std::max(default_tolerance(r, max_abs(d1)), 1e-6 * scale));
  out.kernel_in_ker_b = max_abs(c.form(t0) * out.kernel) <= 1e-9 * scale;
  return out;
}

namespace {

// n_-(B(t0 + sign * eps)|D) over the eps sweep; the two smallest eps must agree.
std::pair<int, double> side_index(const FormCurve& c, double t0, double sign, const JumpOptions& opts) {
  std::vector<double> eps = opts.eps_rel;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  if (eps.size() < 2) throw Error(ErrorKind::kInvalidInput, "jump: need at least two eps values");
  const double len = c.t_end - c.t_start;
  std::vector<int> vals;
  for (double e : eps) {
    SymForm f = restricted_form(c, t0 + sign * e * len);
    if (!f.inertia().nondegenerate())
      throw Error(ErrorKind::kHypothesis, "jump: form is degenerate near t0 at eps=" + std::to_string(e));
    vals.push_back(f.inertia().n_minus);
  }
  const size_t last = vals.size() - 1;
  if (vals[last] != vals[last - 1])
    throw Error(ErrorKind::kNonConvergence, "jump: index still changing at the smallest eps");
  return {vals[last], eps[last] * len};
}

}  // namespace

ForwardJump jump_forward(const FormCurve& c, double t0, const JumpOptions& opts) {
  if (!(t0 >= c.t_start && t0 < c.t_end)) throw Error(ErrorKind::kInvalidInput, "jump_forward: t0 outside curve");
  DerivativeForm d = restricted_derivative(c, t0, opts);
  if (!d.form.inertia().nondegenerate())
    throw Error(ErrorKind::kHypothesis, "jump_forward: restricted derivative is degenerate");
  ForwardJump out;
  out.n_before = restricted_form(c, t0).inertia().n_minus;
  out.derivative = d.form.inertia();
  out.predicted_after = out.n_before + out.derivative.n_minus;
  auto [after, eps] = side_index(c, t0, 1.0, opts);
  out.observed_after = after;
  out.eps = eps;
  out.holds = out.observed_after == out.predicted_after;
  out.extension_discrepancy = d.extension_discrepancy;
  out.kernel_in_ker_b = d.kernel_in_ker_b;
  return out;
}

TwoSidedJump jump_two_sided(const FormCurve& c, double t0, const JumpOptions& opts) {
  if (!(t0 > c.t_start && t0 < c.t_end)) throw Error(ErrorKind::kInvalidInput, "jump_two_sided: t0 outside curve");
  DerivativeForm d = restricted_derivative(c, t0, opts);
  if (!d.form.inertia().nondegenerate())
    throw Error(ErrorKind::kHypothesis, "jump_two_sided: restricted derivative is degenerate");
  TwoSidedJump out;
  out.derivative_signature = d.form.inertia().signature();
  auto [left, eps] = side_index(c, t0, -1.0, opts);
  auto right = side_index(c, t0, 1.0, opts).first;
  out.n_left = left;
  out.n_right = right;
  out.eps = eps;
  out.holds = out.n_left - out.n_right == out.derivative_signature;
  return out;
}

}  // namespace morse
