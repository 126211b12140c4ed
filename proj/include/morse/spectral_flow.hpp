#pragma once

#include <functional>
#include <vector>

#include "morse/bilinear.hpp"

namespace morse {

// A C^1 family of symmetric forms B(t) on R^N, optionally restricted to the
// subspaces D_t = ker F(t) (F(t) of full row rank).
struct FormCurve {
  double t_start = -1.0;
  double t_end = 1.0;
  std::function<MatrixXd(double)> form;
  std::function<MatrixXd(double)> constraint;  // empty: D_t = R^N

  MatrixXd restricted(double t) const;  // B(t) on an orthonormal basis of D_t
  MatrixXd subspace(double t) const;    // orthonormal basis of D_t
};

struct JumpOptions {
  double fd_step_rel = 1e-5;  // derivative step, relative to the curve length
  std::vector<double> eps_rel{1e-2, 1e-3, 1e-4};
};

struct DerivativeForm {
  MatrixXd kernel;              // basis of ker of the restricted form at t0
  SymForm form;                 // restricted derivative on that kernel
  double extension_discrepancy = 0.0;  // two different extension curves
  bool kernel_in_ker_b = false;        // ker of restricted form inside ker B(t0)
};

// Restricted derivative on the kernel of B(t0)|D_{t0}, using extension curves
// v(t) = (I - F(t)^+ F(t)) v.
DerivativeForm restricted_derivative(const FormCurve& c, double t0, const JumpOptions& opts = {});

struct ForwardJump {
  int n_before = 0;          // n_-(B(t0)|D)
  Inertia derivative;        // inertia of the restricted derivative
  int predicted_after = 0;   // n_before + n_-(derivative)
  int observed_after = 0;    // n_-(B(t0 + eps)|D)
  double eps = 0.0;
  bool holds = false;
  double extension_discrepancy = 0.0;
  bool kernel_in_ker_b = false;
};

// Throws kHypothesis if the restricted derivative is degenerate.
ForwardJump jump_forward(const FormCurve& c, double t0, const JumpOptions& opts = {});

struct TwoSidedJump {
  int n_left = 0;   // n_-(B(t0 - eps)|D)
  int n_right = 0;  // n_-(B(t0 + eps)|D)
  int derivative_signature = 0;
  double eps = 0.0;
  bool holds = false;  // n_left - n_right == derivative_signature
};

TwoSidedJump jump_two_sided(const FormCurve& c, double t0, const JumpOptions& opts = {});

}  // namespace morse
