#pragma once

#include <optional>
#include <ostream>

#include <Eigen/Dense>

namespace morse {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Inertia {
  int n_plus = 0;
  int n_minus = 0;
  int dgn = 0;

  int signature() const { return n_plus - n_minus; }
  int dim() const { return n_plus + n_minus + dgn; }
  bool nondegenerate() const { return dgn == 0; }
  bool operator==(const Inertia&) const = default;
};

std::ostream& operator<<(std::ostream& os, const Inertia& in);

// Symmetric bilinear form on R^dim. The input is symmetrised on construction
// and the size of its antisymmetric part is kept for diagnostics. Inertia is
// computed once, from a self-adjoint eigendecomposition, so the object is
// safe to share between threads.
class SymForm {
 public:
  SymForm() = default;
  // tol: eigenvalues with |lambda| <= tol count as zero. Default is
  // dim * ||B||_2 * eps * 64.
  explicit SymForm(const MatrixXd& m, std::optional<double> tol = {});

  int dim() const { return static_cast<int>(m_.rows()); }
  const MatrixXd& matrix() const { return m_; }
  double tol() const { return tol_; }
  double asymmetry() const { return asymmetry_; }
  double norm() const { return norm_; }
  const VectorXd& eigenvalues() const { return evals_; }
  const MatrixXd& eigenvectors() const { return evecs_; }
  const Inertia& inertia() const { return inertia_; }

  double operator()(const VectorXd& v, const VectorXd& w) const {
    return v.dot(m_ * w);
  }

  // Basis of the radical (eigenvectors of the zero eigenvalues).
  MatrixXd kernel() const;

 private:
  MatrixXd m_;
  VectorXd evals_;
  MatrixXd evecs_;
  double tol_ = 0.0;
  double asymmetry_ = 0.0;
  double norm_ = 0.0;
  Inertia inertia_;
};

double default_tolerance(int dim, double norm2);

// Linear subspace of R^ambient stored as a full-column-rank basis.
class Subspace {
 public:
  Subspace() = default;
  // Throws if the columns are dependent (relative rank tolerance).
  explicit Subspace(const MatrixXd& basis);
  static Subspace zero(int ambient);
  static Subspace whole(int ambient);

  int ambient_dim() const { return ambient_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  const MatrixXd& basis() const { return basis_; }
  // Orthonormal basis spanning the same space.
  MatrixXd orthonormal() const;
  bool contains(const VectorXd& v, double tol = 1e-9) const;

 private:
  MatrixXd basis_;
  int ambient_ = 0;
};

Inertia inertia(const SymForm& b);
Inertia inertia(const MatrixXd& m, std::optional<double> tol = {});

// Pull-back W^T B W.
SymForm restrict(const SymForm& b, const Subspace& w);

// {v : B(v, w) = 0 for all w in W}. B must be nondegenerate.
Subspace orthogonal_complement(const SymForm& b, const Subspace& w);

// g R is symmetric, i.e. R is g-symmetric.
bool check_g_symmetric(const MatrixXd& g, const MatrixXd& r, double tol);

// Helpers shared by the other modules.
double max_abs(const MatrixXd& m);
int numerical_rank(const MatrixXd& m, double rel_tol = 1e-10);
// Orthonormal basis of ker M via the SVD. rel_tol is relative to sigma_max.
MatrixXd null_space(const MatrixXd& m, double rel_tol = 1e-10);
// Orthonormal basis of the column space.
MatrixXd range_basis(const MatrixXd& m, double rel_tol = 1e-10);
// Dimension of the intersection of two column spaces.
int intersection_dim(const MatrixXd& a, const MatrixXd& b, double rel_tol = 1e-10);

}  // namespace morse
