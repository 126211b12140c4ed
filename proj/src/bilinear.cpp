#include "morse/bilinear.hpp"

#include <cmath>
#include <limits>

#include "morse/errors.hpp"

namespace morse {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kHypothesis: return "hypothesis violated";
    case ErrorKind::kDegenerate: return "degenerate form";
    case ErrorKind::kNotTransverse: return "not transverse";
    case ErrorKind::kSearchExhausted: return "search exhausted";
    case ErrorKind::kDriftExceeded: return "symplectic drift exceeded";
    case ErrorKind::kUnresolvedCrossing: return "unresolved crossing cluster";
    case ErrorKind::kFocalEndpoint: return "endpoint is focal";
    case ErrorKind::kNonConvergence: return "no convergence";
    case ErrorKind::kParse: return "parse error";
  }
  return "error";
}

std::ostream& operator<<(std::ostream& os, const Inertia& in) {
  return os << "(" << in.n_plus << ", " << in.n_minus << ", " << in.dgn << ")";
}

double default_tolerance(int dim, double norm2) {
  return std::max(dim, 1) * norm2 * std::numeric_limits<double>::epsilon() * 64.0;
}

SymForm::SymForm(const MatrixXd& m, std::optional<double> tol) {
  if (m.rows() != m.cols())
    throw Error(ErrorKind::kInvalidInput, "SymForm: matrix is not square");
  if (!m.allFinite())
    throw Error(ErrorKind::kInvalidInput, "SymForm: non-finite entries");
  m_ = 0.5 * (m + m.transpose());
  asymmetry_ = m.size() ? max_abs(0.5 * (m - m.transpose())) : 0.0;
  if (m_.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m_);
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
  norm_ = evals_.cwiseAbs().maxCoeff();
  tol_ = tol ? *tol : default_tolerance(dim(), norm_);
  for (Eigen::Index i = 0; i < evals_.size(); ++i) {
    if (evals_[i] > tol_)
      ++inertia_.n_plus;
    else if (evals_[i] < -tol_)
      ++inertia_.n_minus;
    else
      ++inertia_.dgn;
  }
}

MatrixXd SymForm::kernel() const {
  MatrixXd k(dim(), inertia_.dgn);
  int c = 0;
  for (Eigen::Index i = 0; i < evals_.size(); ++i)
    if (std::abs(evals_[i]) <= tol_) k.col(c++) = evecs_.col(i);
  return k;
}

Subspace::Subspace(const MatrixXd& basis) : basis_(basis), ambient_(basis.rows()) {
  if (basis.cols() > basis.rows())
    throw Error(ErrorKind::kInvalidInput, "Subspace: more vectors than ambient dimension");
  if (basis.cols() > 0 && numerical_rank(basis) != basis.cols())
    throw Error(ErrorKind::kInvalidInput, "Subspace: basis vectors are dependent");
}

Subspace Subspace::zero(int ambient) {
  Subspace s;
  s.basis_ = MatrixXd(ambient, 0);
  s.ambient_ = ambient;
  return s;
}

Subspace Subspace::whole(int ambient) {
  return Subspace(MatrixXd::Identity(ambient, ambient));
}

MatrixXd Subspace::orthonormal() const {
  if (dim() == 0) return basis_;
  Eigen::HouseholderQR<MatrixXd> qr(basis_);
  return qr.householderQ() * MatrixXd::Identity(ambient_, dim());
}

bool Subspace::contains(const VectorXd& v, double tol) const {
  if (dim() == 0) return v.norm() <= tol;
  MatrixXd q = orthonormal();
  return (v - q * (q.transpose() * v)).norm() <= tol * std::max(1.0, v.norm());
}

Inertia inertia(const SymForm& b) { return b.inertia(); }

Inertia inertia(const MatrixXd& m, std::optional<double> tol) {
  return SymForm(m, tol).inertia();
}

SymForm restrict(const SymForm& b, const Subspace& w) {
  if (w.ambient_dim() != b.dim())
    throw Error(ErrorKind::kInvalidInput, "restrict: dimension mismatch");
  return SymForm(w.basis().transpose() * b.matrix() * w.basis());
}

Subspace orthogonal_complement(const SymForm& b, const Subspace& w) {
  if (w.ambient_dim() != b.dim())
    throw Error(ErrorKind::kInvalidInput, "orthogonal_complement: dimension mismatch");
  if (!b.inertia().nondegenerate())
    throw Error(ErrorKind::kDegenerate, "orthogonal_complement: form is degenerate");
  if (w.dim() == 0) return Subspace::whole(b.dim());
  MatrixXd constraints = w.basis().transpose() * b.matrix();
  MatrixXd k = null_space(constraints);
  if (k.cols() == 0) return Subspace::zero(b.dim());
  return Subspace(k);
}

bool check_g_symmetric(const MatrixXd& g, const MatrixXd& r, double tol) {
  if (g.rows() != r.rows() || g.cols() != r.cols() || g.rows() != g.cols())
    throw Error(ErrorKind::kInvalidInput, "check_g_symmetric: dimension mismatch");
  MatrixXd gr = g * r;
  return max_abs(gr - gr.transpose()) <= tol;
}

double max_abs(const MatrixXd& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

namespace {

struct Svd {
  VectorXd s;
  MatrixXd u;
  MatrixXd v;
};

Svd full_svd(const MatrixXd& m, bool want_u, bool want_v) {
  unsigned opts = (want_u ? Eigen::ComputeFullU : 0) | (want_v ? Eigen::ComputeFullV : 0);
  Svd r;
  if (m.rows() * m.cols() > 64 * 64) {
    Eigen::BDCSVD<MatrixXd> svd(m, opts);
    r.s = svd.singularValues();
    if (want_u) r.u = svd.matrixU();
    if (want_v) r.v = svd.matrixV();
  } else {
    Eigen::JacobiSVD<MatrixXd> svd(m, opts);
    r.s = svd.singularValues();
    if (want_u) r.u = svd.matrixU();
    if (want_v) r.v = svd.matrixV();
  }
  return r;
}

int rank_from(const VectorXd& s, double rel_tol) {
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > rel_tol * s[0]) ++r;
  return r;
}

}  // namespace

int numerical_rank(const MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  return rank_from(full_svd(m, false, false).s, rel_tol);
}

MatrixXd null_space(const MatrixXd& m, double rel_tol) {
  const Eigen::Index cols = m.cols();
  if (m.rows() == 0) return MatrixXd::Identity(cols, cols);
  Svd svd = full_svd(m, false, true);
  int r = rank_from(svd.s, rel_tol);
  return svd.v.rightCols(cols - r);
}

MatrixXd range_basis(const MatrixXd& m, double rel_tol) {
  if (m.cols() == 0) return MatrixXd(m.rows(), 0);
  Svd svd = full_svd(m, true, false);
  int r = rank_from(svd.s, rel_tol);
  return svd.u.leftCols(r);
}

int intersection_dim(const MatrixXd& a, const MatrixXd& b, double rel_tol) {
  MatrixXd ab(a.rows(), a.cols() + b.cols());
  ab << a, b;
  return numerical_rank(a, rel_tol) + numerical_rank(b, rel_tol) - numerical_rank(ab, rel_tol);
}

}  // namespace morse
