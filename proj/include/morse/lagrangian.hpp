#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "morse/bilinear.hpp"

namespace morse {

// omega(x, y) = x^T J y on R^n + R^n*, with x = (v, alpha). This gives
// omega((v1, a1), (v2, a2)) = a2(v1) - a1(v2).
MatrixXd symplectic_matrix(int n);

// A Lagrangian subspace of R^n + R^n* given by a 2n x n frame [X; Y].
class LagrangianFrame {
 public:
  LagrangianFrame() = default;
  // Throws unless the frame has rank n and X^T Y - Y^T X vanishes (relative
  // to the frame scale) within tol.
  explicit LagrangianFrame(const MatrixXd& frame, double tol = 1e-9);
  static LagrangianFrame from_blocks(const MatrixXd& x, const MatrixXd& y, double tol = 1e-9);
  static LagrangianFrame vertical(int n);    // {0} + R^n*
  static LagrangianFrame horizontal(int n);  // R^n + {0}
  static LagrangianFrame graph(const MatrixXd& s);  // {(v, s v)}, s symmetric

  int n() const { return static_cast<int>(frame_.cols()); }
  const MatrixXd& frame() const { return frame_; }
  MatrixXd x() const { return frame_.topRows(n()); }
  MatrixXd y() const { return frame_.bottomRows(n()); }
  double isotropy_residual() const;
  LagrangianFrame orthonormalized() const;

 private:
  MatrixXd frame_;
};

// Isotropy residual ||X^T Y - Y^T X||_inf / max(1, ||F||^2).
double isotropy_residual(const MatrixXd& frame);
// Orthonormal frame of the same subspace (thin QR with positive diagonal).
MatrixXd orthonormalize(const MatrixXd& frame);

// Smallest singular value of [Qa Qb] for orthonormal frames; zero iff the
// two subspaces intersect.
double transversality(const LagrangianFrame& a, const LagrangianFrame& b);
int intersection_dim(const LagrangianFrame& a, const LagrangianFrame& b, double tol = 1e-8);

// Matrix K with iota_{L0,L1}(F1 b)(F0 a) = b^T K a, where iota_{L0,L1}(v) is
// omega(v, .) restricted to L0.
MatrixXd iota_matrix(const LagrangianFrame& l0, const LagrangianFrame& l1);
// iota_{L0,L1}(v) for v = F1 * coords, as a covector in L0 coordinates.
VectorXd iota(const LagrangianFrame& l0, const LagrangianFrame& l1, const VectorXd& coords);

// phi_{L0,L1}(L): the form (u, u') -> omega(T u, u') on L0, where T: L0 -> L1
// has graph L. Expressed in the coordinates of l0's frame.
SymForm chart(const LagrangianFrame& l0, const LagrangianFrame& l1, const LagrangianFrame& l);

struct ComplementOptions {
  std::uint64_t seed = 0;
  int random_attempts = 64;
  double min_transversality = 1e-8;
};

// Lagrangian transverse to la, lb and every frame in `also`. Tries graphs of
// c*I for c in {1,-1,2,-2,4,-4,8,-8} and then seeded random symmetric graphs;
// returns the candidate with the largest worst-case transversality.
LagrangianFrame find_common_complement(const LagrangianFrame& la, const LagrangianFrame& lb,
                                       const std::vector<LagrangianFrame>& also = {},
                                       const ComplementOptions& opts = {});

struct CrossingRecord {
  double t = 0.0;
  int dim_intersection = 0;
  int contribution = 0;
  double half_width = 0.0;  // localisation bracket half-width
  double sigma_min = 0.0;   // smallest singular value at t
  double left = 0.0;        // instants where the contribution was evaluated
  double right = 0.0;
};

struct LagrangianPath {
  double t_start = 0.0;
  double t_end = 1.0;
  std::function<MatrixXd(double)> frame;
  // Sampling grid for crossing detection. Empty means `samples` uniform steps.
  std::vector<double> nodes;
  int samples = 2048;

  std::vector<double> grid() const;
};

struct CrossingOptions {
  double time_tol_rel = 1e-10;  // localisation tolerance, relative to length
  double crossing_tol = 1e-7;   // sigma_min below this is an intersection
  double mult_tol = 1e-6;       // singular values below this count for dim
  int subsamples = 16;          // refinement of each candidate bracket
  std::uint64_t seed = 0;       // for the complement search
};

// Crossings of the path with Lambda_{>=1}(l0) and their contributions to the
// Maslov index, computed in the chart phi_{L1,L0} against a common complement.
std::vector<CrossingRecord> find_crossings(const LagrangianPath& path, const LagrangianFrame& l0,
                                           const CrossingOptions& opts = {});
int maslov_index(const LagrangianPath& path, const LagrangianFrame& l0,
                 const CrossingOptions& opts = {});

struct TechLemmaCheck {
  double residual = 0.0;  // max-abs difference of the two sides
  Inertia lhs;            // inertia of phi_{L1,L0}(L*) - phi_{L1,L0}(L)
  Inertia chart;          // inertia of phi_{L0,L*}(L)
  bool n_plus_equal = false;
};

// Compares phi_{L1,L0}(L*) - phi_{L1,L0}(L) with iota^* phi_{L0,L*}(L)^{-1} iota,
// iota = iota_{L0,L1}, and the positive indices of the two charts.
TechLemmaCheck verify_tech_lemma(const LagrangianFrame& l, const LagrangianFrame& l_star,
                                 const LagrangianFrame& l0, const LagrangianFrame& l1);

// Inertia of phi_{L1,L0}(L) - theta without inverting the nearly singular
// block: congruent to Bm^T K A - A^T theta A where F_L = F1 A + F0 Bm.
Inertia chart_difference_inertia(const LagrangianFrame& l1, const LagrangianFrame& l0,
                                 const MatrixXd& l_frame, const MatrixXd& theta);

}  // namespace morse
