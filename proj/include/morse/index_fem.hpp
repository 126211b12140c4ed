#pragma once

#include <optional>
#include <string>
#include <vector>

#include "morse/flow.hpp"
#include "morse/systems.hpp"

namespace morse {

// Uniform mesh of [a, b] with m elements.
struct Mesh {
  Mesh(double a, double b, int m);

  double a, b;
  int m;
  std::vector<double> nodes;
  double h() const { return (b - a) / m; }
};

// Continuous piecewise-linear vector fields on a mesh. The value at a lies in
// span(start_basis) and the value at b in span(end_basis); an empty end basis
// means v(b) = 0. Coefficients are stored node by node.
struct DiscreteSpace {
  DiscreteSpace(const Mesh& mesh, int n, const MatrixXd& start_basis, const MatrixXd& end_basis);
  static DiscreteSpace fixed_end(const Mesh& mesh, const Subspace& p);
  static DiscreteSpace free_end(const Mesh& mesh, const Subspace& p);
  static DiscreteSpace subspace_end(const Mesh& mesh, const Subspace& p, const Subspace& q);

  Mesh mesh;
  int n;
  MatrixXd start_basis;
  MatrixXd end_basis;

  int dim() const { return offsets.back(); }
  int offset(int node) const { return offsets[node]; }
  const MatrixXd& node_basis(int node) const;

 private:
  std::vector<int> offsets;
  MatrixXd identity_;
};

// Matrix of I(v, w) = int B(alpha_v, alpha_w) + C(v, w) dt - S(v(a), w(a))
// (+ end_form(v(b), w(b)) in end_basis coordinates). Three-point Gauss per
// element, which is exact for the stiffness part when A = 0 and B constant.
MatrixXd assemble_index_form(const SystemData& sys, const DiscreteSpace& space,
                             const std::optional<MatrixXd>& end_form = {});

// Columns are the fields hat_j * Y_i(t_j) for interior nodes j; with
// include_end the k fields at b are appended (free end only).
MatrixXd build_S_subspace(const Distribution& d, const DiscreteSpace& space, bool include_end = false);

// I-orthogonal complement of S. Throws kDegenerate if I is degenerate on S.
MatrixXd build_K_subspace(const MatrixXd& form, const MatrixXd& s_basis);

struct IndexOptions {
  int mesh = 64;
  int mesh_max = 1024;
  IntegrationOptions integration;
  FocalOptions focal;
  bool reduced_cross_check = true;
};

struct IndexDiagnostics {
  int mesh = 0;  // finest mesh at which the integers were accepted
  bool converged = false;
  int dim_H = 0, dim_K = 0, dim_S = 0;
  double orthogonality = 0.0;  // max |I(K, S)| / max |I|
  double drift = 0.0;
  double isotropy = 0.0;
  double epsilon = 0.0;
  std::optional<int> n_plus_S_reduced_flow;  // focal count of the reduced system
};

struct IndexReport {
  int maslov = 0;
  int n_minus_K = 0;
  int n_plus_S = 0;
  int n_minus_gP = 0;
  std::optional<int> q_term;
  std::optional<int> n_minus_K_fixed;  // variable endpoint: fixed-end part
  std::optional<int> n_minus_JQ;       // variable endpoint: Jacobi-field part
  int identity_residual = 0;
  std::vector<FocalInstant> focal;
  std::optional<int> focal_index;
  IndexDiagnostics diagnostics;
};

IndexReport index_terms(const SystemData& sys, const Distribution& d, const IndexOptions& opts = {});

// Endpoint v(b) in Q with the extra term sq(v(b), w(b)), sq in Q coordinates.
IndexReport variable_endpoint_terms(const SystemData& sys, const Distribution& d, const Subspace& q,
                                    const MatrixXd& sq, const IndexOptions& opts = {});

struct ProfilePoint {
  double t = 0.0;
  std::optional<int> index;  // n_-(I_t restricted to K_t)
  bool degenerate = false;   // I_t degenerate on K_t (t focal)
  std::string note;
};

// i(t) on the sub-intervals [a, t], each discretised with m elements.
std::vector<ProfilePoint> index_profile(const SystemData& sys, const Distribution& d,
                                        const std::vector<double>& times, int m = 64);

struct SharpReport {
  int lhs = 0;            // n_-(I# restricted to K#)
  int n_minus_K = 0;      // fixed-endpoint value
  int boundary_term = 0;  // n_-(theta - phi_{L1,L0}(l(b)))
  bool holds = false;
  int intersection_dim = 0;  // dim(K# cap S#)
  int k = 0;
  bool form_nondegenerate = false;
  int kernel_dim = 0;  // dim ker(I# restricted to K#)
  int mesh = 0;
};

SharpReport sharp_decomposition_check(const SystemData& sys, const Distribution& d, const MatrixXd& theta,
                                      const IndexOptions& opts = {});

// theta = phi_{L1,L0}(L*) for a Lagrangian L* transverse to l(b) and L0.
MatrixXd complement_theta(const FundamentalSolution& fs);

}  // namespace morse
