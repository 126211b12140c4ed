#pragma once

#include <optional>
#include <vector>

#include "morse/lagrangian.hpp"
#include "morse/systems.hpp"

namespace morse {

struct IntegrationOptions {
  int steps = 2048;
  int reorthonormalize_every = 64;
  double drift_bound = 1e-8;
  int max_doublings = 3;
};

// Psi' = X(t) Psi, Psi(a) = I, by classical RK4 on a uniform grid, together
// with the frame of l(t) = Psi(t) l0 propagated separately and
// re-orthonormalised periodically. Values between nodes come from one RK4
// sub-step from the preceding node.
class FundamentalSolution {
 public:
  FundamentalSolution(const SystemData& sys, const IntegrationOptions& opts);

  const SystemData& system() const { return sys_; }
  int steps() const { return steps_; }
  const std::vector<double>& grid() const { return grid_; }
  double step_size() const { return h_; }

  MatrixXd psi_at(double t) const;
  MatrixXd frame_at(double t) const;  // orthonormal frame of l(t)
  const MatrixXd& psi_node(int j) const { return psi_[j]; }
  const MatrixXd& frame_node(int j) const { return frame_[j]; }

  // max over nodes of ||Psi^T J Psi - J||_inf / max(1, ||Psi||^2).
  double max_drift() const { return max_drift_; }
  double max_isotropy() const { return max_isotropy_; }
  int doublings() const { return doublings_; }

 private:
  void run(int steps);
  MatrixXd step(const MatrixXd& m, double t, double dt) const;
  int node_before(double t) const;

  SystemData sys_;
  int steps_ = 0;
  int reorth_ = 64;
  double h_ = 0.0;
  std::vector<double> grid_;
  std::vector<MatrixXd> psi_;
  std::vector<MatrixXd> frame_;
  double max_drift_ = 0.0;
  double max_isotropy_ = 0.0;
  int doublings_ = 0;
};

FundamentalSolution integrate(const SystemData& sys, const IntegrationOptions& opts = {});

struct FocalInstant {
  double t = 0.0;
  int multiplicity = 0;
  int signature = 0;
  bool nondegenerate = false;
  int maslov_contribution = 0;
  std::optional<int> metric_signature;  // sgn(g on J[t]^perp), Morse-Sturm only
};

struct FocalOptions {
  CrossingOptions crossing;
  int initial_window = 4;  // nodes over which the start of l(t) must be clean
};

// Focal instants in ]a, b]. Throws kFocalEndpoint if b is focal.
std::vector<FocalInstant> focal_instants(const FundamentalSolution& fs, const FocalOptions& opts = {});

// Sum of signatures; throws kDegenerate if some instant is degenerate.
int focal_index(const std::vector<FocalInstant>& focal);

struct MaslovResult {
  int maslov = 0;
  double epsilon = 0.0;  // l is evaluated on [a + epsilon, b]
  std::vector<CrossingRecord> crossings;
};

MaslovResult maslov_index_of_system(const FundamentalSolution& fs, const FocalOptions& opts = {});

struct SystemAnalysis {
  MaslovResult maslov;
  std::vector<FocalInstant> focal;
};

// Both of the above from a single crossing search.
SystemAnalysis analyze_system(const FundamentalSolution& fs, const FocalOptions& opts = {});

// phi_{L1,L0}(l(b)) = -Y X^-1 for L1 = R^n + {0}, L0 = {0} + R^n*.
MatrixXd endpoint_chart(const FundamentalSolution& fs);

}  // namespace morse
