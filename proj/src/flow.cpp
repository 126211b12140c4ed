#include "morse/flow.hpp"

#include <algorithm>
#include <cmath>

#include "morse/errors.hpp"

namespace morse {

FundamentalSolution::FundamentalSolution(const SystemData& sys, const IntegrationOptions& opts)
    : sys_(sys) {
  if (opts.steps < 4) throw Error(ErrorKind::kInvalidInput, "integrate: need at least 4 steps");
  sys_.coeffs.validate();
  initial_index(sys_);
  int steps = opts.steps;
  for (int attempt = 0;; ++attempt) {
    steps_ = steps;
    reorth_ = std::max(opts.reorthonormalize_every, 1);
    run(steps);
    doublings_ = attempt;
    if (max_drift_ <= opts.drift_bound) return;
    if (attempt >= opts.max_doublings) break;
    steps *= 2;
  }
  throw Error(ErrorKind::kDriftExceeded,
              "integrate: symplectic drift " + std::to_string(max_drift_) + " exceeds bound after "
                  + std::to_string(opts.max_doublings) + " grid doublings");
}

MatrixXd FundamentalSolution::step(const MatrixXd& m, double t, double dt) const {
  const CoefficientPath& c = sys_.coeffs;
  MatrixXd x0 = c.generator(t), xm = c.generator(t + 0.5 * dt), x1 = c.generator(t + dt);
  MatrixXd k1 = x0 * m;
  MatrixXd k2 = xm * (m + 0.5 * dt * k1);
  MatrixXd k3 = xm * (m + 0.5 * dt * k2);
  MatrixXd k4 = x1 * (m + dt * k3);
  return m + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void FundamentalSolution::run(int steps) {
  const int n = sys_.n();
  const double a = sys_.a(), b = sys_.b();
  h_ = (b - a) / steps;
  grid_.resize(steps + 1);
  for (int j = 0; j <= steps; ++j) grid_[j] = a + h_ * j;
  grid_.back() = b;
  psi_.assign(steps + 1, MatrixXd());
  frame_.assign(steps + 1, MatrixXd());

  const MatrixXd j2n = symplectic_matrix(n);
  MatrixXd state(2 * n, 3 * n);
  state << MatrixXd::Identity(2 * n, 2 * n), orthonormalize(sys_.init.frame().frame());
  max_drift_ = 0.0;
  max_isotropy_ = 0.0;
  for (int j = 0;; ++j) {
    psi_[j] = state.leftCols(2 * n);
    frame_[j] = state.rightCols(n);
    double scale = std::max(1.0, psi_[j].squaredNorm() / (2 * n));
    max_drift_ = std::max(max_drift_, max_abs(psi_[j].transpose() * j2n * psi_[j] - j2n) / scale);
    max_isotropy_ = std::max(max_isotropy_, isotropy_residual(frame_[j]));
    if (j == steps) break;
    state = step(state, grid_[j], grid_[j + 1] - grid_[j]);
    if ((j + 1) % reorth_ == 0) state.rightCols(n) = orthonormalize(state.rightCols(n));
  }
}

int FundamentalSolution::node_before(double t) const {
  if (t < grid_.front() - 1e-12 * (1 + std::abs(grid_.front())) ||
      t > grid_.back() + 1e-12 * (1 + std::abs(grid_.back())))
    throw Error(ErrorKind::kInvalidInput, "FundamentalSolution: t outside [a, b]");
  int j = static_cast<int>(std::floor((t - grid_.front()) / h_));
  return std::clamp(j, 0, steps_);
}

MatrixXd FundamentalSolution::psi_at(double t) const {
  int j = node_before(t);
  double dt = t - grid_[j];
  if (dt == 0.0 || j == steps_) return psi_[j];
  return step(psi_[j], grid_[j], dt);
}

MatrixXd FundamentalSolution::frame_at(double t) const {
  int j = node_before(t);
  double dt = t - grid_[j];
  if (dt == 0.0 || j == steps_) return orthonormalize(frame_[j]);
  return orthonormalize(step(frame_[j], grid_[j], dt));
}

FundamentalSolution integrate(const SystemData& sys, const IntegrationOptions& opts) {
  return FundamentalSolution(sys, opts);
}

namespace {

double sigma_min_x(const MatrixXd& frame) {
  const int n = frame.cols();
  Eigen::JacobiSVD<MatrixXd> svd(frame.topRows(n));
  return svd.singularValues()(n - 1);
}

}  // namespace

SystemAnalysis analyze_system(const FundamentalSolution& fs, const FocalOptions& opts) {
  const SystemData& sys = fs.system();
  const int n = sys.n();
  const auto& grid = fs.grid();
  const int last = fs.steps();
  const double tol = opts.crossing.crossing_tol;

  if (sigma_min_x(fs.frame_at(sys.b())) <= tol)
    throw Error(ErrorKind::kFocalEndpoint, "focal_instants: b is a focal instant");

  // Start at a when l(a) is transverse to L0; otherwise at the first node,
  // after checking that l(t) moves away from L0 over the first few nodes.
  int j0 = 0;
  if (sigma_min_x(fs.frame_at(sys.a())) <= tol) {
    const int w = std::min(std::max(opts.initial_window, 2), last);
    double prev = 0.0;
    for (int j = 1; j <= w; ++j) {
      double s = sigma_min_x(orthonormalize(fs.frame_node(j)));
      if (!(s > prev) || s <= tol)
        throw Error(ErrorKind::kSearchExhausted,
                    "focal_instants: no epsilon with ]a, a+epsilon] free of focal instants");
      prev = s;
    }
    j0 = 1;
  }

  LagrangianPath path;
  path.t_start = grid[j0];
  path.t_end = sys.b();
  path.nodes.assign(grid.begin() + j0, grid.end());
  path.frame = [&fs](double t) { return fs.frame_at(t); };

  SystemAnalysis out;
  out.maslov.epsilon = grid[j0] - sys.a();
  out.maslov.crossings = find_crossings(path, LagrangianFrame::vertical(n), opts.crossing);
  for (const auto& c : out.maslov.crossings) {
    out.maslov.maslov += c.contribution;
    FocalInstant f;
    f.t = c.t;
    f.multiplicity = c.dim_intersection;
    f.maslov_contribution = c.contribution;

    MatrixXd q = fs.frame_at(c.t);
    MatrixXd x = q.topRows(n), y = q.bottomRows(n);
    Eigen::JacobiSVD<MatrixXd> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const int r = n - f.multiplicity;
    // {alpha_v(t) : v(t) = 0} is spanned by Y on ker X.
    MatrixXd alphas = y * svd.matrixV().rightCols(f.multiplicity);
    SymForm b_on(alphas.transpose() * sys.coeffs.B(c.t) * alphas);
    f.signature = b_on.inertia().signature();
    f.nondegenerate = b_on.inertia().nondegenerate();
    if (sys.metric) {
      SymForm g(*sys.metric);
      Subspace jt = r ? Subspace(svd.matrixU().leftCols(r)) : Subspace::zero(n);
      Subspace perp = orthogonal_complement(g, jt);
      f.metric_signature = perp.dim() ? restrict(g, perp).inertia().signature() : 0;
    }
    out.focal.push_back(f);
  }
  return out;
}

std::vector<FocalInstant> focal_instants(const FundamentalSolution& fs, const FocalOptions& opts) {
  return analyze_system(fs, opts).focal;
}

int focal_index(const std::vector<FocalInstant>& focal) {
  int s = 0;
  for (const auto& f : focal) {
    if (!f.nondegenerate)
      throw Error(ErrorKind::kDegenerate, "focal_index: degenerate focal instant at t=" + std::to_string(f.t));
    s += f.signature;
  }
  return s;
}

MaslovResult maslov_index_of_system(const FundamentalSolution& fs, const FocalOptions& opts) {
  return analyze_system(fs, opts).maslov;
}

MatrixXd endpoint_chart(const FundamentalSolution& fs) {
  const int n = fs.system().n();
  MatrixXd q = fs.frame_at(fs.system().b());
  MatrixXd x = q.topRows(n), y = q.bottomRows(n);
  if (sigma_min_x(q) <= 1e-7) throw Error(ErrorKind::kFocalEndpoint, "endpoint_chart: b is focal");
  MatrixXd m = -y * x.inverse();
  return 0.5 * (m + m.transpose());
}

}  // namespace morse
