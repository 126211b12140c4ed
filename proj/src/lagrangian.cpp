#include "morse/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "morse/errors.hpp"

namespace morse {

MatrixXd symplectic_matrix(int n) {
  MatrixXd j = MatrixXd::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n).setIdentity();
  j.bottomLeftCorner(n, n) = -MatrixXd::Identity(n, n);
  return j;
}

double isotropy_residual(const MatrixXd& frame) {
  const int n = frame.cols();
  MatrixXd x = frame.topRows(n), y = frame.bottomRows(n);
  double scale = std::max(1.0, frame.squaredNorm() / std::max(n, 1));
  return max_abs(x.transpose() * y - y.transpose() * x) / scale;
}

MatrixXd orthonormalize(const MatrixXd& frame) {
  Eigen::HouseholderQR<MatrixXd> qr(frame);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(frame.rows(), frame.cols());
  MatrixXd r = qr.matrixQR().topRows(frame.cols()).triangularView<Eigen::Upper>();
  // Fix the sign so that the result depends continuously on the input.
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q;
}

LagrangianFrame::LagrangianFrame(const MatrixXd& frame, double tol) : frame_(frame) {
  if (frame.rows() != 2 * frame.cols() || frame.cols() == 0)
    throw Error(ErrorKind::kInvalidInput, "LagrangianFrame: frame must be 2n x n");
  if (!frame.allFinite())
    throw Error(ErrorKind::kInvalidInput, "LagrangianFrame: non-finite entries");
  if (numerical_rank(frame, 1e-12) != frame.cols())
    throw Error(ErrorKind::kInvalidInput, "LagrangianFrame: frame is rank deficient");
  double iso = morse::isotropy_residual(frame);
  if (iso > tol)
    throw Error(ErrorKind::kInvalidInput,
                "LagrangianFrame: frame is not isotropic (residual " + std::to_string(iso) + ")");
}

LagrangianFrame LagrangianFrame::from_blocks(const MatrixXd& x, const MatrixXd& y, double tol) {
  MatrixXd f(x.rows() + y.rows(), x.cols());
  f << x, y;
  return LagrangianFrame(f, tol);
}

LagrangianFrame LagrangianFrame::vertical(int n) {
  return from_blocks(MatrixXd::Zero(n, n), MatrixXd::Identity(n, n));
}

LagrangianFrame LagrangianFrame::horizontal(int n) {
  return from_blocks(MatrixXd::Identity(n, n), MatrixXd::Zero(n, n));
}

LagrangianFrame LagrangianFrame::graph(const MatrixXd& s) {
  return from_blocks(MatrixXd::Identity(s.rows(), s.cols()), 0.5 * (s + s.transpose()));
}

double LagrangianFrame::isotropy_residual() const { return morse::isotropy_residual(frame_); }

LagrangianFrame LagrangianFrame::orthonormalized() const {
  LagrangianFrame l;
  l.frame_ = orthonormalize(frame_);
  return l;
}

namespace {

double sigma_min(const MatrixXd& m) {
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues().size() ? svd.singularValues().tail(1)(0) : 0.0;
}

double transversality_frames(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd ab(a.rows(), a.cols() + b.cols());
  ab << orthonormalize(a), orthonormalize(b);
  return sigma_min(ab);
}

void require_same_n(const LagrangianFrame& a, const LagrangianFrame& b, const char* who) {
  if (a.n() != b.n()) throw Error(ErrorKind::kInvalidInput, std::string(who) + ": dimension mismatch");
}

void require_complementary(const LagrangianFrame& a, const LagrangianFrame& b, const char* who) {
  require_same_n(a, b, who);
  if (transversality(a, b) < 1e-12)
    throw Error(ErrorKind::kNotTransverse, std::string(who) + ": subspaces are not complementary");
}

// Coordinates of `f` in the splitting base1 + base2: f = F1 A + F2 Bm.
struct Split {
  MatrixXd a;
  MatrixXd bm;
};

Split split(const LagrangianFrame& base1, const LagrangianFrame& base2, const MatrixXd& f) {
  const int n = base1.n();
  MatrixXd basis(2 * n, 2 * n);
  basis << base1.frame(), base2.frame();
  MatrixXd c = basis.partialPivLu().solve(f);
  return {c.topRows(n), c.bottomRows(n)};
}

}  // namespace

double transversality(const LagrangianFrame& a, const LagrangianFrame& b) {
  require_same_n(a, b, "transversality");
  return transversality_frames(a.frame(), b.frame());
}

int intersection_dim(const LagrangianFrame& a, const LagrangianFrame& b, double tol) {
  require_same_n(a, b, "intersection_dim");
  MatrixXd ab(2 * a.n(), 2 * a.n());
  ab << orthonormalize(a.frame()), orthonormalize(b.frame());
  Eigen::JacobiSVD<MatrixXd> svd(ab);
  int k = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] < tol) ++k;
  return k;
}

MatrixXd iota_matrix(const LagrangianFrame& l0, const LagrangianFrame& l1) {
  require_complementary(l0, l1, "iota");
  return l1.frame().transpose() * symplectic_matrix(l0.n()) * l0.frame();
}

VectorXd iota(const LagrangianFrame& l0, const LagrangianFrame& l1, const VectorXd& coords) {
  MatrixXd k = iota_matrix(l0, l1);
  if (coords.size() != k.rows()) throw Error(ErrorKind::kInvalidInput, "iota: dimension mismatch");
  return k.transpose() * coords;
}

SymForm chart(const LagrangianFrame& l0, const LagrangianFrame& l1, const LagrangianFrame& l) {
  require_complementary(l0, l1, "chart");
  require_same_n(l0, l, "chart");
  if (transversality(l, l1) < 1e-12)
    throw Error(ErrorKind::kNotTransverse, "chart: L is not transverse to L1");
  Split s = split(l0, l1, l.frame());
  MatrixXd t = s.a.transpose().partialPivLu().solve(s.bm.transpose()).transpose();  // Bm A^-1
  MatrixXd k = l1.frame().transpose() * symplectic_matrix(l0.n()) * l0.frame();
  return SymForm(t.transpose() * k);
}

Inertia chart_difference_inertia(const LagrangianFrame& l1, const LagrangianFrame& l0,
                                 const MatrixXd& l_frame, const MatrixXd& theta) {
  Split s = split(l1, l0, l_frame);
  MatrixXd k = l0.frame().transpose() * symplectic_matrix(l0.n()) * l1.frame();
  MatrixXd m = s.bm.transpose() * k * s.a - s.a.transpose() * theta * s.a;
  return SymForm(m).inertia();
}

LagrangianFrame find_common_complement(const LagrangianFrame& la, const LagrangianFrame& lb,
                                       const std::vector<LagrangianFrame>& also,
                                       const ComplementOptions& opts) {
  require_same_n(la, lb, "find_common_complement");
  const int n = la.n();
  std::vector<MatrixXd> targets{orthonormalize(la.frame()), orthonormalize(lb.frame())};
  for (const auto& l : also) {
    require_same_n(la, l, "find_common_complement");
    targets.push_back(orthonormalize(l.frame()));
  }
  auto score = [&](const LagrangianFrame& c) {
    MatrixXd qc = orthonormalize(c.frame());
    double worst = INFINITY;
    MatrixXd ab(2 * n, 2 * n);
    for (const auto& q : targets) {
      ab << q, qc;
      worst = std::min(worst, sigma_min(ab));
    }
    return worst;
  };

  LagrangianFrame best;
  double best_score = -1.0;
  auto consider = [&](const LagrangianFrame& c) {
    double s = score(c);
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  };
  for (double c : {1.0, -1.0, 2.0, -2.0, 4.0, -4.0, 8.0, -8.0})
    consider(LagrangianFrame::graph(c * MatrixXd::Identity(n, n)));
  // The scaled identities are enough in the generic case.
  if (best_score < 1e-3) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    for (int k = 0; k < opts.random_attempts; ++k) {
      MatrixXd s(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = normal(rng);
      consider(LagrangianFrame::graph(s));
    }
  }
  if (best_score < opts.min_transversality)
    throw Error(ErrorKind::kSearchExhausted,
                "find_common_complement: no candidate transverse to all targets (best "
                + std::to_string(best_score) + " over " + std::to_string(8 + opts.random_attempts)
                + " candidates)");
  return best;
}

std::vector<double> LagrangianPath::grid() const {
  if (!nodes.empty()) return nodes;
  std::vector<double> g(samples + 1);
  for (int i = 0; i <= samples; ++i) g[i] = t_start + (t_end - t_start) * i / samples;
  g.back() = t_end;
  return g;
}

namespace {

class CrossingFinder {
 public:
  CrossingFinder(const LagrangianPath& path, const LagrangianFrame& l0, const CrossingOptions& opts)
      : path_(path), l0_(l0), opts_(opts), n_(l0.n()) {
    copts_.seed = opts.seed;
    l1_ = find_common_complement(l0, l0, {}, copts_);
    MatrixXd basis(2 * n_, 2 * n_);
    basis << l1_.frame(), l0.frame();
    lu_ = basis.partialPivLu();
    time_tol_ = opts.time_tol_rel * std::abs(path.t_end - path.t_start);
  }

  // L1-block of the orthonormalised frame; singular iff the frame meets L0.
  MatrixXd a_block(const MatrixXd& frame) const {
    return lu_.solve(orthonormalize(frame)).topRows(n_);
  }
  double sigma(double t) const { return sigma_min(a_block(path_.frame(t))); }

  std::vector<CrossingRecord> run() const {
    const std::vector<double> g = path_.grid();
    const int last = static_cast<int>(g.size()) - 1;
    if (last < 2) throw Error(ErrorKind::kInvalidInput, "maslov_index: path needs at least 3 samples");
    std::vector<double> s(g.size());
    for (int j = 0; j <= last; ++j) s[j] = sigma(g[j]);
    if (s[0] <= opts_.crossing_tol || s[last] <= opts_.crossing_tol)
      throw Error(ErrorKind::kNotTransverse, "maslov_index: path endpoint is not transverse to L0");

    std::vector<double> times;
    auto search = [&](double lo, double hi) {
      for (double t : localise(lo, hi)) times.push_back(t);
    };
    if (s[0] <= 0.5 * s[1]) search(g[0], g[1]);
    for (int j = 1; j < last; ++j) {
      bool local_min = s[j] <= s[j - 1] && s[j] <= s[j + 1];
      if (local_min && s[j] <= 0.5 * std::max(s[j - 1], s[j + 1])) search(g[j - 1], g[j + 1]);
    }
    if (s[last] <= 0.5 * s[last - 1]) search(g[last - 1], g[last]);

    std::sort(times.begin(), times.end());
    std::vector<double> uniq;
    for (double t : times)
      if (uniq.empty() || t - uniq.back() > 4 * time_tol_) uniq.push_back(t);
    for (double t : uniq)
      if (t - path_.t_start <= 4 * time_tol_ || path_.t_end - t <= 4 * time_tol_)
        throw Error(ErrorKind::kNotTransverse, "maslov_index: crossing at a path endpoint");

    std::vector<CrossingRecord> out;
    for (size_t i = 0; i < uniq.size(); ++i) {
      const double t = uniq[i];
      // Local grid spacing around t.
      auto it = std::upper_bound(g.begin(), g.end(), t);
      int j = std::clamp(static_cast<int>(it - g.begin()), 1, last);
      double delta = g[j] - g[j - 1];
      double left = std::max(t - delta, path_.t_start);
      double right = std::min(t + delta, path_.t_end);
      if (i > 0) left = std::max(left, 0.5 * (uniq[i - 1] + t));
      if (i + 1 < uniq.size()) right = std::min(right, 0.5 * (t + uniq[i + 1]));
      out.push_back(contribution(t, left, right));
    }
    return out;
  }

 private:
  // Crossing instants inside [lo, hi], located by golden-section minimisation
  // of sigma_min started from every discrete minimum of a finer sampling.
  std::vector<double> localise(double lo, double hi) const {
    const int m = std::max(opts_.subsamples, 2);
    std::vector<double> ts(m + 1), ss(m + 1);
    for (int i = 0; i <= m; ++i) {
      ts[i] = lo + (hi - lo) * i / m;
      ss[i] = sigma(ts[i]);
    }
    std::vector<double> found;
    for (int i = 0; i <= m; ++i) {
      bool lmin = (i == 0 || ss[i] <= ss[i - 1]) && (i == m || ss[i] <= ss[i + 1]);
      if (!lmin) continue;
      double a = ts[std::max(i - 1, 0)], b = ts[std::min(i + 1, m)];
      double t = golden(a, b);
      if (sigma(t) <= opts_.crossing_tol) found.push_back(t);
    }
    return found;
  }

  double golden(double a, double b) const {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = sigma(c), fd = sigma(d);
    while (b - a > 2 * time_tol_) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - r * (b - a);
        fc = sigma(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + r * (b - a);
        fd = sigma(d);
      }
    }
    return 0.5 * (a + b);
  }

  CrossingRecord contribution(double t, double left, double right) const {
    CrossingRecord rec;
    rec.t = t;
    rec.half_width = time_tol_;
    rec.left = left;
    rec.right = right;
    MatrixXd a = a_block(path_.frame(t));
    Eigen::JacobiSVD<MatrixXd> svd(a);
    rec.sigma_min = svd.singularValues().tail(1)(0);
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] < opts_.mult_tol) ++rec.dim_intersection;

    MatrixXd fl = path_.frame(left), fr = path_.frame(right);
    if (sigma_min(a_block(fl)) <= opts_.crossing_tol || sigma_min(a_block(fr)) <= opts_.crossing_tol)
      throw Error(ErrorKind::kUnresolvedCrossing,
                  "maslov_index: crossings near t=" + std::to_string(t) + " cannot be separated");
    // L* must stay transverse to the curve over the whole evaluation window.
    std::vector<LagrangianFrame> window;
    const int probes = 8;
    for (int i = 0; i <= probes; ++i) {
      double s = left + (right - left) * i / probes;
      window.push_back(LagrangianFrame(orthonormalize(path_.frame(s)), 1e-6));
    }
    LagrangianFrame lt(orthonormalize(path_.frame(t)), 1e-6);
    LagrangianFrame l_star = find_common_complement(lt, l0_, window, copts_);
    MatrixXd theta = chart(l1_, l0_, l_star).matrix();
    Inertia after = chart_difference_inertia(l1_, l0_, fr, theta);
    Inertia before = chart_difference_inertia(l1_, l0_, fl, theta);
    if (!after.nondegenerate() || !before.nondegenerate())
      throw Error(ErrorKind::kUnresolvedCrossing, "maslov_index: chart difference is degenerate");
    rec.contribution = after.n_minus - before.n_minus;
    return rec;
  }

  const LagrangianPath& path_;
  const LagrangianFrame& l0_;
  CrossingOptions opts_;
  ComplementOptions copts_;
  int n_;
  LagrangianFrame l1_;
  Eigen::PartialPivLU<MatrixXd> lu_;
  double time_tol_ = 0.0;
};

}  // namespace

std::vector<CrossingRecord> find_crossings(const LagrangianPath& path, const LagrangianFrame& l0,
                                           const CrossingOptions& opts) {
  if (!path.frame) throw Error(ErrorKind::kInvalidInput, "maslov_index: path has no sampler");
  if (!(path.t_end > path.t_start)) throw Error(ErrorKind::kInvalidInput, "maslov_index: empty interval");
  return CrossingFinder(path, l0, opts).run();
}

int maslov_index(const LagrangianPath& path, const LagrangianFrame& l0, const CrossingOptions& opts) {
  int mu = 0;
  for (const auto& c : find_crossings(path, l0, opts)) mu += c.contribution;
  return mu;
}

TechLemmaCheck verify_tech_lemma(const LagrangianFrame& l, const LagrangianFrame& l_star,
                                 const LagrangianFrame& l0, const LagrangianFrame& l1) {
  require_same_n(l, l_star, "verify_tech_lemma");
  require_same_n(l0, l1, "verify_tech_lemma");
  require_same_n(l, l0, "verify_tech_lemma");
  const double tol = 1e-8;
  if (transversality(l0, l1) < tol || transversality(l, l0) < tol ||
      transversality(l_star, l0) < tol || transversality(l_star, l) < tol)
    throw Error(ErrorKind::kHypothesis,
                "verify_tech_lemma: L0+L1, L+L0, L*+L0 and L*+L must all be direct sums");
  MatrixXd lhs = chart(l1, l0, l_star).matrix() - chart(l1, l0, l).matrix();
  SymForm phi = chart(l0, l_star, l);
  MatrixXd k = iota_matrix(l0, l1);
  MatrixXd rhs = k * phi.matrix().partialPivLu().solve(k.transpose());
  TechLemmaCheck out;
  out.residual = max_abs(lhs - rhs);
  out.lhs = SymForm(lhs).inertia();
  out.chart = phi.inertia();
  out.n_plus_equal = out.lhs.n_plus == out.chart.n_plus;
  return out;
}

}  // namespace morse
