#include "morse/index_fem.hpp"

#include <cmath>

#include "morse/errors.hpp"

namespace morse {

Mesh::Mesh(double a_, double b_, int m_) : a(a_), b(b_), m(m_) {
  if (m < 2) throw Error(ErrorKind::kInvalidInput, "Mesh: need at least 2 elements");
  if (!(b > a)) throw Error(ErrorKind::kInvalidInput, "Mesh: need a < b");
  nodes.resize(m + 1);
  for (int j = 0; j <= m; ++j) nodes[j] = a + (b - a) * j / m;
  nodes.back() = b;
}

DiscreteSpace::DiscreteSpace(const Mesh& mesh_, int n_, const MatrixXd& start, const MatrixXd& end)
    : mesh(mesh_), n(n_), start_basis(start), end_basis(end), identity_(MatrixXd::Identity(n_, n_)) {
  if (start.rows() != n || end.rows() != n)
    throw Error(ErrorKind::kInvalidInput, "DiscreteSpace: endpoint bases must have n rows");
  offsets.resize(mesh.m + 2);
  offsets[0] = 0;
  for (int j = 0; j <= mesh.m; ++j) offsets[j + 1] = offsets[j] + node_basis(j).cols();
}

const MatrixXd& DiscreteSpace::node_basis(int node) const {
  if (node == 0) return start_basis;
  if (node == mesh.m) return end_basis;
  return identity_;
}

DiscreteSpace DiscreteSpace::fixed_end(const Mesh& mesh, const Subspace& p) {
  return DiscreteSpace(mesh, p.ambient_dim(), p.basis(), MatrixXd(p.ambient_dim(), 0));
}

DiscreteSpace DiscreteSpace::free_end(const Mesh& mesh, const Subspace& p) {
  const int n = p.ambient_dim();
  return DiscreteSpace(mesh, n, p.basis(), MatrixXd::Identity(n, n));
}

DiscreteSpace DiscreteSpace::subspace_end(const Mesh& mesh, const Subspace& p, const Subspace& q) {
  if (q.ambient_dim() != p.ambient_dim())
    throw Error(ErrorKind::kInvalidInput, "DiscreteSpace: Q has wrong ambient dimension");
  return DiscreteSpace(mesh, p.ambient_dim(), p.basis(), q.basis());
}

MatrixXd assemble_index_form(const SystemData& sys, const DiscreteSpace& space,
                             const std::optional<MatrixXd>& end_form) {
  const int n = space.n;
  if (n != sys.n()) throw Error(ErrorKind::kInvalidInput, "assemble_index_form: dimension mismatch");
  const Mesh& mesh = space.mesh;
  const int dim = space.dim();
  MatrixXd m = MatrixXd::Zero(dim, dim);

  const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const CoefficientPath& c = sys.coeffs;
  for (int e = 0; e < mesh.m; ++e) {
    const double t0 = mesh.nodes[e], t1 = mesh.nodes[e + 1], h = t1 - t0;
    MatrixXd ke = MatrixXd::Zero(2 * n, 2 * n);
    for (int q = 0; q < 3; ++q) {
      const double t = t0 + 0.5 * h * (1.0 + gx[q]);
      const double w = 0.5 * h * gw[q];
      const double pl = 0.5 * (1.0 - gx[q]), pr = 0.5 * (1.0 + gx[q]);
      MatrixXd nmat(n, 2 * n), dmat(n, 2 * n);
      nmat << pl * MatrixXd::Identity(n, n), pr * MatrixXd::Identity(n, n);
      dmat << -MatrixXd::Identity(n, n) / h, MatrixXd::Identity(n, n) / h;
      dmat -= c.A(t) * nmat;
      MatrixXd binv = c.B(t).inverse();
      ke += w * (dmat.transpose() * binv * dmat + nmat.transpose() * c.C(t) * nmat);
    }
    const int nodes[2] = {e, e + 1};
    for (int r = 0; r < 2; ++r)
      for (int s = 0; s < 2; ++s) {
        const MatrixXd& er = space.node_basis(nodes[r]);
        const MatrixXd& es = space.node_basis(nodes[s]);
        if (er.cols() == 0 || es.cols() == 0) continue;
        m.block(space.offset(nodes[r]), space.offset(nodes[s]), er.cols(), es.cols()) +=
            er.transpose() * ke.block(r * n, s * n, n, n) * es;
      }
  }
  const int p = space.start_basis.cols();
  if (p) {
    if (sys.init.S.rows() != p || sys.init.P.dim() != p)
      throw Error(ErrorKind::kInvalidInput, "assemble_index_form: start basis must be the basis of P");
    m.topLeftCorner(p, p) -= 0.5 * (sys.init.S + sys.init.S.transpose());
  }
  if (end_form) {
    const int q = space.end_basis.cols();
    if (end_form->rows() != q || end_form->cols() != q)
      throw Error(ErrorKind::kInvalidInput, "assemble_index_form: end form has the wrong size");
    m.bottomRightCorner(q, q) += 0.5 * (*end_form + end_form->transpose());
  }
  return 0.5 * (m + m.transpose());
}

MatrixXd build_S_subspace(const Distribution& d, const DiscreteSpace& space, bool include_end) {
  const int m = space.mesh.m;
  const int k = d.k;
  const int extra = include_end ? k : 0;
  if (include_end && space.end_basis.cols() != space.n)
    throw Error(ErrorKind::kInvalidInput, "build_S_subspace: end fields need a free endpoint");
  MatrixXd s = MatrixXd::Zero(space.dim(), k * (m - 1) + extra);
  if (k == 0) return s;
  int col = 0;
  for (int j = 1; j < m; ++j) {
    MatrixXd y = d.Y(space.mesh.nodes[j]);
    for (int i = 0; i < k; ++i) s.block(space.offset(j), col++, space.n, 1) = y.col(i);
  }
  if (include_end) {
    MatrixXd y = d.Y(space.mesh.b);
    for (int i = 0; i < k; ++i) s.block(space.offset(m), col++, space.n, 1) = y.col(i);
  }
  return s;
}

MatrixXd build_K_subspace(const MatrixXd& form, const MatrixXd& s_basis) {
  const int dim = form.rows();
  const int r = s_basis.cols();
  if (r == 0) return MatrixXd::Identity(dim, dim);
  SymForm on_s(s_basis.transpose() * form * s_basis);
  if (!on_s.inertia().nondegenerate())
    throw Error(ErrorKind::kDegenerate,
                "build_K_subspace: index form is degenerate on S (b is focal for the reduced system)");
  // I|S nondegenerate makes S^T I surjective, so its kernel has dim - r columns.
  MatrixXd rows = s_basis.transpose() * form;
  Eigen::BDCSVD<MatrixXd> svd(rows, Eigen::ComputeFullV);
  return svd.matrixV().rightCols(dim - r);
}

namespace {

struct MeshTerms {
  std::vector<int> ints;
  int n_minus_K = 0, n_plus_S = 0;
  int n_minus_K_fixed = 0;
  int dim_H = 0, dim_K = 0, dim_S = 0;
  double orthogonality = 0.0;
};

MeshTerms fixed_terms(const SystemData& sys, const Distribution& d, int m) {
  DiscreteSpace space = DiscreteSpace::fixed_end(Mesh(sys.a(), sys.b(), m), sys.init.P);
  MatrixXd form = assemble_index_form(sys, space);
  MatrixXd s = build_S_subspace(d, space);
  MatrixXd k = build_K_subspace(form, s);
  MeshTerms out;
  out.n_minus_K = SymForm(k.transpose() * form * k).inertia().n_minus;
  out.n_plus_S = s.cols() ? SymForm(s.transpose() * form * s).inertia().n_plus : 0;
  out.dim_H = space.dim();
  out.dim_K = k.cols();
  out.dim_S = s.cols();
  out.orthogonality = s.cols() ? max_abs(k.transpose() * form * s) / std::max(max_abs(form), 1e-300) : 0.0;
  out.ints = {out.n_minus_K, out.n_plus_S};
  return out;
}

template <class F>
std::pair<MeshTerms, int> refine(const IndexOptions& opts, F&& terms) {
  int m = opts.mesh;
  MeshTerms cur = terms(m);
  while (true) {
    if (2 * m > opts.mesh_max)
      throw Error(ErrorKind::kNonConvergence,
                  "index terms differ between meshes " + std::to_string(m / 2) + " and " + std::to_string(m)
                      + " at the maximal refinement");
    MeshTerms next = terms(2 * m);
    if (next.ints == cur.ints) return {cur, 2 * m};
    m *= 2;
    cur = next;
  }
}

IndexReport flow_part(const SystemData& sys, const Distribution& d, const IndexOptions& opts,
                      FundamentalSolution& fs) {
  IndexReport rep;
  rep.n_minus_gP = initial_index(sys);
  SystemAnalysis an = analyze_system(fs, opts.focal);
  rep.maslov = an.maslov.maslov;
  rep.focal = an.focal;
  bool all_nondegenerate = true;
  for (const auto& f : an.focal) all_nondegenerate = all_nondegenerate && f.nondegenerate;
  if (all_nondegenerate) rep.focal_index = focal_index(an.focal);
  rep.diagnostics.drift = fs.max_drift();
  rep.diagnostics.isotropy = fs.max_isotropy();
  rep.diagnostics.epsilon = an.maslov.epsilon;
  if (opts.reduced_cross_check && d.k > 0) {
    FundamentalSolution fr = integrate(reduced_system(sys, d), opts.integration);
    int count = 0;
    for (const auto& f : focal_instants(fr, opts.focal)) count += f.multiplicity;
    rep.diagnostics.n_plus_S_reduced_flow = count;
  }
  return rep;
}

void fill_mesh_diagnostics(IndexReport& rep, const MeshTerms& t, int mesh) {
  rep.diagnostics.mesh = mesh;
  rep.diagnostics.converged = true;
  rep.diagnostics.dim_H = t.dim_H;
  rep.diagnostics.dim_K = t.dim_K;
  rep.diagnostics.dim_S = t.dim_S;
  rep.diagnostics.orthogonality = t.orthogonality;
}

}  // namespace

IndexReport index_terms(const SystemData& sys, const Distribution& d, const IndexOptions& opts) {
  validate_distribution(sys, d);
  FundamentalSolution fs = integrate(sys, opts.integration);
  IndexReport rep = flow_part(sys, d, opts, fs);
  auto [terms, mesh] = refine(opts, [&](int m) { return fixed_terms(sys, d, m); });
  rep.n_minus_K = terms.n_minus_K;
  rep.n_plus_S = terms.n_plus_S;
  fill_mesh_diagnostics(rep, terms, mesh);
  rep.identity_residual = rep.maslov - (rep.n_minus_K - rep.n_plus_S - rep.n_minus_gP);
  return rep;
}

IndexReport variable_endpoint_terms(const SystemData& sys, const Distribution& d, const Subspace& q,
                                    const MatrixXd& sq, const IndexOptions& opts) {
  validate_distribution(sys, d);
  if (q.ambient_dim() != sys.n()) throw Error(ErrorKind::kInvalidInput, "variable endpoint: Q has wrong ambient dimension");
  if (sq.rows() != q.dim() || sq.cols() != q.dim())
    throw Error(ErrorKind::kInvalidInput, "variable endpoint: S^Q must be dim(Q) x dim(Q)");
  FundamentalSolution fs = integrate(sys, opts.integration);
  IndexReport rep = flow_part(sys, d, opts, fs);
  MatrixXd s_gamma = endpoint_chart(fs);
  rep.q_term = SymForm(sq - q.basis().transpose() * s_gamma * q.basis()).inertia().n_minus;

  auto terms = [&](int m) {
    MeshTerms fixed = fixed_terms(sys, d, m);
    DiscreteSpace space = DiscreteSpace::subspace_end(Mesh(sys.a(), sys.b(), m), sys.init.P, q);
    MatrixXd form = assemble_index_form(sys, space, sq);
    MatrixXd s = build_S_subspace(d, space);
    MatrixXd k = build_K_subspace(form, s);
    MeshTerms out = fixed;
    out.n_minus_K_fixed = fixed.n_minus_K;
    out.n_minus_K = SymForm(k.transpose() * form * k).inertia().n_minus;
    out.dim_H = space.dim();
    out.dim_K = k.cols();
    out.orthogonality = s.cols() ? max_abs(k.transpose() * form * s) / std::max(max_abs(form), 1e-300) : 0.0;
    out.ints = {out.n_minus_K, out.n_plus_S, out.n_minus_K_fixed};
    return out;
  };
  auto [t, mesh] = refine(opts, terms);
  rep.n_minus_K = t.n_minus_K;
  rep.n_minus_K_fixed = t.n_minus_K_fixed;
  rep.n_minus_JQ = t.n_minus_K - t.n_minus_K_fixed;
  rep.n_plus_S = t.n_plus_S;
  fill_mesh_diagnostics(rep, t, mesh);
  rep.identity_residual = rep.maslov - (rep.n_minus_K - rep.n_plus_S - rep.n_minus_gP - *rep.q_term);
  return rep;
}

namespace {

// Smallest singular value of the X block of l(t); zero exactly at focal t.
double focal_gap(const FundamentalSolution& fs, double t) {
  const int n = fs.system().n();
  Eigen::JacobiSVD<MatrixXd> svd(fs.frame_at(t).topRows(n));
  return svd.singularValues()(n - 1);
}

}  // namespace

std::vector<ProfilePoint> index_profile(const SystemData& sys, const Distribution& d,
                                        const std::vector<double>& times, int m) {
  validate_distribution(sys, d);
  // The discrete forms are only O(h^2) close to degenerate at a focal t, so
  // focal times are recognised from the flows instead.
  const double gap_tol = 1e-6;
  FundamentalSolution fs = integrate(sys);
  std::optional<FundamentalSolution> fr;
  if (d.k > 0) fr.emplace(integrate(reduced_system(sys, d)));
  std::vector<ProfilePoint> out;
  for (double t : times) {
    ProfilePoint pt;
    pt.t = t;
    if (!(t > sys.a()) || t > sys.b()) {
      pt.note = "outside ]a, b]";
      out.push_back(pt);
      continue;
    }
    if (fr && focal_gap(*fr, t) < gap_tol) {
      pt.degenerate = true;
      pt.note = "reduced system focal at t";
      out.push_back(pt);
      continue;
    }
    SystemData sub = sys;
    sub.coeffs.b = t;
    DiscreteSpace space = DiscreteSpace::fixed_end(Mesh(sys.a(), t, m), sys.init.P);
    MatrixXd form = assemble_index_form(sub, space);
    MatrixXd s = build_S_subspace(d, space);
    try {
      MatrixXd k = build_K_subspace(form, s);
      Inertia in = SymForm(k.transpose() * form * k).inertia();
      pt.index = in.n_minus;
      pt.degenerate = !in.nondegenerate() || focal_gap(fs, t) < gap_tol;
      if (pt.degenerate) pt.note = "focal instant";
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerate) throw;
      pt.degenerate = true;
      pt.note = "reduced system focal at t";
    }
    out.push_back(pt);
  }
  return out;
}

MatrixXd complement_theta(const FundamentalSolution& fs) {
  const int n = fs.system().n();
  LagrangianFrame lb(fs.frame_at(fs.system().b()), 1e-6);
  LagrangianFrame v = LagrangianFrame::vertical(n);
  LagrangianFrame l_star = find_common_complement(lb, v);
  return chart(LagrangianFrame::horizontal(n), v, l_star).matrix();
}

SharpReport sharp_decomposition_check(const SystemData& sys, const Distribution& d, const MatrixXd& theta,
                                      const IndexOptions& opts) {
  validate_distribution(sys, d);
  const int n = sys.n();
  if (theta.rows() != n || theta.cols() != n)
    throw Error(ErrorKind::kInvalidInput, "sharp_decomposition_check: theta must be n x n");
  FundamentalSolution fs = integrate(sys, opts.integration);
  SharpReport rep;
  rep.k = d.k;
  rep.boundary_term = SymForm(theta - endpoint_chart(fs)).inertia().n_minus;

  auto terms = [&](int m) {
    MeshTerms fixed = fixed_terms(sys, d, m);
    DiscreteSpace space = DiscreteSpace::free_end(Mesh(sys.a(), sys.b(), m), sys.init.P);
    MatrixXd form = assemble_index_form(sys, space, theta);
    MatrixXd s = build_S_subspace(d, space);
    MatrixXd s_sharp = build_S_subspace(d, space, true);
    MatrixXd k = build_K_subspace(form, s);
    Inertia on_k = SymForm(k.transpose() * form * k).inertia();
    MeshTerms out;
    out.n_minus_K = on_k.n_minus;
    out.n_minus_K_fixed = fixed.n_minus_K;
    int inter = d.k ? intersection_dim(k, s_sharp, 1e-9) : 0;
    int nondeg = SymForm(form).inertia().nondegenerate() ? 1 : 0;
    out.ints = {on_k.n_minus, fixed.n_minus_K, inter, nondeg, on_k.dgn};
    return out;
  };
  auto [t, mesh] = refine(opts, terms);
  rep.lhs = t.ints[0];
  rep.n_minus_K = t.ints[1];
  rep.intersection_dim = t.ints[2];
  rep.form_nondegenerate = t.ints[3] == 1;
  rep.kernel_dim = t.ints[4];
  rep.mesh = mesh;
  rep.holds = rep.lhs == rep.n_minus_K + rep.boundary_term;
  return rep;
}

}  // namespace morse
