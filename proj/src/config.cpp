#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

// pchip.hpp in Boost 1.74 calls isnan unqualified; boost::math::isnan makes it resolve.
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>

#include "morse/errors.hpp"
#include "morse/report.hpp"

namespace morse {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kParse, where + ": " + what);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) parse_error(where, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) parse_error(where, "expected an integer");
  return j.get<int>();
}

MatrixXd matrix(const json& j, const std::string& where) {
  if (!j.is_array()) parse_error(where, "expected an array of rows");
  const int rows = j.size();
  if (rows == 0) return MatrixXd(0, 0);
  if (!j[0].is_array()) parse_error(where, "expected an array of rows");
  const int cols = j[0].size();
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) parse_error(where, "ragged rows");
    for (int c = 0; c < cols; ++c) m(i, c) = number(j[i][c], where);
  }
  return m;
}

std::vector<MatrixXd> matrices(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) parse_error(where, "expected a non-empty array of matrices");
  std::vector<MatrixXd> out;
  for (size_t i = 0; i < j.size(); ++i) out.push_back(matrix(j[i], where + "[" + std::to_string(i) + "]"));
  for (const auto& m : out)
    if (m.rows() != out[0].rows() || m.cols() != out[0].cols()) parse_error(where, "matrices differ in shape");
  return out;
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) parse_error(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x, where));
  return out;
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) parse_error(where, std::string("missing key '") + key + "'");
  return j.at(key);
}

// Vectors listed as rows, returned as the columns of an n x k matrix.
Subspace span_of(const json& j, int n, const std::string& where) {
  if (j.is_string() && j.get<std::string>() == "all") return Subspace::whole(n);
  MatrixXd rows = matrix(j, where);
  if (rows.size() == 0) return Subspace::zero(n);
  if (rows.cols() != n) parse_error(where, "vectors must have length n");
  return Subspace(MatrixXd(rows.transpose()));
}

MatrixFn polynomial(std::vector<MatrixXd> coefs) {
  return [coefs = std::move(coefs)](double t) {
    MatrixXd acc = coefs.back();
    for (int i = static_cast<int>(coefs.size()) - 2; i >= 0; --i) acc = (acc * t + coefs[i]).eval();
    return acc;
  };
}

MatrixFn polynomial_derivative(const std::vector<MatrixXd>& coefs) {
  std::vector<MatrixXd> d;
  for (size_t i = 1; i < coefs.size(); ++i) d.push_back(static_cast<double>(i) * coefs[i]);
  if (d.empty()) d.push_back(MatrixXd::Zero(coefs[0].rows(), coefs[0].cols()));
  return polynomial(std::move(d));
}

// Entrywise interpolation of matrix samples: piecewise-cubic Hermite (pchip)
// or linear. Arguments outside the node range are clamped.
MatrixFn interpolate(const std::vector<double>& nodes, const std::vector<MatrixXd>& values,
                     const std::string& kind, const std::string& where) {
  if (nodes.size() != values.size()) parse_error(where, "one matrix per node is required");
  if (nodes.size() < 2) parse_error(where, "at least two nodes are required");
  for (size_t i = 1; i < nodes.size(); ++i)
    if (!(nodes[i] > nodes[i - 1])) parse_error(where, "nodes must increase");
  const int rows = values[0].rows(), cols = values[0].cols();
  const double lo = nodes.front(), hi = nodes.back();
  if (kind == "linear") {
    return [nodes, values, lo, hi](double t) {
      t = std::clamp(t, lo, hi);
      size_t i = std::upper_bound(nodes.begin(), nodes.end(), t) - nodes.begin();
      i = std::clamp<size_t>(i, 1, nodes.size() - 1);
      double w = (t - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
      return MatrixXd((1 - w) * values[i - 1] + w * values[i]);
    };
  }
  if (kind != "cubic") parse_error(where, "interpolation must be 'cubic' or 'linear'");
  if (nodes.size() < 4) parse_error(where, "cubic interpolation needs at least four nodes");
  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
  auto splines = std::make_shared<std::vector<Pchip>>();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::vector<double> x = nodes, y;
      for (const auto& v : values) y.push_back(v(r, c));
      splines->emplace_back(std::move(x), std::move(y));
    }
  return [splines, rows, cols, lo, hi](double t) {
    t = std::clamp(t, lo, hi);
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = (*splines)[r * cols + c](t);
    return m;
  };
}

MatrixXd diag_metric(int n_plus, int n_minus) {
  VectorXd d(n_plus + n_minus);
  d << VectorXd::Ones(n_plus), -VectorXd::Ones(n_minus);
  return d.asDiagonal();
}

MatrixFn constant_fn(const MatrixXd& m) {
  return [m](double) { return m; };
}

struct Built {
  SystemData system;
  std::optional<Distribution> distribution;  // generator-supplied default
};

InitialData initial_from(const json& doc, int n) {
  if (!doc.contains("initial")) return InitialData::zero(n);
  const json& init = doc.at("initial");
  Subspace p = init.contains("P") ? span_of(init.at("P"), n, "initial.P") : Subspace::zero(n);
  MatrixXd s = init.contains("S") ? matrix(init.at("S"), "initial.S") : MatrixXd::Zero(p.dim(), p.dim());
  if (s.size() == 0) s = MatrixXd::Zero(p.dim(), p.dim());
  if (s.rows() != p.dim() || s.cols() != p.dim()) parse_error("initial.S", "must be dim(P) x dim(P)");
  return {p, s};
}

Built morse_sturm(double a, double b, const MatrixXd& g, MatrixFn r, const json& doc) {
  MorseSturm ms{a, b, g, std::move(r), initial_from(doc, g.rows())};
  return {to_symplectic(ms), std::nullopt};
}

BuiltinGenerator generator_from(const std::string& s) {
  if (s == "constant_curvature") return BuiltinGenerator::kConstantCurvature;
  if (s == "product") return BuiltinGenerator::kProduct;
  if (s == "lorentzian_causal") return BuiltinGenerator::kLorentzianCausal;
  if (s == "jacobi_frame") return BuiltinGenerator::kJacobiFrame;
  if (s == "custom_polynomial") return BuiltinGenerator::kCustomPolynomial;
  parse_error("system.builtin", "unknown generator '" + s + "'");
}

double param(const json& sys, const char* key, double def) {
  return sys.contains(key) ? number(sys.at(key), std::string("system.") + key) : def;
}

int iparam(const json& sys, const char* key, int def) {
  return sys.contains(key) ? integer(sys.at(key), std::string("system.") + key) : def;
}

Built builtin(const json& sys, double a, double b, const json& doc) {
  if (!sys.at("builtin").is_string()) parse_error("system.builtin", "expected a string");
  switch (generator_from(sys.at("builtin").get<std::string>())) {
    case BuiltinGenerator::kConstantCurvature: {
      int n = iparam(sys, "n", 1), neg = iparam(sys, "negative", 0);
      if (n < 1 || neg < 0 || neg > n) parse_error("system", "need n >= 1 and 0 <= negative <= n");
      double c = param(sys, "curvature", 1.0);
      return morse_sturm(a, b, diag_metric(n - neg, neg), constant_fn(-c * MatrixXd::Identity(n, n)), doc);
    }
    case BuiltinGenerator::kProduct: {
      int np = iparam(sys, "n_plus", 1), nm = iparam(sys, "n_minus", 1);
      if (np < 1 || nm < 1) parse_error("system", "product needs n_plus, n_minus >= 1");
      double cp = param(sys, "curvature_plus", 1.0), cm = param(sys, "curvature_minus", 1.0);
      VectorXd r(np + nm);
      r << -cp * VectorXd::Ones(np), -cm * VectorXd::Ones(nm);
      return morse_sturm(a, b, diag_metric(np, nm), constant_fn(r.asDiagonal()), doc);
    }
    case BuiltinGenerator::kLorentzianCausal: {
      // Spacelike directions curve, the timelike direction is flat, so the
      // reduced form vanishes along D = span(e_n).
      int n = iparam(sys, "n", 2);
      if (n < 2) parse_error("system.n", "must be at least 2");
      double c = param(sys, "curvature", 1.0);
      VectorXd r = VectorXd::Zero(n);
      r.head(n - 1).setConstant(-c);
      return morse_sturm(a, b, diag_metric(n - 1, 1), constant_fn(r.asDiagonal()), doc);
    }
    case BuiltinGenerator::kJacobiFrame: {
      double c = param(sys, "curvature", 1.0), s = param(sys, "coupling", 0.2);
      MatrixXd r(2, 2);
      r << -c, s, -s, c;
      MatrixXd g = diag_metric(1, 1);
      Built out = morse_sturm(a, b, g, constant_fn(r), doc);
      // D spanned by the Jacobi field with Y(a) = e_2, Y'(a) = 0.
      SystemData jac = out.system;
      jac.init = InitialData::whole(2);
      auto fs = std::make_shared<FundamentalSolution>(jac, IntegrationOptions{});
      VectorXd start(4);
      start << 0, 1, 0, 0;
      Distribution d;
      d.k = 1;
      d.Y = [fs, start](double t) { return MatrixXd(fs->psi_at(t).topRows(2) * start); };
      d.dY = [fs, start, g](double t) { return MatrixXd(g.inverse() * fs->psi_at(t).bottomRows(2) * start); };
      out.distribution = d;
      return out;
    }
    case BuiltinGenerator::kCustomPolynomial: {
      MatrixXd g = matrix(require(sys, "g", "system"), "system.g");
      auto r = matrices(require(sys, "R", "system"), "system.R");
      if (g.rows() == 0 || g.rows() != g.cols() || r[0].rows() != g.rows() || r[0].cols() != g.rows())
        parse_error("system", "g and R must be n x n");
      return morse_sturm(a, b, g, polynomial(r), doc);
    }
  }
  parse_error("system.builtin", "unhandled generator");
}

Built table(const json& tab, double a, double b, const json& doc) {
  const std::string where = "system.table";
  std::string kind = require(tab, "kind", where).get<std::string>();
  std::vector<double> nodes = numbers(require(tab, "nodes", where), where + ".nodes");
  std::string interp = tab.contains("interpolation") ? tab.at("interpolation").get<std::string>() : "cubic";
  if (nodes.front() > a || nodes.back() < b) parse_error(where, "nodes must cover the interval");
  if (kind == "morse_sturm") {
    MatrixXd g = matrix(require(tab, "g", where), where + ".g");
    auto rs = matrices(require(tab, "R", where), where + ".R");
    const int n = g.rows();
    if (n == 0 || g.cols() != n || rs[0].rows() != n || rs[0].cols() != n) parse_error(where, "g and R must be n x n");
    // Interpolate g R, which is symmetric, and recover R from it.
    std::vector<MatrixXd> grs;
    for (const auto& r : rs) grs.push_back(g * r);
    MatrixFn gr = interpolate(nodes, grs, interp, where + ".R");
    MatrixXd ginv = g.inverse();
    return morse_sturm(a, b, g, [gr, ginv](double t) { return MatrixXd(ginv * gr(t)); }, doc);
  }
  if (kind == "symplectic") {
    auto as = matrices(require(tab, "A", where), where + ".A");
    auto bs = matrices(require(tab, "B", where), where + ".B");
    auto cs = matrices(require(tab, "C", where), where + ".C");
    const int n = as[0].rows();
    for (const auto* v : {&as, &bs, &cs})
      if ((*v)[0].rows() != n || (*v)[0].cols() != n) parse_error(where, "A, B, C must be n x n");
    SystemData sys;
    sys.coeffs.a = a;
    sys.coeffs.b = b;
    sys.coeffs.n = n;
    sys.coeffs.A = interpolate(nodes, as, interp, where + ".A");
    sys.coeffs.B = interpolate(nodes, bs, interp, where + ".B");
    sys.coeffs.C = interpolate(nodes, cs, interp, where + ".C");
    sys.coeffs.validate();
    sys.init = initial_from(doc, n);
    initial_index(sys);
    return {sys, std::nullopt};
  }
  parse_error(where + ".kind", "must be 'morse_sturm' or 'symplectic'");
}

Distribution auto_distribution(const SystemData& sys) {
  // Negative eigenvectors of B(a)^-1, held constant.
  SymForm binv(sys.coeffs.B(sys.a()).inverse());
  const int k = binv.inertia().n_minus;
  return Distribution::constant(binv.eigenvectors().leftCols(k));
}

OutputKind output_from(const std::string& s) {
  if (s == "maslov") return OutputKind::kMaslov;
  if (s == "focal") return OutputKind::kFocal;
  if (s == "index-theorem") return OutputKind::kIndexTheorem;
  if (s == "profile") return OutputKind::kProfile;
  if (s == "jump-validator") return OutputKind::kJumpValidator;
  parse_error("outputs", "unknown output '" + s + "'");
}

}  // namespace

RunConfig parse_config(const json& doc, const Overrides& ov) {
  if (!doc.is_object()) parse_error("document", "expected an object");
  RunConfig cfg;
  cfg.name = doc.contains("name") ? doc.at("name").get<std::string>() : "run";
  cfg.seed = doc.contains("seed") ? doc.at("seed").get<std::uint64_t>() : 0;
  if (ov.seed) cfg.seed = *ov.seed;

  if (doc.contains("outputs")) {
    for (const auto& o : doc.at("outputs")) {
      if (!o.is_string()) parse_error("outputs", "expected strings");
      cfg.outputs.push_back(output_from(o.get<std::string>()));
    }
  } else {
    cfg.outputs = {OutputKind::kMaslov, OutputKind::kFocal, OutputKind::kIndexTheorem};
  }
  bool needs_system = false;
  for (auto o : cfg.outputs) needs_system = needs_system || o != OutputKind::kJumpValidator;

  if (doc.contains("mesh")) cfg.index.mesh = integer(doc.at("mesh"), "mesh");
  if (doc.contains("mesh_max")) cfg.index.mesh_max = integer(doc.at("mesh_max"), "mesh_max");
  if (doc.contains("steps")) cfg.index.integration.steps = integer(doc.at("steps"), "steps");
  if (ov.mesh) cfg.index.mesh = *ov.mesh;
  if (ov.steps) cfg.index.integration.steps = *ov.steps;
  cfg.index.mesh_max = std::max(cfg.index.mesh_max, 2 * cfg.index.mesh);
  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    if (t.contains("crossing")) cfg.index.focal.crossing.crossing_tol = number(t.at("crossing"), "tolerances.crossing");
    if (t.contains("drift")) cfg.index.integration.drift_bound = number(t.at("drift"), "tolerances.drift");
    if (t.contains("time")) cfg.index.focal.crossing.time_tol_rel = number(t.at("time"), "tolerances.time");
  }
  if (ov.tol) cfg.index.focal.crossing.crossing_tol = *ov.tol;
  cfg.index.focal.crossing.seed = cfg.seed;

  if (needs_system) {
    const json& iv = require(doc, "interval", "document");
    std::vector<double> ab = numbers(iv, "interval");
    if (ab.size() != 2 || !(ab[1] > ab[0])) parse_error("interval", "expected [a, b] with a < b");
    const json& sys = require(doc, "system", "document");
    Built built;
    if (sys.contains("builtin"))
      built = builtin(sys, ab[0], ab[1], doc);
    else if (sys.contains("table"))
      built = table(sys.at("table"), ab[0], ab[1], doc);
    else
      parse_error("system", "expected 'builtin' or 'table'");
    cfg.system = built.system;
    const int n = cfg.system.n();

    std::string dtype = "auto";
    const json* dj = doc.contains("distribution") ? &doc.at("distribution") : nullptr;
    if (dj) dtype = require(*dj, "type", "distribution").get<std::string>();
    if (dtype == "auto") {
      cfg.distribution = built.distribution ? *built.distribution : auto_distribution(cfg.system);
    } else if (dtype == "constant") {
      Subspace y = span_of(require(*dj, "vectors", "distribution"), n, "distribution.vectors");
      cfg.distribution = Distribution::constant(y.basis());
    } else if (dtype == "polynomial") {
      auto coefs = matrices(require(*dj, "coefficients", "distribution"), "distribution.coefficients");
      if (coefs[0].rows() != n) parse_error("distribution.coefficients", "frames must have n rows");
      cfg.distribution.k = coefs[0].cols();
      cfg.distribution.dY = polynomial_derivative(coefs);
      cfg.distribution.Y = polynomial(coefs);
    } else {
      parse_error("distribution.type", "must be 'auto', 'constant' or 'polynomial'");
    }
    validate_distribution(cfg.system, cfg.distribution);

    if (doc.contains("endpoint")) {
      const json& e = doc.at("endpoint");
      cfg.q = span_of(require(e, "Q", "endpoint"), n, "endpoint.Q");
      cfg.sq = e.contains("SQ") ? matrix(e.at("SQ"), "endpoint.SQ") : MatrixXd::Zero(cfg.q->dim(), cfg.q->dim());
      if (cfg.sq.size() == 0) cfg.sq = MatrixXd::Zero(cfg.q->dim(), cfg.q->dim());
      if (cfg.sq.rows() != cfg.q->dim() || cfg.sq.cols() != cfg.q->dim())
        parse_error("endpoint.SQ", "must be dim(Q) x dim(Q)");
    }
    if (doc.contains("profile")) {
      const json& p = doc.at("profile");
      if (p.contains("times")) cfg.profile_times = numbers(p.at("times"), "profile.times");
      int points = p.contains("points") ? integer(p.at("points"), "profile.points") : 0;
      for (int i = 1; i <= points; ++i)
        cfg.profile_times.push_back(ab[0] + (ab[1] - ab[0]) * i / points);
      if (p.contains("mesh")) cfg.profile_mesh = integer(p.at("mesh"), "profile.mesh");
    }
    if (cfg.profile_times.empty())
      for (int i = 1; i <= 8; ++i) cfg.profile_times.push_back(ab[0] + (ab[1] - ab[0]) * i / 8);
  }

  for (auto o : cfg.outputs) {
    if (o != OutputKind::kJumpValidator) continue;
    const json& jj = require(doc, "jump", "document");
    std::vector<double> iv = numbers(require(jj, "interval", "jump"), "jump.interval");
    if (iv.size() != 2 || !(iv[1] > iv[0])) parse_error("jump.interval", "expected [a, b] with a < b");
    JumpRequest req;
    req.curve.t_start = iv[0];
    req.curve.t_end = iv[1];
    req.t0 = number(require(jj, "t0", "jump"), "jump.t0");
    auto b = matrices(require(jj, "B", "jump"), "jump.B");
    if (b[0].rows() != b[0].cols()) parse_error("jump.B", "forms must be square");
    req.curve.form = polynomial(b);
    if (jj.contains("F")) {
      auto f = matrices(jj.at("F"), "jump.F");
      if (f[0].cols() != b[0].rows()) parse_error("jump.F", "F must have N columns");
      req.curve.constraint = polynomial(f);
    }
    cfg.jump = req;
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const Overrides& ov) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kParse, path + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
  try {
    RunConfig cfg = parse_config(doc, ov);
    if (!doc.contains("name")) cfg.name = path;
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
}

}  // namespace morse
