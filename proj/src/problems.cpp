#include "mlsas/problems.hpp"

#include "detail.hpp"
#include "mlsas/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace mlsas {

namespace {

std::uint64_t next_problem_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

Vector geometric_spectrum(Index n, double cond) {
  Vector sigma(n);
  if (n == 1) {
    sigma(0) = 1.0;
    return sigma;
  }
  for (Index i = 0; i < n; ++i) {
    sigma(i) = std::pow(cond, -static_cast<double>(i) / static_cast<double>(n - 1));
  }
  sigma(0) = 1.0;
  sigma(n - 1) = 1.0 / cond;
  return sigma;
}

Vector make_rhs(const Matrix& a, double noise, std::uint64_t seed) {
  auto g_engine = make_engine(seed, {purpose::problem_g, 0, 0});
  auto h_engine = make_engine(seed, {purpose::problem_h, 0, 0});
  const Vector g = detail::gaussian_vector(a.cols(), g_engine);
  const Vector h = detail::gaussian_vector(a.rows(), h_engine);
  return a * g + noise * h;
}

std::string trim(const std::string& s) {
  const auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  const auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return first < last ? std::string(first, last) : std::string();
}

bool parse_double(const std::string& token, double& out) {
  const std::string t = trim(token);
  if (t.empty()) return false;
  std::istringstream in(t);
  in >> out;
  return !in.fail() && in.eof();
}

Matrix read_matrix_market(std::istream& in, const std::string& path) {
  std::string line;
  std::getline(in, line);
  std::string lower = line;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower.find("array") == std::string::npos || lower.find("real") == std::string::npos) {
    throw ParseError(path + ": only 'matrix array real' Matrix Market files are supported");
  }
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (!t.empty() && t[0] != '%') break;
  }
  std::istringstream dims(line);
  Index rows = 0, cols = 0;
  if (!(dims >> rows >> cols) || rows <= 0 || cols <= 0) {
    throw ParseError(path + ": bad Matrix Market size line");
  }
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      if (!(in >> out(i, j))) throw ParseError(path + ": truncated Matrix Market data");
    }
  }
  return out;
}

Matrix read_csv(std::istream& in, const std::string& path) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> values;
    std::stringstream fields(line);
    std::string field;
    bool numeric = true;
    while (std::getline(fields, field, ',')) {
      double v = 0.0;
      if (!parse_double(field, v)) {
        numeric = false;
        break;
      }
      values.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw ParseError(path + ": non-numeric field on line " + std::to_string(line_no));
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw ParseError(path + ": ragged row on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < out.rows(); ++i)
    for (Index j = 0; j < out.cols(); ++j) out(i, j) = rows[i][j];
  return out;
}

}  // namespace

void ProblemSpec::validate() const {
  if (kind == ProblemKind::file) {
    if (path.empty()) throw InvalidSpec("file problem needs a path");
    if (!(noise >= 0.0)) throw InvalidSpec("noise must be >= 0");
    return;
  }
  if (n < 1) throw InvalidSpec("n must be >= 1");
  if (m <= n) throw InvalidSpec("m must exceed n");
  if (!(cond >= 1.0) || !std::isfinite(cond)) throw InvalidSpec("cond must be finite and >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidSpec("noise must be finite and >= 0");
  if (kind == ProblemKind::coherent_spike) {
    if (spike_rows < 0 || spike_rows > m) throw InvalidSpec("spike_rows out of range");
    if (!(spike_scale > 0.0)) throw InvalidSpec("spike_scale must be positive");
  }
}

LSProblem::LSProblem(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)), id_(next_problem_id()) {
  if (a_.cols() < 1 || a_.rows() <= a_.cols()) throw InvalidSpec("problem needs m > n >= 1");
  if (b_.size() != a_.rows()) throw BadDimension("b length must equal rows of A");
  if (!a_.allFinite() || !b_.allFinite()) throw InvalidSpec("problem data must be finite");
}

LSProblem LSProblem::with_svd(ThinSVD svd) const {
  if (svd.u.rows() != rows() || svd.u.cols() != cols()) throw BadDimension("SVD shape mismatch");
  LSProblem out = *this;
  out.svd_ = std::move(svd);
  return out;
}

LSProblem LSProblem::with_references() const {
  LSProblem out = *this;
  if (!out.svd_) out.svd_ = thin_svd(a_);
  const ExactSolution exact = exact_solve(out);
  out.x_star_ = exact.x_star;
  out.residual_star_ = exact.residual_star;
  return out;
}

Matrix haar_orthonormal(Index m, Index n, std::uint64_t seed, std::uint32_t purpose_tag) {
  auto engine = make_engine(seed, {purpose_tag, 0, 0});
  // Nonnegative R diagonal makes Q exactly Haar distributed.
  return householder_qr(detail::gaussian_matrix(m, n, engine)).q_thin();
}

LSProblem generate(const ProblemSpec& spec) {
  spec.validate();
  if (spec.kind == ProblemKind::file) {
    Matrix data = read_dense_matrix(spec.path);
    if (spec.b_last_column) {
      if (data.cols() < 2) throw InvalidSpec(spec.path + ": need at least two columns");
      Vector b = data.col(data.cols() - 1);
      Matrix a = data.leftCols(data.cols() - 1);
      return LSProblem(std::move(a), std::move(b)).with_references();
    }
    Vector b = make_rhs(data, spec.noise, spec.seed);
    return LSProblem(std::move(data), std::move(b)).with_references();
  }

  Matrix u;
  if (spec.kind == ProblemKind::randsvd_haar) {
    u = haar_orthonormal(spec.m, spec.n, spec.seed, purpose::problem_u);
  } else {
    auto engine = make_engine(spec.seed, {purpose::problem_u, 0, 0});
    Matrix g = detail::gaussian_matrix(spec.m, spec.n, engine);
    const Index spikes = spec.spike_rows == 0 ? spec.n : spec.spike_rows;
    g.topRows(spikes) *= spec.spike_scale;
    u = householder_qr(std::move(g)).q_thin();
  }
  Matrix v = haar_orthonormal(spec.n, spec.n, spec.seed, purpose::problem_v);
  Vector sigma = geometric_spectrum(spec.n, spec.cond);

  Matrix a = u * sigma.asDiagonal() * v.transpose();
  Vector b = make_rhs(a, spec.noise, spec.seed);

  ThinSVD svd{std::move(u), std::move(sigma), std::move(v), false};
  return LSProblem(std::move(a), std::move(b)).with_svd(std::move(svd)).with_references();
}

double coherence(const LSProblem& problem) {
  if (!problem.svd()) throw MissingSVD("coherence requires a cached SVD");
  const Matrix& u = problem.svd()->u;
  const double max_row = u.rowwise().squaredNorm().maxCoeff();
  return static_cast<double>(u.rows()) / static_cast<double>(u.cols()) * max_row;
}

ExactSolution exact_solve(const LSProblem& problem) {
  const QRSolution sol = qr_solve(problem.a(), problem.b());
  return {sol.x, residual_norm(problem.a(), problem.b(), sol.x)};
}

double residual_norm(const LSProblem& problem, const Vector& x) {
  return residual_norm(problem.a(), problem.b(), x);
}

Matrix read_dense_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  const bool mtx_ext = path.size() >= 4 && path.compare(path.size() - 4, 4, ".mtx") == 0;
  const int first = in.peek();
  if (mtx_ext || first == '%') return read_matrix_market(in, path);
  return read_csv(in, path);
}

LSProblem load_problem(const std::string& path, const LoadOptions& options) {
  ProblemSpec spec;
  spec.kind = ProblemKind::file;
  spec.path = path;
  spec.b_last_column = options.b_last_column;
  spec.noise = 0.0;
  return generate(spec);
}

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::randsvd_haar: return "randsvd_haar";
    case ProblemKind::coherent_spike: return "coherent_spike";
    case ProblemKind::file: return "file";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(const std::string& text) {
  if (text == "randsvd_haar") return ProblemKind::randsvd_haar;
  if (text == "coherent_spike") return ProblemKind::coherent_spike;
  if (text == "file") return ProblemKind::file;
  throw InvalidSpec("unknown problem kind '" + text + "'");
}

}  // namespace mlsas
