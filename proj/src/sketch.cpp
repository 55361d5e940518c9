#include "mlsas/sketch.hpp"

#include "mlsas/errors.hpp"
#include "mlsas/linalg.hpp"
#include "mlsas/rng.hpp"
#include "mlsas/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mlsas {

namespace {

constexpr Index kGaussianChunk = 64;

Matrix gather(const SketchOperator& op, const Matrix& source, Index first_col, Index cols) {
  Matrix out(op.rows(), cols);
  for (Index k = 0; k < op.rows(); ++k) {
    out.row(k) = op.row_scale(k) * source.row(op.selected_row(k)).segment(first_col, cols);
  }
  return out;
}

bool is_mixing(SketchKind kind) { return kind == SketchKind::srht || kind == SketchKind::srtt; }

Index ceil_log2(Index v) {
  Index bits = 0;
  while ((Index{1} << bits) < v) ++bits;
  return std::max<Index>(bits, 1);
}

}  // namespace

// ---------------------------------------------------------------- family

std::string SketchFamily::name() const {
  switch (kind) {
    case SketchKind::gaussian: return "gaussian";
    case SketchKind::srht: return "srht";
    case SketchKind::srtt: return "srtt";
    case SketchKind::uniform: return with_replacement ? "uniform" : "uniform_wor";
    case SketchKind::leverage: {
      std::string out = "leverage";
      if (source == ScoreSource::augmented_ab) out += "_aug";
      if (weighted) out += "_weighted";
      return out;
    }
  }
  return "unknown";
}

SketchFamily SketchFamily::parse(const std::string& text) {
  SketchFamily f;
  if (text == "gaussian") {
    f.kind = SketchKind::gaussian;
  } else if (text == "uniform") {
    f.kind = SketchKind::uniform;
  } else if (text == "uniform_wor") {
    f.kind = SketchKind::uniform;
    f.with_replacement = false;
  } else if (text == "srht") {
    f.kind = SketchKind::srht;
  } else if (text == "srtt") {
    f.kind = SketchKind::srtt;
  } else if (text.rfind("leverage", 0) == 0) {
    f.kind = SketchKind::leverage;
    std::string rest = text.substr(8);
    if (rest.rfind("_aug", 0) == 0) {
      f.source = ScoreSource::augmented_ab;
      rest = rest.substr(4);
    }
    if (rest == "_weighted") {
      f.weighted = true;
    } else if (!rest.empty()) {
      throw InvalidSpec("unknown sketch family '" + text + "'");
    }
  } else {
    throw InvalidSpec("unknown sketch family '" + text + "'");
  }
  return f;
}

bool SketchFamily::samples_without_replacement() const {
  return is_mixing(kind) || (kind == SketchKind::uniform && !with_replacement);
}

std::string to_string(SketchKind kind) {
  return SketchFamily{kind, true, ScoreSource::plain_a, false}.name();
}

// ---------------------------------------------------------------- context

std::shared_ptr<const SketchContext> SketchContext::create(const SketchFamily& family, Index m,
                                                           std::uint64_t seed) {
  if (family.kind == SketchKind::leverage) {
    throw MissingContext("leverage sampling needs the problem to compute scores");
  }
  if (m < 1) throw BadDimension("sketch source must have at least one row");
  std::shared_ptr<SketchContext> ctx(new SketchContext());
  ctx->family_ = family;
  ctx->m_ = m;
  ctx->selectable_ = family.kind == SketchKind::srht ? next_power_of_two(m) : m;
  ctx->init_mixing(seed);
  return ctx;
}

std::shared_ptr<const SketchContext> SketchContext::create(const SketchFamily& family,
                                                           const LSProblem& problem,
                                                           std::uint64_t seed) {
  const Index m = problem.rows();
  std::shared_ptr<SketchContext> ctx(new SketchContext());
  ctx->family_ = family;
  ctx->m_ = m;
  ctx->selectable_ = family.kind == SketchKind::srht ? next_power_of_two(m) : m;
  ctx->init_mixing(seed);
  ctx->bound_id_ = problem.id();

  if (family.kind == SketchKind::leverage) {
    if (family.source == ScoreSource::plain_a && problem.svd()) {
      ctx->scores_ = problem.svd()->u.rowwise().squaredNorm();
      ctx->probs_ = ctx->scores_ / ctx->scores_.sum();
    } else {
      LeverageScores ls = leverage_scores(problem.a(), family.source, problem.b());
      ctx->scores_ = std::move(ls.scores);
      ctx->probs_ = std::move(ls.probs);
    }
    ctx->cumulative_.resize(static_cast<std::size_t>(m));
    std::partial_sum(ctx->probs_.data(), ctx->probs_.data() + m, ctx->cumulative_.begin());
  }

  if (is_mixing(family.kind)) {
    const Index n = problem.cols();
    const bool basis = problem.svd().has_value();
    Matrix data(m, basis ? 2 * n + 1 : n + 1);
    data.leftCols(n) = problem.a();
    data.col(n) = problem.b();
    if (basis) data.rightCols(n) = problem.svd()->u;
    ctx->mixed_ = ctx->mix(data);
    ctx->caches_basis_ = basis;
  }
  return ctx;
}

void SketchContext::init_mixing(std::uint64_t seed) {
  if (!is_mixing(family_.kind)) return;
  auto engine = make_engine(seed, {purpose::context, 0, 0});
  std::bernoulli_distribution coin(0.5);
  signs_.resize(selectable_);
  for (Index i = 0; i < selectable_; ++i) signs_(i) = coin(engine) ? 1.0 : -1.0;
}

double SketchContext::row_weight(Index i) const {
  switch (family_.kind) {
    case SketchKind::gaussian: return 1.0;
    case SketchKind::uniform: return std::sqrt(static_cast<double>(m_));
    case SketchKind::srht:
    case SketchKind::srtt: return std::sqrt(static_cast<double>(selectable_));
    case SketchKind::leverage: {
      double w = 1.0 / std::sqrt(probs_(i));
      if (family_.weighted) w /= std::sqrt(scores_(i));
      return w;
    }
  }
  return 1.0;
}

Matrix SketchContext::mix(const Matrix& x) const {
  if (x.rows() != m_) throw BadDimension("mix: row count does not match the sketch source");
  if (!is_mixing(family_.kind)) return x;
  Matrix y = Matrix::Zero(selectable_, x.cols());
  y.topRows(m_) = signs_.head(m_).asDiagonal() * x;
  if (family_.kind == SketchKind::srht) {
    fwht_columns(y);
  } else {
    dct2_columns(y);
  }
  return y;
}

std::vector<Index> SketchContext::draw_rows(Index count, std::uint64_t seed) const {
  if (family_.kind == SketchKind::gaussian) return {};
  Philox4x32 engine(seed, 0);
  std::vector<Index> rows(static_cast<std::size_t>(count));

  if (family_.samples_without_replacement()) {
    if (count > selectable_) {
      throw BadDimension("cannot draw more rows than available without replacement");
    }
    std::vector<Index> perm(static_cast<std::size_t>(selectable_));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index k = 0; k < count; ++k) {
      std::uniform_int_distribution<Index> pick(k, selectable_ - 1);
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pick(engine))]);
      rows[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(k)];
    }
    return rows;
  }

  if (family_.kind == SketchKind::leverage) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double total = cumulative_.back();
    for (auto& r : rows) {
      const double u = unit(engine) * total;
      auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      if (it == cumulative_.end()) --it;
      r = static_cast<Index>(it - cumulative_.begin());
    }
    return rows;
  }

  std::uniform_int_distribution<Index> pick(0, m_ - 1);
  for (auto& r : rows) r = pick(engine);
  return rows;
}

// ---------------------------------------------------------------- draws

std::shared_ptr<const SketchDraws> SketchDraws::draw(std::shared_ptr<const SketchContext> context,
                                                     Index count, std::uint64_t seed) {
  std::shared_ptr<SketchDraws> d(new SketchDraws());
  d->rows_ = context->draw_rows(count, seed);
  d->context_ = std::move(context);
  d->count_ = count;
  d->gaussian_seed_ = seed;
  return d;
}

std::shared_ptr<const SketchDraws> SketchDraws::explicit_rows(
    std::shared_ptr<const SketchContext> context, std::vector<Index> rows) {
  if (context->family().kind == SketchKind::gaussian) {
    throw InvalidSpec("explicit row selection does not apply to gaussian sketches");
  }
  for (Index r : rows) {
    if (r < 0 || r >= context->selectable_rows()) throw BadDimension("explicit row out of range");
  }
  std::shared_ptr<SketchDraws> d(new SketchDraws());
  d->count_ = static_cast<Index>(rows.size());
  d->rows_ = std::move(rows);
  d->context_ = std::move(context);
  return d;
}

// ---------------------------------------------------------------- operator

SketchOperator::SketchOperator(std::shared_ptr<const SketchDraws> draws, Index offset, Index rows)
    : draws_(std::move(draws)), offset_(offset), rows_(rows) {
  if (rows_ < 1 || offset_ < 0 || offset_ + rows_ > draws_->count()) {
    throw BadDimension("operator slice exceeds the drawn rows");
  }
}

double SketchOperator::row_scale(Index k) const {
  const double inv_sqrt_s = 1.0 / std::sqrt(static_cast<double>(rows_));
  if (family().kind == SketchKind::gaussian) return inv_sqrt_s;
  return context().row_weight(selected_row(k)) * inv_sqrt_s;
}

Matrix SketchOperator::dense() const {
  return sketch_rows(*this, Matrix::Identity(source_rows(), source_rows()));
}

Matrix gaussian_block(const SketchOperator& op, Index first, Index count) {
  const Index m = op.source_rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(op.rows()));
  Matrix g(count, m);
  std::normal_distribution<double> normal;
  for (Index k = 0; k < count; ++k) {
    Philox4x32 engine(op.draws().gaussian_seed(),
                      static_cast<std::uint64_t>(op.offset() + first + k));
    for (Index j = 0; j < m; ++j) g(k, j) = normal(engine);
    normal.reset();
  }
  return g * scale;
}

Matrix sketch_rows(const SketchOperator& op, const Matrix& x) {
  if (x.rows() != op.source_rows()) throw BadDimension("sketch_rows: row count mismatch");
  const SketchKind kind = op.family().kind;
  if (kind == SketchKind::gaussian) {
    Matrix out(op.rows(), x.cols());
    for (Index r0 = 0; r0 < op.rows(); r0 += kGaussianChunk) {
      const Index cnt = std::min(kGaussianChunk, op.rows() - r0);
      out.middleRows(r0, cnt).noalias() = gaussian_block(op, r0, cnt) * x;
    }
    return out;
  }
  if (is_mixing(kind)) {
    const Matrix mixed = op.context().mix(x);
    return gather(op, mixed, 0, x.cols());
  }
  return gather(op, x, 0, x.cols());
}

Flops apply_cost(const SketchOperator& op, Index cols, bool cached) {
  const Index s = op.rows();
  const Index m = op.source_rows();
  switch (op.family().kind) {
    case SketchKind::gaussian: return Flops::whole(2 * s * m * cols);
    case SketchKind::uniform:
    case SketchKind::leverage: return Flops::whole(s * cols);
    case SketchKind::srht:
    case SketchKind::srtt: {
      const Index big = op.context().selectable_rows();
      const Index transform = cached ? 0 : big * cols * ceil_log2(big);
      return Flops::whole(transform + s * cols);
    }
  }
  return {};
}

SketchedSystem apply(const SketchOperator& op, const Matrix& a, const Vector& b) {
  const Index m = op.source_rows();
  if (a.rows() != m || b.size() != m) throw BadDimension("apply: data rows do not match sketch");
  const Index n = a.cols();
  SketchedSystem out;
  const SketchKind kind = op.family().kind;
  if (kind == SketchKind::uniform || kind == SketchKind::leverage) {
    out.sa.resize(op.rows(), n);
    out.sb.resize(op.rows());
    for (Index k = 0; k < op.rows(); ++k) {
      const Index r = op.selected_row(k);
      const double scale = op.row_scale(k);
      out.sa.row(k) = scale * a.row(r);
      out.sb(k) = scale * b(r);
    }
  } else {
    Matrix data(m, n + 1);
    data.leftCols(n) = a;
    data.col(n) = b;
    const Matrix sd = sketch_rows(op, data);
    out.sa = sd.leftCols(n);
    out.sb = sd.col(n);
  }
  out.apply_cost = apply_cost(op, n + 1, false);
  return out;
}

SketchedSystem apply(const SketchOperator& op, const LSProblem& problem) {
  if (is_mixing(op.family().kind) && op.context().bound_to(problem)) {
    const Index n = problem.cols();
    const Matrix sd = gather(op, op.context().mixed_cache(), 0, n + 1);
    SketchedSystem out;
    out.sa = sd.leftCols(n);
    out.sb = sd.col(n);
    out.apply_cost = apply_cost(op, n + 1, true);
    return out;
  }
  return apply(op, problem.a(), problem.b());
}

Matrix sketch_basis(const SketchOperator& op, const LSProblem& problem) {
  if (!problem.svd()) throw MissingSVD("sketch_basis requires a cached SVD");
  const Index n = problem.cols();
  if (is_mixing(op.family().kind) && op.context().bound_to(problem) && op.context().caches_basis()) {
    return gather(op, op.context().mixed_cache(), n + 1, n);
  }
  return sketch_rows(op, problem.svd()->u);
}

SketchOperator make_operator(const SketchFamily& family, Index s, Index m, std::uint64_t seed) {
  return draw_operator(SketchContext::create(family, m, seed), s, seed);
}

SketchOperator make_operator(const SketchFamily& family, Index s, const LSProblem& problem,
                             std::uint64_t seed) {
  return draw_operator(SketchContext::create(family, problem, seed), s, seed);
}

SketchOperator draw_operator(std::shared_ptr<const SketchContext> context, Index s,
                             std::uint64_t seed) {
  if (s < 1) throw BadDimension("sketch size must be positive");
  if (context->family().samples_without_replacement() && s > context->selectable_rows()) {
    throw BadDimension("sketch size exceeds rows available without replacement");
  }
  const std::uint64_t draw_seed = derive_seed(seed, {purpose::sample, 0, 0});
  return SketchOperator(SketchDraws::draw(std::move(context), s, draw_seed), 0, s);
}

Vector second_moment_diagonal(const SketchContext& context, Index s) {
  const Index m = context.source_rows();
  const double sd = static_cast<double>(s);
  Vector diag(m);
  switch (context.family().kind) {
    case SketchKind::gaussian:
      diag.setConstant(1.0);
      break;
    case SketchKind::uniform: {
      // expected number of times row i is picked, times its squared entry
      const double p_selected = sd / static_cast<double>(m);
      for (Index i = 0; i < m; ++i) {
        const double w = context.row_weight(i);
        diag(i) = p_selected * w * w / sd;
      }
      break;
    }
    case SketchKind::leverage:
      for (Index i = 0; i < m; ++i) {
        const double p = context.probabilities()(i);
        if (p <= 0.0) {
          diag(i) = 0.0;
          continue;
        }
        const double w = context.row_weight(i);
        diag(i) = sd * p * w * w / sd;
      }
      break;
    case SketchKind::srht:
    case SketchKind::srtt: {
      const double big = static_cast<double>(context.selectable_rows());
      const double w = context.row_weight(0);
      diag.setConstant((sd / big) * w * w / sd);
      break;
    }
  }
  return diag;
}

// ---------------------------------------------------------------- nesting

NestedSketch::NestedSketch(std::shared_ptr<const SketchContext> context, int max_level,
                           Index base_rows, std::uint64_t seed)
    : max_level_(max_level), base_rows_(base_rows) {
  if (max_level < 0) throw BadDimension("max level must be >= 0");
  if (base_rows < 1) throw BadDimension("base sketch size must be positive");
  draws_ = SketchDraws::draw(std::move(context), base_rows << max_level, seed);
}

SketchOperator NestedSketch::level(int level) const {
  if (level < 0 || level > max_level_) throw BadDimension("level outside the nested sketch");
  return SketchOperator(draws_, 0, rows_at(level));
}

std::pair<SketchOperator, SketchOperator> NestedSketch::split(int level) const {
  if (level < 0 || level > max_level_) throw BadDimension("level outside the nested sketch");
  if (rows_at(level) % 2 != 0) throw BadDimension("cannot split an odd number of rows");
  const Index half = rows_at(level) / 2;
  return {SketchOperator(draws_, 0, half), SketchOperator(draws_, half, half)};
}

NestedSketch make_nested(std::shared_ptr<const SketchContext> context, int max_level,
                         Index base_rows, std::uint64_t seed) {
  const Index top = base_rows << max_level;
  if (context->family().samples_without_replacement() && top > context->selectable_rows()) {
    throw LevelTooLarge("s_L = " + std::to_string(top) + " exceeds the " +
                        std::to_string(context->selectable_rows()) + " selectable rows");
  }
  return NestedSketch(std::move(context), max_level, base_rows, seed);
}

// ---------------------------------------------------------------- leverage

LeverageScores leverage_scores(const Matrix& a, ScoreSource source, const std::optional<Vector>& b) {
  Matrix data = a;
  if (source == ScoreSource::augmented_ab) {
    if (!b || b->size() != a.rows()) throw BadDimension("augmented scores need b of length m");
    data.conservativeResize(Eigen::NoChange, a.cols() + 1);
    data.col(a.cols()) = *b;
  }
  const ThinSVD svd = thin_svd(data);
  if (svd.rank_deficient) throw RankDeficient(svd.sigma.size() - 1);
  LeverageScores out;
  out.scores = svd.u.rowwise().squaredNorm();
  out.probs = out.scores / out.scores.sum();
  return out;
}

Vector approx_leverage_scores(const Matrix& a, Index sketch_size, std::uint64_t seed) {
  if (sketch_size < a.cols()) throw BadDimension("sketch size must be >= n");
  SketchFamily srtt{SketchKind::srtt, false, ScoreSource::plain_a, false};
  const auto ctx = SketchContext::create(srtt, a.rows(), seed);
  const SketchOperator op =
      draw_operator(ctx, sketch_size, derive_seed(seed, {purpose::leverage_approx, 0, 0}));
  const Matrix r = householder_qr(sketch_rows(op, a)).r();
  const Matrix basis = r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(a);
  return basis.rowwise().squaredNorm();
}

double max_score_ratio(const Vector& approx, const Vector& exact) {
  if (approx.size() != exact.size()) throw BadDimension("score vectors differ in length");
  double worst = 1.0;
  for (Index i = 0; i < exact.size(); ++i) {
    if (!(exact(i) > 0.0)) continue;
    if (!(approx(i) > 0.0)) return std::numeric_limits<double>::infinity();
    worst = std::max({worst, approx(i) / exact(i), exact(i) / approx(i)});
  }
  return worst;
}

double embedding_distortion(const SketchOperator& op, const Matrix& u) {
  const Matrix su = sketch_rows(op, u);
  Matrix gram = su.transpose() * su;
  gram.diagonal().array() -= 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace mlsas
