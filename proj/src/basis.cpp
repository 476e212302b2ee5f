#include "remgof/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "remgof/errors.hpp"

namespace remgof {

double tps_radial(double r) {
  r = std::abs(r);
  if (r == 0.0) return 0.0;
  return r * r * std::log(r);
}

Eigen::VectorXd thin_plate_basis(double t, std::span<const double> controls) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(controls.size()));
  for (std::size_t l = 0; l < controls.size(); ++l) out[static_cast<Eigen::Index>(l)] = tps_radial(t - controls[l]);
  return out;
}

Eigen::VectorXd nle_basis(double v, std::span<const double> knots) { return thin_plate_basis(v, knots); }

std::vector<double> quantile_knots(std::vector<double> values, std::size_t q) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.size() <= q || q < 2) return values;
  std::vector<double> knots(q);
  const double span = static_cast<double>(values.size() - 1);
  for (std::size_t l = 0; l < q; ++l) {
    const double pos = span * static_cast<double>(l) / static_cast<double>(q - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    knots[l] = (1.0 - w) * values[lo] + w * values[hi];
  }
  return knots;
}

Eigen::MatrixXd null_space(const Eigen::MatrixXd& C) {
  const Eigen::Index q = C.cols();
  if (C.rows() == 0) return Eigen::MatrixXd::Identity(q, q);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = std::max(C.rows(), C.cols()) * (sv.size() ? sv[0] : 0.0) * 1e-12;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++rank;
  return svd.matrixV().rightCols(q - rank);
}

namespace {

Eigen::MatrixXd radial_gram(const std::vector<double>& knots) {
  const auto q = static_cast<Eigen::Index>(knots.size());
  Eigen::MatrixXd E(q, q);
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < q; ++j) E(i, j) = tps_radial(knots[i] - knots[j]);
  return E;
}

Eigen::MatrixXd knot_polynomials(const std::vector<double>& knots) {
  const auto q = static_cast<Eigen::Index>(knots.size());
  Eigen::MatrixXd T(q, 2);
  for (Eigen::Index i = 0; i < q; ++i) {
    T(i, 0) = 1.0;
    T(i, 1) = knots[i];
  }
  return T;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& S) { return 0.5 * (S + S.transpose()); }

}  // namespace

void SmoothBasis::evaluate(double value, Eigen::Ref<Eigen::VectorXd> out) const {
  const double x = (value - shift) / scale;
  const auto q = static_cast<Eigen::Index>(knots.size());
  if (kind == BasisKind::radial) {
    for (Eigen::Index l = 0; l < q; ++l) out[l] = tps_radial(x - knots[l]);
    return;
  }
  out[0] = 1.0;
  out[1] = x;
  Eigen::VectorXd psi(q);
  for (Eigen::Index l = 0; l < q; ++l) psi[l] = tps_radial(x - knots[l]);
  out.tail(q - 2).noalias() = z_t.transpose() * psi;
}

Eigen::VectorXd SmoothBasis::evaluate(double value) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(raw_width()));
  evaluate(value, out);
  return out;
}

SmoothBasis make_smooth_basis(BasisKind kind, std::span<const double> values, std::size_t q, bool rescale) {
  SmoothBasis b;
  b.kind = kind;
  auto knots = quantile_knots(std::vector<double>(values.begin(), values.end()), q);
  if (knots.size() < 3)
    throw DegenerateError("smooth term needs at least 3 distinct covariate values, got " +
                          std::to_string(knots.size()));
  if (rescale) {
    b.shift = knots.front();
    const double range = knots.back() - knots.front();
    b.scale = range > 0.0 ? range : 1.0;
    for (auto& k : knots) k = (k - b.shift) / b.scale;
  }
  b.knots = std::move(knots);
  const auto E = radial_gram(b.knots);
  const auto T = knot_polynomials(b.knots);
  const auto qq = static_cast<Eigen::Index>(b.knots.size());
  if (kind == BasisKind::tps) {
    b.z_t = null_space(T.transpose());
    b.penalty = Eigen::MatrixXd::Zero(qq, qq);
    b.penalty.bottomRightCorner(qq - 2, qq - 2) = symmetrize(b.z_t.transpose() * E * b.z_t);
  } else {
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(qq, qq) - T * (T.transpose() * T).ldlt().solve(T.transpose());
    b.penalty = symmetrize(P * E * P);
  }
  return b;
}

void TermLayout::emit(double raw, double u, Eigen::Ref<Eigen::VectorXd> row) const {
  const auto off = static_cast<Eigen::Index>(offset);
  const auto w = static_cast<Eigen::Index>(width);
  switch (spec.effect) {
    case EffectType::fle:
      row[off] += raw;
      return;
    case EffectType::tve: {
      if (raw == 0.0) return;
      Eigen::VectorXd b = smooth.evaluate(u);
      row.segment(off, w) += raw * b;
      return;
    }
    case EffectType::nle: {
      Eigen::VectorXd b = smooth.evaluate(raw);
      if (spec.basis == BasisKind::tps) row.segment(off, w) += constraint.transpose() * b;
      else row.segment(off, w) += b - center.transpose();
      return;
    }
    case EffectType::re: {
      if (!(raw >= 0.0) || raw >= static_cast<double>(levels))
        throw LevelError("term '" + spec.name + "': level " + format_double(raw) + " outside 0.." +
                         std::to_string(levels == 0 ? 0 : levels - 1));
      row[off + static_cast<Eigen::Index>(raw)] += spec.by_time ? u : 1.0;
      return;
    }
  }
}

const TermLayout& DesignLayout::term(std::string_view name) const {
  for (const auto& t : terms)
    if (t.spec.name == name) return t;
  throw ValidationError("unknown term '" + std::string(name) + "'");
}

std::vector<std::size_t> DesignLayout::indices(std::string_view name) const {
  const auto& t = term(name);
  std::vector<std::size_t> out(t.width);
  std::iota(out.begin(), out.end(), t.offset);
  return out;
}

DesignLayout resolve_layout(const ModelSpec& spec, const LayoutData& data, std::size_t n_actors, double t_end) {
  DesignLayout layout;
  layout.t_end = t_end;
  layout.n_actors = n_actors;
  std::size_t offset = 0;
  for (EffectType block : {EffectType::fle, EffectType::tve, EffectType::nle, EffectType::re}) {
    for (std::size_t i = 0; i < spec.terms.size(); ++i) {
      const auto& ts = spec.terms[i];
      if (ts.effect != block) continue;
      TermLayout t;
      t.spec = ts;
      t.offset = offset;
      switch (block) {
        case EffectType::fle:
          t.width = 1;
          t.basis_dim = 1;
          t.penalty = Eigen::MatrixXd::Zero(1, 1);
          break;
        case EffectType::tve:
          t.smooth = make_smooth_basis(ts.basis, data.event_u, ts.q, false);
          t.basis_dim = t.smooth.raw_width();
          t.width = t.basis_dim;
          t.penalty = t.smooth.penalty;
          t.penalized = true;
          break;
        case EffectType::nle: {
          if (i >= data.pooled.size() || i >= data.case_values.size())
            throw ValidationError("missing layout data for term '" + ts.name + "'");
          t.smooth = make_smooth_basis(ts.basis, data.pooled[i], ts.q, true);
          t.basis_dim = t.smooth.raw_width();
          const auto q = static_cast<Eigen::Index>(t.basis_dim);
          Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(q);
          Eigen::VectorXd b(q);
          for (double v : data.case_values[i]) {
            t.smooth.evaluate(v, b);
            mean += b.transpose();
          }
          if (!data.case_values[i].empty()) mean /= static_cast<double>(data.case_values[i].size());
          if (ts.basis == BasisKind::tps) {
            t.constraint = null_space(mean);
            t.width = static_cast<std::size_t>(t.constraint.cols());
            t.penalty = symmetrize(t.constraint.transpose() * t.smooth.penalty * t.constraint);
          } else {
            t.center = mean;
            t.width = t.basis_dim;
            t.penalty = t.smooth.penalty;
          }
          t.penalized = true;
          break;
        }
        case EffectType::re:
          t.levels = n_actors;
          t.basis_dim = n_actors;
          t.width = n_actors;
          t.penalty = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_actors),
                                                static_cast<Eigen::Index>(n_actors));
          t.penalized = true;
          break;
      }
      offset += t.width;
      layout.terms.push_back(std::move(t));
    }
  }
  layout.P = offset;
  return layout;
}

std::vector<PenaltyBlock> penalty_blocks(const DesignLayout& layout) {
  std::vector<PenaltyBlock> out;
  for (const auto& t : layout.terms) {
    if (!t.penalized) continue;
    out.push_back({t.spec.name, t.offset, t.width, t.penalty, 0.0});
  }
  return out;
}

double penalty_value(std::span<const PenaltyBlock> blocks, const Eigen::VectorXd& gamma) {
  double v = 0.0;
  for (const auto& b : blocks) {
    const auto g = gamma.segment(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.width));
    v += b.lambda * g.dot(b.S * g);
  }
  return v;
}

Eigen::VectorXd penalty_gradient(std::span<const PenaltyBlock> blocks, const Eigen::VectorXd& gamma) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(gamma.size());
  for (const auto& b : blocks) {
    const auto off = static_cast<Eigen::Index>(b.offset), w = static_cast<Eigen::Index>(b.width);
    grad.segment(off, w) += 2.0 * b.lambda * (b.S * gamma.segment(off, w));
  }
  return grad;
}

Eigen::MatrixXd penalty_hessian(std::span<const PenaltyBlock> blocks, std::size_t P) {
  const auto p = static_cast<Eigen::Index>(P);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
  for (const auto& b : blocks) {
    const auto off = static_cast<Eigen::Index>(b.offset), w = static_cast<Eigen::Index>(b.width);
    H.block(off, off, w, w) += 2.0 * b.lambda * b.S;
  }
  return H;
}

double covariate_value(const CovariateSource& source, Dyad dyad, double t, const EndoState& state,
                       const ExoCovariates* exo, const StrataMap* strata, double t_end) {
  switch (source.kind) {
    case SourceKind::endo: return state.value(source.endo, dyad, t);
    case SourceKind::exo:
      if (!exo) throw ValidationError("term needs exogenous covariate '" + source.exo_name + "'");
      return exo->value(source.exo_name, dyad);
    case SourceKind::time: return t / t_end;
    case SourceKind::constant: return source.constant;
    case SourceKind::actor_sender: return static_cast<double>(dyad.sender);
    case SourceKind::actor_receiver: return static_cast<double>(dyad.receiver);
    case SourceKind::stratum:
      if (!strata || strata->empty()) throw ValidationError("stratum source requires strata");
      return static_cast<double>(strata->stratum(dyad));
  }
  return 0.0;
}

Eigen::VectorXd build_design_row(const DesignLayout& layout, Dyad dyad, double t, const EndoState& state,
                                 const ExoCovariates* exo, const StrataMap* strata) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.P));
  const double u = t / layout.t_end;
  for (const auto& term : layout.terms) {
    const double raw = covariate_value(term.spec.source, dyad, t, state, exo, strata, layout.t_end);
    term.emit(raw, u, row);
  }
  return row;
}

}  // namespace remgof
