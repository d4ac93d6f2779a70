#pragma once

// Monitoring phase: affected-component detection, AAD and WAAD scoring with
// their thresholds, and the WBPCA and Mahalanobis baselines.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>

#include "pcaids/error.hpp"
#include "pcaids/parallel.hpp"
#include "pcaids/pca_core.hpp"
#include "pcaids/stats.hpp"
#include "pcaids/training.hpp"

namespace pcaids {

enum class Method { aad, waad, wbpca, mahalanobis };
enum class ThresholdSource { chi_square, bootstrap, empirical, fixed };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::aad: return "AAD";
    case Method::waad: return "WAAD";
    case Method::wbpca: return "WBPCA";
    case Method::mahalanobis: return "MAHALANOBIS";
  }
  return "?";
}

inline std::string_view to_string(ThresholdSource s) {
  switch (s) {
    case ThresholdSource::chi_square: return "chi-square";
    case ThresholdSource::bootstrap: return "bootstrap";
    case ThresholdSource::empirical: return "empirical";
    case ThresholdSource::fixed: return "fixed";
  }
  return "?";
}

inline ThresholdSource parse_threshold_source(std::string_view s) {
  if (s == "chi-square" || s == "chisq" || s == "chi_square") return ThresholdSource::chi_square;
  if (s == "bootstrap") return ThresholdSource::bootstrap;
  if (s == "empirical") return ThresholdSource::empirical;
  if (s == "fixed") return ThresholdSource::fixed;
  throw InvalidArgument("unknown threshold source '" + std::string(s) + "'");
}

struct AffectedComponents {
  Vector s_u;                  ///< sd of each column of sqrt(n-1) U_f over the batch
  std::vector<Index> affected; ///< ascending component indices
  Index q() const noexcept { return static_cast<Index>(affected.size()); }
};

struct ScoreReport {
  Method method = Method::aad;
  Vector scores;
  double threshold = 0.0;
  ThresholdSource threshold_source = ThresholdSource::fixed;
  double alpha = 0.0;
  std::vector<bool> flags;
  std::optional<AffectedComponents> affected;
  Vector weights;  ///< WAAD only
  Index q = 0;     ///< components summed (AAD) or retained (WBPCA)

  Index flagged_count() const { return std::count(flags.begin(), flags.end(), true); }
};

namespace detail {
inline ScoreReport finish_report(Method m, Vector scores, double theta, ThresholdSource src, double alpha) {
  ScoreReport r;
  r.method = m;
  r.threshold = theta;
  r.threshold_source = src;
  r.alpha = alpha;
  r.flags.resize(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i) r.flags[static_cast<std::size_t>(i)] = scores(i) > theta;
  r.scores = std::move(scores);
  return r;
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
}
}  // namespace detail

/// Column sds of sqrt(n-1) U for a standardized batch (s_j^u).
inline Vector batch_component_sds(const PcaModel& model, const Matrix& x_f) {
  if (x_f.rows() < 2) {
    throw DataError("batch statistics need at least 2 rows; score single rows against a frozen affected set");
  }
  const Matrix w = scaled_scores(model, x_f);
  Vector s(w.cols());
  for (Index j = 0; j < w.cols(); ++j) {
    s(j) = column_sd(std::span<const double>(w.col(j).data(), static_cast<std::size_t>(w.rows())));
  }
  return s;
}

/// Components whose batch sd strictly exceeds delta_j.
inline AffectedComponents detect_affected(const PcaModel& model, const ComponentThresholds& thresholds,
                                          const Matrix& x_f) {
  if (thresholds.dim() != model.dim()) throw InvalidArgument("detect_affected: threshold dimension mismatch");
  AffectedComponents a;
  a.s_u = batch_component_sds(model, x_f);
  for (Index j = 0; j < model.dim(); ++j) {
    if (model.active[static_cast<std::size_t>(j)] && a.s_u(j) > thresholds.delta(j)) a.affected.push_back(j);
  }
  return a;
}

/// Caller-chosen component set, e.g. a manual override or the set frozen from
/// an earlier diagnostic batch. s_u is filled when the batch has >= 2 rows.
inline AffectedComponents fixed_affected(const PcaModel& model, std::vector<Index> components,
                                         const Matrix& x_f) {
  std::sort(components.begin(), components.end());
  components.erase(std::unique(components.begin(), components.end()), components.end());
  for (Index j : components) {
    if (j < 0 || j >= model.dim()) throw InvalidArgument("component index " + std::to_string(j + 1) + " out of range");
  }
  AffectedComponents a;
  if (x_f.rows() >= 2) a.s_u = batch_component_sds(model, x_f);
  a.affected = std::move(components);
  return a;
}

/// Score threshold as the median, over bootstrap replicates, of the
/// per-replicate (1 - alpha) empirical quantile of resampled reference scores.
inline double bootstrap_score_threshold(std::span<const double> reference, double alpha,
                                        const BootstrapConfig& cfg) {
  detail::check_alpha(alpha);
  if (reference.empty()) throw InvalidArgument("bootstrap_score_threshold: empty reference");
  if (cfg.count < 1 || cfg.size < 1) throw InvalidArgument("bootstrap_score_threshold: bad bootstrap size");
  std::vector<double> per_replicate(static_cast<std::size_t>(cfg.count));
  parallel_for(per_replicate.size(), [&](std::size_t b) {
    const auto idx = bootstrap_resample(static_cast<Index>(reference.size()), cfg.size, derive_seed(cfg.seed, b));
    std::vector<double> vals(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = reference[static_cast<std::size_t>(idx[i])];
    per_replicate[b] = empirical_quantile_select(vals, 1.0 - alpha);
  });
  return empirical_quantile_select(per_replicate, 0.5);
}

struct ScoreThresholdOptions {
  ThresholdSource source = ThresholdSource::bootstrap;
  double alpha = 1e-4;
  const ReferenceScores* reference = nullptr;  ///< required for bootstrap and empirical
  BootstrapConfig boot{1000, 10000, 1};
  double fixed_threshold = 0.0;                ///< used when source == fixed
};

namespace detail {
inline double reference_threshold(const Vector& ref_scores, const ScoreThresholdOptions& opt) {
  std::vector<double> vals(ref_scores.data(), ref_scores.data() + ref_scores.size());
  if (opt.source == ThresholdSource::bootstrap) return bootstrap_score_threshold(vals, opt.alpha, opt.boot);
  return empirical_quantile_select(vals, 1.0 - opt.alpha);
}

inline const ReferenceScores& require_reference(const ScoreThresholdOptions& opt, const PcaModel& model) {
  if (opt.reference == nullptr) {
    throw DataError(std::string("threshold source '") + std::string(to_string(opt.source)) +
                    "' needs the reference score artifact");
  }
  if (opt.reference->w.cols() != model.dim()) throw InvalidArgument("reference scores: dimension mismatch");
  return *opt.reference;
}

inline Vector weighted_square_sum(const Matrix& w, const Vector& weights) {
  return w.array().square().matrix() * weights;
}

inline Vector subset_square_sum(const Matrix& w, std::span<const Index> set) {
  Vector t = Vector::Zero(w.rows());
  for (Index j : set) t += w.col(j).array().square().matrix();
  return t;
}
}  // namespace detail

/// AAD: t_i = (n-1) sum over affected components of u_ij^2.
/// Throws EmptyAffectedSet when no component is affected.
inline ScoreReport aad_score(const PcaModel& model, const AffectedComponents& affected, const Matrix& x_f,
                             const ScoreThresholdOptions& opt = {}) {
  detail::check_alpha(opt.alpha);
  if (affected.affected.empty()) throw EmptyAffectedSet();
  const Matrix w = scaled_scores(model, x_f);
  Vector scores = detail::subset_square_sum(w, affected.affected);
  double theta = opt.fixed_threshold;
  switch (opt.source) {
    case ThresholdSource::chi_square:
      theta = chi_square_quantile(1.0 - opt.alpha, static_cast<int>(affected.q()));
      break;
    case ThresholdSource::bootstrap:
    case ThresholdSource::empirical: {
      const auto& ref = detail::require_reference(opt, model);
      theta = detail::reference_threshold(detail::subset_square_sum(ref.w, affected.affected), opt);
      break;
    }
    case ThresholdSource::fixed:
      break;
  }
  auto r = detail::finish_report(Method::aad, std::move(scores), theta, opt.source, opt.alpha);
  r.affected = affected;
  r.q = affected.q();
  return r;
}

/// Weighted score sum_j weights_j * (n-1) u_ij^2 over all components; the
/// threshold applies the same weights to the reference rows.
inline ScoreReport weighted_score(const PcaModel& model, const Vector& weights, const Matrix& x_f,
                                  const ScoreThresholdOptions& opt) {
  detail::check_alpha(opt.alpha);
  if (weights.size() != model.dim()) throw InvalidArgument("weighted_score: weight count mismatch");
  const Matrix w = scaled_scores(model, x_f);
  Vector scores = detail::weighted_square_sum(w, weights);
  double theta = opt.fixed_threshold;
  switch (opt.source) {
    case ThresholdSource::chi_square:
      throw InvalidArgument("WAAD has no chi-square threshold; use bootstrap or empirical");
    case ThresholdSource::bootstrap:
    case ThresholdSource::empirical: {
      const auto& ref = detail::require_reference(opt, model);
      theta = detail::reference_threshold(detail::weighted_square_sum(ref.w, weights), opt);
      break;
    }
    case ThresholdSource::fixed:
      break;
  }
  auto r = detail::finish_report(Method::waad, std::move(scores), theta, opt.source, opt.alpha);
  r.weights = weights;
  r.q = model.rank();
  return r;
}

/// WAAD: weights are the batch sds s_j^u of every component.
inline ScoreReport waad_score(const PcaModel& model, const ComponentThresholds& thresholds, const Matrix& x_f,
                              const ScoreThresholdOptions& opt = {}) {
  if (x_f.rows() < 2) throw DataError("WAAD: degenerate batch, weights need at least 2 rows");
  AffectedComponents a = detect_affected(model, thresholds, x_f);
  Vector weights = a.s_u;
  for (Index j = 0; j < model.dim(); ++j) {
    if (!model.active[static_cast<std::size_t>(j)]) weights(j) = 0.0;
  }
  auto r = weighted_score(model, weights, x_f, opt);
  r.affected = std::move(a);
  return r;
}

/// Kaiser rule: number of eigenvalues strictly above 1, at least 1.
inline Index kaiser_rank(const Vector& lambda) {
  for (Index j = 1; j < lambda.size(); ++j) {
    if (lambda(j) > lambda(j - 1)) throw InvalidArgument("kaiser_rank: eigenvalues must be non-increasing");
  }
  Index q = 0;
  for (Index j = 0; j < lambda.size(); ++j) q += lambda(j) > 1.0 ? 1 : 0;
  return std::max<Index>(1, q);
}

/// Squared residual norm of each row after rank-q reconstruction.
inline Vector reconstruction_residuals(const PcaModel& model, const Matrix& x_f, Index q) {
  const Matrix r = x_f - reconstruct_rank_q(model, x_f, q);
  return r.rowwise().squaredNorm();
}

/// Training residuals recovered from reference rows of sqrt(n-1) U, using
/// z_ij^2 = lambda_j w_ij^2 for the discarded components.
inline Vector reference_residuals(const PcaModel& model, const ReferenceScores& ref, Index q) {
  if (q < 1 || q > model.dim()) throw InvalidArgument("reference_residuals: q out of range");
  Vector weights = Vector::Zero(model.dim());
  for (Index j = q; j < model.dim(); ++j) weights(j) = model.lambda(j);
  return detail::weighted_square_sum(ref.w, weights);
}

inline ScoreReport wbpca_score(const PcaModel& model, Index q, const Matrix& x_f, double threshold) {
  auto r = detail::finish_report(Method::wbpca, reconstruction_residuals(model, x_f, q), threshold,
                                 ThresholdSource::fixed, 0.0);
  r.q = q;
  return r;
}

/// WBPCA with the threshold taken from the training residual distribution
/// (empirical quantile by default, or bootstrap).
inline ScoreReport wbpca_score(const PcaModel& model, Index q, const Matrix& x_f,
                               ScoreThresholdOptions opt) {
  detail::check_alpha(opt.alpha);
  Vector scores = reconstruction_residuals(model, x_f, q);
  double theta = opt.fixed_threshold;
  switch (opt.source) {
    case ThresholdSource::chi_square:
      throw InvalidArgument("WBPCA has no chi-square threshold; use empirical or bootstrap");
    case ThresholdSource::bootstrap:
    case ThresholdSource::empirical:
      theta = detail::reference_threshold(reference_residuals(model, detail::require_reference(opt, model), q), opt);
      break;
    case ThresholdSource::fixed:
      break;
  }
  auto r = detail::finish_report(Method::wbpca, std::move(scores), theta, opt.source, opt.alpha);
  r.q = q;
  return r;
}

/// Squared Mahalanobis distance under known mean and covariance, via a
/// Cholesky solve; the threshold is the chi-square (p) quantile at 1 - alpha.
inline ScoreReport mahalanobis_score(const Vector& mu, const Matrix& sigma, const Matrix& x_raw, double alpha) {
  detail::check_alpha(alpha);
  const Index p = mu.size();
  if (sigma.rows() != p || sigma.cols() != p || x_raw.cols() != p) {
    throw InvalidArgument("mahalanobis_score: dimension mismatch");
  }
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) throw NumericalError("mahalanobis_score: covariance not symmetric");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("mahalanobis_score: covariance not positive definite");
  Matrix centered = (x_raw.rowwise() - mu.transpose()).transpose();
  llt.matrixL().solveInPlace(centered);
  Vector d2 = centered.colwise().squaredNorm().transpose();
  return detail::finish_report(Method::mahalanobis, std::move(d2), chi_square_quantile(1.0 - alpha, static_cast<int>(p)),
                               ThresholdSource::chi_square, alpha);
}

}  // namespace pcaids
