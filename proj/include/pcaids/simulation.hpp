#pragma once

// Synthetic experiments: AR(1) Gaussian traffic, anomalies created by shifting
// rows along chosen eigenvectors, replicated detector comparisons, and the
// contamination experiments run on real clean/attack pools.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "pcaids/detectors.hpp"
#include "pcaids/evaluation.hpp"
#include "pcaids/parallel.hpp"
#include "pcaids/pca_core.hpp"
#include "pcaids/stats.hpp"
#include "pcaids/training.hpp"

namespace pcaids {

/// Sigma_ij = rho^|i - j|.
inline Matrix ar1_covariance(Index p, double rho) {
  if (p < 1) throw InvalidArgument("ar1_covariance: p must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("ar1_covariance: rho must lie in [0, 1)");
  Matrix s(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  }
  return s;
}

/// `count` i.i.d. rows from N(mu, sigma) using the Cholesky factor of sigma.
inline Matrix sample_mvn(Index count, const Vector& mu, const Matrix& sigma, std::uint64_t seed) {
  const Index p = mu.size();
  if (count < 1) throw InvalidArgument("sample_mvn: count must be >= 1");
  if (sigma.rows() != p || sigma.cols() != p) throw InvalidArgument("sample_mvn: dimension mismatch");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("sample_mvn: covariance not positive definite");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix z(count, p);
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < p; ++j) z(i, j) = normal(rng);
  }
  Matrix y = z * llt.matrixL().transpose();
  y.rowwise() += mu.transpose();
  return y;
}

namespace detail {
inline void check_shift_indices(std::span<const Index> indices, Index p) {
  if (indices.empty()) throw InvalidArgument("inject_shift: no eigenvector indices");
  std::vector<Index> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgument("inject_shift: duplicate eigenvector index");
  }
  if (sorted.front() < 0 || sorted.back() >= p) throw InvalidArgument("inject_shift: eigenvector index out of range");
}
}  // namespace detail

/// On the standardized scale: z = x V, z_j += c sqrt(lambda_j) for j in J, x' = z V^T.
inline Matrix shift_standardized(const Matrix& v, const Vector& lambda, const Matrix& x,
                                 std::span<const Index> indices, double c) {
  detail::check_shift_indices(indices, v.cols());
  if (c < 0.0) throw InvalidArgument("inject_shift: c must be non-negative");
  Matrix z = x * v;
  for (Index j : indices) z.col(j).array() += c * std::sqrt(std::max(0.0, lambda(j)));
  return z * v.transpose();
}

/// Raw rows shifted along the model's eigenvectors, mapped back through the
/// training standardizer.
inline Matrix inject_shift(const PcaModel& model, const Matrix& y_raw, std::span<const Index> indices, double c) {
  const Matrix x = standardize(model.standardizer, y_raw);
  return destandardize(model.standardizer, shift_standardized(model.v, model.lambda, x, indices, c));
}

enum class ShiftPolicy { random_k, first_k, last_k };

inline std::string_view to_string(ShiftPolicy s) {
  switch (s) {
    case ShiftPolicy::random_k: return "random";
    case ShiftPolicy::first_k: return "first";
    case ShiftPolicy::last_k: return "last";
  }
  return "?";
}

inline ShiftPolicy parse_shift_policy(std::string_view s) {
  if (s == "random" || s == "random-k") return ShiftPolicy::random_k;
  if (s == "first" || s == "first-k") return ShiftPolicy::first_k;
  if (s == "last" || s == "last-k") return ShiftPolicy::last_k;
  throw InvalidArgument("unknown shift policy '" + std::string(s) + "' (random, first, last)");
}

struct ExperimentConfig {
  Index n = 10000;            ///< training rows
  Index m = 5000;             ///< test batch rows
  Index p = 30;
  double rho = 0.9;
  double c = 3.0;             ///< shift size in units of sqrt(lambda_j)
  Index anomaly_count = 100;
  ShiftPolicy policy = ShiftPolicy::random_k;
  Index k = 3;                ///< number of eigenvectors shifted
  Index replicates = 1000;
  double alpha = 0.01;
  std::uint64_t seed = 1;
  Index boot_count = 500;     ///< replicates for the r_j distributions
  Index boot_size = 0;        ///< rows per bootstrap replicate; 0 means m
  Index theta_boot_count = 200;
  ThresholdSource aad_source = ThresholdSource::bootstrap;
  std::size_t grid = kDefaultRocGrid;

  Index effective_boot_size() const noexcept { return boot_size > 0 ? boot_size : m; }

  void validate() const {
    if (n < p + 1) throw InvalidArgument("experiment: n must exceed p");
    if (m < 2 || m > n) throw InvalidArgument("experiment: need 2 <= m <= n");
    if (anomaly_count < 0 || anomaly_count > m) throw InvalidArgument("experiment: anomaly_count must lie in [0, m]");
    if (k < 1 || k > p) throw InvalidArgument("experiment: k must lie in [1, p]");
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("experiment: rho must lie in [0, 1)");
    if (c < 0.0) throw InvalidArgument("experiment: c must be non-negative");
    if (replicates < 1) throw InvalidArgument("experiment: replicates must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("experiment: alpha must lie in (0, 1)");
  }
};

/// Detectors compared in every replicate, in output order.
inline constexpr std::array<Method, 4> kSimulationMethods{Method::aad, Method::waad, Method::wbpca,
                                                          Method::mahalanobis};

struct ExperimentRun {
  std::vector<bool> labels;           ///< true marks an injected anomaly
  std::vector<Index> shifted;         ///< eigenvector indices used for the shift
  std::vector<ScoreReport> reports;   ///< parallel to the method list of the experiment
  std::vector<Index> affected;        ///< AAD affected set
  Index kaiser_q = 0;
};

/// Eigenvector indices for one replicate.
inline std::vector<Index> choose_shift_indices(ShiftPolicy policy, Index k, Index p, std::uint64_t seed) {
  std::vector<Index> out;
  switch (policy) {
    case ShiftPolicy::first_k:
      for (Index j = 0; j < k; ++j) out.push_back(j);
      break;
    case ShiftPolicy::last_k:
      for (Index j = p - k; j < p; ++j) out.push_back(j);
      break;
    case ShiftPolicy::random_k: {
      std::vector<Index> all(static_cast<std::size_t>(p));
      std::iota(all.begin(), all.end(), Index{0});
      Rng rng(seed);
      for (Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, p - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
      }
      out.assign(all.begin(), all.begin() + k);
      std::sort(out.begin(), out.end());
      break;
    }
  }
  return out;
}

/// Seeded draw of `count` distinct indices from [0, n) (partial Fisher-Yates).
inline std::vector<Index> sample_without_replacement(Index n, Index count, std::uint64_t seed) {
  if (count < 0 || count > n) throw InvalidArgument("sample_without_replacement: count exceeds population");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

inline Matrix select_rows(const Matrix& y, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = y.row(rows[i]);
  return out;
}

namespace detail {
/// AAD, WAAD and WBPCA on one standardized batch. An empty affected set gives
/// AAD all-zero scores and no flags.
inline std::vector<ScoreReport> score_pca_detectors(const TrainingResult& tr, const Matrix& x_f, double alpha,
                                                    ThresholdSource aad_source, const BootstrapConfig& theta_boot,
                                                    Index wbpca_q, std::vector<Index>& affected_out) {
  ScoreThresholdOptions opt;
  opt.alpha = alpha;
  opt.reference = &tr.reference;
  opt.boot = theta_boot;
  std::vector<ScoreReport> out;

  const AffectedComponents affected = detect_affected(tr.model, tr.thresholds, x_f);
  affected_out = affected.affected;
  if (affected.affected.empty()) {
    ScoreReport r;
    r.method = Method::aad;
    r.scores = Vector::Zero(x_f.rows());
    r.flags.assign(static_cast<std::size_t>(x_f.rows()), false);
    r.threshold_source = aad_source;
    r.alpha = alpha;
    r.affected = affected;
    out.push_back(std::move(r));
  } else {
    auto aad_opt = opt;
    aad_opt.source = aad_source;
    out.push_back(aad_score(tr.model, affected, x_f, aad_opt));
  }
  out.push_back(waad_score(tr.model, tr.thresholds, x_f, opt));
  auto wb_opt = opt;
  wb_opt.source = ThresholdSource::empirical;
  out.push_back(wbpca_score(tr.model, wbpca_q, x_f, wb_opt));
  return out;
}
}  // namespace detail

/// One replicate: fresh training sample, model and thresholds, a test batch of
/// m - a clean training rows plus a shifted copies of other training rows, and
/// scores from AAD, WAAD, WBPCA (Kaiser q) and TRUE (analytic Mahalanobis).
inline ExperimentRun run_experiment(const ExperimentConfig& cfg, Index replicate) {
  cfg.validate();
  const std::uint64_t rs = derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate));
  const Matrix sigma = ar1_covariance(cfg.p, cfg.rho);
  const Vector mu = Vector::Zero(cfg.p);
  const Matrix y = sample_mvn(cfg.n, mu, sigma, derive_seed(rs, 1));

  TrainingConfig tc;
  tc.alpha = cfg.alpha;
  tc.boot = {cfg.boot_count, cfg.effective_boot_size(), derive_seed(rs, 4)};
  const TrainingResult tr = train(y, {}, tc);

  const Index clean = cfg.m - cfg.anomaly_count;
  const auto drawn = sample_without_replacement(cfg.n, cfg.m, derive_seed(rs, 2));
  ExperimentRun run;
  run.shifted = choose_shift_indices(cfg.policy, cfg.k, cfg.p, derive_seed(rs, 3));
  Matrix y_f(cfg.m, cfg.p);
  y_f.topRows(clean) = select_rows(y, std::span(drawn).first(static_cast<std::size_t>(clean)));
  if (cfg.anomaly_count > 0) {
    const Matrix sources = select_rows(y, std::span(drawn).subspan(static_cast<std::size_t>(clean)));
    y_f.bottomRows(cfg.anomaly_count) = inject_shift(tr.model, sources, run.shifted, cfg.c);
  }
  run.labels.assign(static_cast<std::size_t>(cfg.m), false);
  std::fill(run.labels.begin() + clean, run.labels.end(), true);

  const Matrix x_f = standardize(tr.model.standardizer, y_f);
  run.kaiser_q = kaiser_rank(tr.model.lambda);
  run.reports = detail::score_pca_detectors(tr, x_f, cfg.alpha, cfg.aad_source,
                                            {cfg.theta_boot_count, cfg.effective_boot_size(), derive_seed(rs, 5)},
                                            run.kaiser_q, run.affected);
  run.reports.push_back(mahalanobis_score(mu, sigma, y_f, cfg.alpha));
  return run;
}

/// Per-method results across replicates.
struct MethodSummary {
  Method method = Method::aad;
  std::vector<double> auc;                 ///< per replicate (empty without anomalies)
  std::vector<std::vector<double>> grid;   ///< per replicate ROC resampled on the grid
  std::vector<double> flag_rate;           ///< flagged rows / m at the detector's own threshold
  std::vector<double> detection_rate;      ///< at the detector's own threshold
  std::vector<double> false_alarm_rate;
  std::vector<std::vector<double>> tpr_at_fpr;  ///< per replicate, parallel to ExperimentSummary::report_fprs
  RocCurve mean_curve;

  double mean_auc() const { return auc.empty() ? 0.0 : mean(auc); }
  double sd_auc() const { return auc.size() < 2 ? 0.0 : column_sd(auc); }
  double se_auc() const { return auc.size() < 2 ? 0.0 : sd_auc() / std::sqrt(static_cast<double>(auc.size())); }
};

struct ExperimentSummary {
  std::vector<double> report_fprs{0.01, 0.05, 0.1};
  std::vector<MethodSummary> methods;
  std::vector<std::vector<Index>> affected_sets;  ///< AAD affected set per replicate

  const MethodSummary& get(Method m) const {
    for (const auto& s : methods) {
      if (s.method == m) return s;
    }
    throw InvalidArgument("experiment summary has no method " + std::string(to_string(m)));
  }

  /// Mean and standard error over replicates of the TPR at report_fprs[k].
  std::pair<double, double> tpr_stats(Method m, std::size_t k) const {
    std::vector<double> v;
    for (const auto& r : get(m).tpr_at_fpr) v.push_back(r.at(k));
    if (v.empty()) return {0.0, 0.0};
    const double se = v.size() < 2 ? 0.0 : column_sd(v) / std::sqrt(static_cast<double>(v.size()));
    return {mean(v), se};
  }
};

namespace detail {
struct ReplicateOutcome {
  std::vector<ScoreReport> reports;
  std::vector<bool> labels;
  std::vector<Index> affected;
};

inline ExperimentSummary summarize(std::span<const Method> methods, std::vector<ReplicateOutcome>& outcomes,
                                   std::size_t grid) {
  ExperimentSummary s;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodSummary ms;
    ms.method = methods[k];
    for (auto& o : outcomes) {
      const auto& rep = o.reports[k];
      const std::span<const double> sc(rep.scores.data(), static_cast<std::size_t>(rep.scores.size()));
      ms.flag_rate.push_back(static_cast<double>(rep.flagged_count()) / static_cast<double>(rep.scores.size()));
      const auto pos = std::count(o.labels.begin(), o.labels.end(), true);
      if (pos > 0 && pos < static_cast<std::ptrdiff_t>(o.labels.size())) {
        const RocCurve c = roc_curve(sc, o.labels);
        ms.auc.push_back(c.auc);
        ms.grid.push_back(resample_on_grid(c, grid));
        std::vector<double> t;
        for (double f : s.report_fprs) t.push_back(tpr_at(c, f));
        ms.tpr_at_fpr.push_back(std::move(t));
        const Rates r = rates_at_threshold(sc, o.labels, rep.threshold);
        ms.detection_rate.push_back(r.detection_rate);
        ms.false_alarm_rate.push_back(r.false_alarm_rate);
      }
    }
    if (!ms.grid.empty()) {
      std::vector<double> avg(grid, 0.0);
      for (const auto& g : ms.grid) {
        for (std::size_t i = 0; i < grid; ++i) avg[i] += g[i];
      }
      for (auto& a : avg) a /= static_cast<double>(ms.grid.size());
      ms.mean_curve = curve_from_grid(avg);
    }
    s.methods.push_back(std::move(ms));
  }
  for (auto& o : outcomes) s.affected_sets.push_back(std::move(o.affected));
  return s;
}
}  // namespace detail

/// Runs cfg.replicates experiments with seeds derived from cfg.seed and
/// averages ROC curves vertically on a fixed grid.
inline ExperimentSummary replicate_experiments(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(cfg.replicates));
  parallel_for(outcomes.size(), [&](std::size_t r) {
    ExperimentRun run = run_experiment(cfg, static_cast<Index>(r));
    // Keep memory flat: scores are only needed until summarized.
    outcomes[r] = {std::move(run.reports), std::move(run.labels), std::move(run.affected)};
  });
  return detail::summarize(kSimulationMethods, outcomes, cfg.grid);
}

struct ContaminationConfig {
  Index clean_count = 9900;
  Index attack_count = 100;
  Index replicates = 100;
  double alpha = 1e-4;
  std::uint64_t seed = 1;
  ThresholdSource aad_source = ThresholdSource::bootstrap;
  Index theta_boot_count = 200;
  Index theta_boot_size = 10000;
  Index wbpca_q = 0;  ///< 0 selects the Kaiser rank
  std::size_t grid = kDefaultRocGrid;
};

inline constexpr std::array<Method, 3> kContaminationMethods{Method::aad, Method::waad, Method::wbpca};

/// Repeated batches of clean_count rows from the clean pool plus attack_count
/// rows from the attack pool (both drawn without replacement, raw scale),
/// scored with AAD, WAAD and WBPCA against a trained model.
inline ExperimentSummary contamination_experiments(const TrainingResult& tr, const Matrix& clean_pool,
                                                   const Matrix& attack_pool, const ContaminationConfig& cfg) {
  if (clean_pool.rows() < cfg.clean_count || attack_pool.rows() < cfg.attack_count) {
    throw DataError("contamination: pool too small (clean " + std::to_string(clean_pool.rows()) + ", attack " +
                    std::to_string(attack_pool.rows()) + ")");
  }
  if (cfg.replicates < 1 || cfg.clean_count < 1 || cfg.attack_count < 1) {
    throw InvalidArgument("contamination: counts and replicates must be >= 1");
  }
  const Index q = cfg.wbpca_q > 0 ? cfg.wbpca_q : kaiser_rank(tr.model.lambda);
  std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(cfg.replicates));
  parallel_for(outcomes.size(), [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(cfg.seed, r);
    const auto ci = sample_without_replacement(clean_pool.rows(), cfg.clean_count, derive_seed(rs, 1));
    const auto ai = sample_without_replacement(attack_pool.rows(), cfg.attack_count, derive_seed(rs, 2));
    Matrix y_f(cfg.clean_count + cfg.attack_count, clean_pool.cols());
    y_f.topRows(cfg.clean_count) = select_rows(clean_pool, ci);
    y_f.bottomRows(cfg.attack_count) = select_rows(attack_pool, ai);
    auto& o = outcomes[r];
    o.labels.assign(static_cast<std::size_t>(y_f.rows()), false);
    std::fill(o.labels.begin() + cfg.clean_count, o.labels.end(), true);
    o.reports = detail::score_pca_detectors(tr, standardize(tr.model.standardizer, y_f), cfg.alpha, cfg.aad_source,
                                            {cfg.theta_boot_count, cfg.theta_boot_size, derive_seed(rs, 3)}, q,
                                            o.affected);
  });
  return detail::summarize(kContaminationMethods, outcomes, cfg.grid);
}

}  // namespace pcaids
