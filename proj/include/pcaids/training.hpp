#pragma once

// Training phase: bootstrap distributions of the per-component standard
// deviations r_j of sqrt(n-1) U, the per-component thresholds delta_j derived
// from them, and the training-set outlier diagnostic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pcaids/error.hpp"
#include "pcaids/parallel.hpp"
#include "pcaids/pca_core.hpp"
#include "pcaids/stats.hpp"

namespace pcaids {

struct BootstrapConfig {
  Index count = 5000;  ///< number of replicates B
  Index size = 10000;  ///< rows per replicate
  std::uint64_t seed = 1;
};

/// Per-component sd of resampled rows of `w` (rows are sqrt(n-1) U for the
/// training data). Replicate b uses derive_seed(seed, b).
inline std::vector<EmpiricalDistribution> bootstrap_component_sds_from_scores(
    const Matrix& w, const BootstrapConfig& cfg) {
  if (cfg.count < 100) throw InvalidArgument("bootstrap: boot_count must be >= 100");
  if (cfg.size < w.cols() + 1 || cfg.size < 2) {
    throw InvalidArgument("bootstrap: boot_size must be >= p + 1 (" + std::to_string(w.cols() + 1) + ")");
  }
  if (w.rows() < 1) throw InvalidArgument("bootstrap: empty score matrix");
  const Index p = w.cols();
  const Index size = cfg.size;
  Matrix r(cfg.count, p);
  parallel_for(static_cast<std::size_t>(cfg.count), [&](std::size_t b) {
    const auto idx = bootstrap_resample(w.rows(), size, derive_seed(cfg.seed, b));
    for (Index j = 0; j < p; ++j) {
      const double* col = w.col(j).data();
      double sum = 0.0;
      for (Index i : idx) sum += col[i];
      const double m = sum / static_cast<double>(size);
      double ss = 0.0;
      for (Index i : idx) ss += (col[i] - m) * (col[i] - m);
      r(static_cast<Index>(b), j) = std::sqrt(ss / static_cast<double>(size - 1));
    }
  });
  std::vector<EmpiricalDistribution> out;
  out.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    out.emplace_back(std::vector<double>(r.col(j).data(), r.col(j).data() + r.rows()));
  }
  return out;
}

/// Bootstrap distribution of r_j for every component; `x_train` is the
/// standardized training matrix the model was fitted on. Every replicate is
/// projected through the single full-data model.
inline std::vector<EmpiricalDistribution> bootstrap_component_sds(const PcaModel& model,
                                                                  const Matrix& x_train,
                                                                  const BootstrapConfig& cfg) {
  return bootstrap_component_sds_from_scores(scaled_scores(model, x_train), cfg);
}

struct ComponentThresholds {
  double alpha = 1e-4;
  Vector delta;  ///< delta_j = (1 - alpha) quantile of boot[j]
  std::vector<EmpiricalDistribution> boot;
  BootstrapConfig config;

  Index dim() const noexcept { return delta.size(); }
};

inline ComponentThresholds component_thresholds(std::vector<EmpiricalDistribution> boot, double alpha,
                                                const BootstrapConfig& cfg = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("component_thresholds: alpha must lie in (0, 1)");
  ComponentThresholds t;
  t.alpha = alpha;
  t.config = cfg;
  t.delta.resize(static_cast<Index>(boot.size()));
  for (std::size_t j = 0; j < boot.size(); ++j) t.delta(static_cast<Index>(j)) = boot[j].quantile(1.0 - alpha);
  t.boot = std::move(boot);
  return t;
}

/// Re-derive thresholds at a different level from the retained samples.
inline ComponentThresholds requantile(const ComponentThresholds& t, double alpha) {
  return component_thresholds(t.boot, alpha, t.config);
}

/// Rows of sqrt(n-1) U for (a subset of) the training data. Score thresholds
/// for AAD, WAAD and WBPCA are derived from these reference rows.
struct ReferenceScores {
  Matrix w;
  Index source_rows = 0;  ///< training row count the subset was drawn from
};

/// Keeps every row when cap is 0 or >= n; otherwise a seeded subset of `cap`
/// rows without replacement, in original row order.
inline ReferenceScores make_reference_scores(const PcaModel& model, const Matrix& x_train, Index cap = 0,
                                             std::uint64_t seed = 1) {
  const Index n = x_train.rows();
  if (cap <= 0 || cap >= n) return {scaled_scores(model, x_train), n};
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(derive_seed(seed, 0x5EFE5EULL));
  for (Index i = 0; i < cap; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  Matrix sub(cap, x_train.cols());
  for (Index i = 0; i < cap; ++i) sub.row(i) = x_train.row(idx[static_cast<std::size_t>(i)]);
  return {scaled_scores(model, sub), n};
}

struct TrainingConfig {
  BootstrapConfig boot;
  double alpha = 1e-4;
  Index reference_size = 0;  ///< 0 keeps every training row
};

struct TrainingResult {
  PcaModel model;
  ComponentThresholds thresholds;
  ReferenceScores reference;
};

/// Standardize, fit, bootstrap and derive thresholds from raw clean traffic.
inline TrainingResult train(const Matrix& y, std::vector<std::string> feature_names,
                            const TrainingConfig& cfg) {
  TrainingResult r;
  r.model = fit_model(y, std::move(feature_names));
  const Matrix x = standardize(r.model.standardizer, y);
  const Matrix w = scaled_scores(r.model, x);
  r.thresholds = component_thresholds(bootstrap_component_sds_from_scores(w, cfg.boot), cfg.alpha, cfg.boot);
  if (cfg.reference_size <= 0 || cfg.reference_size >= y.rows()) {
    r.reference = {w, y.rows()};
  } else {
    r.reference = make_reference_scores(r.model, x, cfg.reference_size, cfg.boot.seed);
  }
  return r;
}

struct DiagnosisConfig {
  double center_band = 0.1;     ///< tolerated deviation of the bootstrap median from 1
  double loading_cutoff = 0.1;  ///< |loading| at or above which a feature counts as heavy
  double row_quantile = 0.9999; ///< two-sided normal quantile for flagging extreme values
};

struct FeatureLoading {
  Index feature;
  double loading;
};

struct FlaggedRow {
  Index row;        ///< 0-based training row
  Index feature;    ///< feature carrying the most extreme value
  Index component;  ///< suspicious component that led to the feature
  double value;     ///< standardized value of that feature
};

struct OutlierDiagnosis {
  std::vector<Index> suspicious_components;
  Vector medians;  ///< bootstrap median of r_j for every component
  std::vector<std::vector<FeatureLoading>> heavy_loading_features;  ///< parallel to suspicious_components
  std::vector<FlaggedRow> flagged_rows;  ///< unique rows, largest |value| first
  double row_cutoff = 0.0;

  bool empty() const noexcept { return suspicious_components.empty(); }

  std::vector<Index> flagged_row_indices() const {
    std::vector<Index> out;
    for (const auto& f : flagged_rows) out.push_back(f.row);
    return out;
  }
};

/// Flags components whose bootstrap distribution of r_j is centred away from 1,
/// lists the features loading heavily on them, and reports training rows with
/// extreme standardized values on those features.
inline OutlierDiagnosis diagnose_training_outliers(const PcaModel& model, const Matrix& x_train,
                                                   const std::vector<EmpiricalDistribution>& boot,
                                                   const DiagnosisConfig& cfg = {}) {
  const Index p = model.dim();
  if (static_cast<Index>(boot.size()) != p || x_train.cols() != p) {
    throw InvalidArgument("diagnose_training_outliers: dimension mismatch");
  }
  OutlierDiagnosis d;
  d.medians.resize(p);
  d.row_cutoff = std::sqrt(chi_square_quantile(cfg.row_quantile, 1));
  for (Index j = 0; j < p; ++j) {
    d.medians(j) = boot[static_cast<std::size_t>(j)].median();
    if (!model.active[static_cast<std::size_t>(j)]) continue;
    if (std::abs(d.medians(j) - 1.0) > cfg.center_band) d.suspicious_components.push_back(j);
  }
  std::vector<FlaggedRow> best(static_cast<std::size_t>(x_train.rows()), FlaggedRow{-1, -1, -1, 0.0});
  for (Index c : d.suspicious_components) {
    std::vector<FeatureLoading> heavy;
    for (Index f = 0; f < p; ++f) {
      if (std::abs(model.v(f, c)) >= cfg.loading_cutoff) heavy.push_back({f, model.v(f, c)});
    }
    std::sort(heavy.begin(), heavy.end(),
              [](const auto& a, const auto& b) { return std::abs(a.loading) > std::abs(b.loading); });
    for (const auto& h : heavy) {
      for (Index i = 0; i < x_train.rows(); ++i) {
        const double v = x_train(i, h.feature);
        auto& slot = best[static_cast<std::size_t>(i)];
        if (std::abs(v) > d.row_cutoff && (slot.row < 0 || std::abs(v) > std::abs(slot.value))) {
          slot = {i, h.feature, c, v};
        }
      }
    }
    d.heavy_loading_features.push_back(std::move(heavy));
  }
  for (const auto& s : best) {
    if (s.row >= 0) d.flagged_rows.push_back(s);
  }
  std::stable_sort(d.flagged_rows.begin(), d.flagged_rows.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.value) > std::abs(b.value); });
  return d;
}

/// Drop the given rows and refit standardizer, PCA and thresholds from scratch.
inline TrainingResult retrain_after_removal(const Matrix& y_train, std::vector<Index> flagged_rows,
                                            std::vector<std::string> feature_names,
                                            const TrainingConfig& cfg) {
  std::sort(flagged_rows.begin(), flagged_rows.end());
  flagged_rows.erase(std::unique(flagged_rows.begin(), flagged_rows.end()), flagged_rows.end());
  for (Index r : flagged_rows) {
    if (r < 0 || r >= y_train.rows()) throw InvalidArgument("retrain_after_removal: row index out of range");
  }
  const Index keep = y_train.rows() - static_cast<Index>(flagged_rows.size());
  if (keep < y_train.cols() + 1) {
    throw DataError("retrain_after_removal: removal would leave " + std::to_string(keep) +
                    " rows, need at least p + 1 = " + std::to_string(y_train.cols() + 1));
  }
  Matrix kept(keep, y_train.cols());
  std::size_t next = 0;
  Index out = 0;
  for (Index i = 0; i < y_train.rows(); ++i) {
    if (next < flagged_rows.size() && flagged_rows[next] == i) {
      ++next;
      continue;
    }
    kept.row(out++) = y_train.row(i);
  }
  return train(kept, std::move(feature_names), cfg);
}

/// Component of `model` whose eigenvector is most aligned (|cosine|) with `direction`.
inline Index match_component(const PcaModel& model, const Vector& direction) {
  Index best = 0;
  double score = -1.0;
  for (Index j = 0; j < model.dim(); ++j) {
    const double s = std::abs(model.v.col(j).dot(direction));
    if (s > score) {
      score = s;
      best = j;
    }
  }
  return best;
}

}  // namespace pcaids
