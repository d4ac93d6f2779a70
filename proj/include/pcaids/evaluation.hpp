#pragma once

// ROC curves, AUC, rates at a fixed threshold and vertical curve averaging.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pcaids/error.hpp"
#include "pcaids/stats.hpp"

namespace pcaids {

struct RocPoint {
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  ///< from (0,0) to (1,1), non-decreasing in both coordinates
  double auc = 0.0;
};

inline double trapezoid_auc(std::span<const RocPoint> pts) {
  double a = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    a += (pts[i].fpr - pts[i - 1].fpr) * 0.5 * (pts[i].tpr + pts[i - 1].tpr);
  }
  return a;
}

namespace detail {
inline std::pair<std::size_t, std::size_t> class_counts(std::span<const double> scores,
                                                        const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("score and label counts differ");
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("ROC evaluation needs both positive and negative labels");
  return {pos, neg};
}
}  // namespace detail

/// Threshold sweep over distinct scores, highest first; tied rows flip together.
inline RocCurve roc_curve(std::span<const double> scores, const std::vector<bool>& labels) {
  const auto [pos, neg] = detail::class_counts(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve c;
  c.points.push_back({0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      if (labels[order[k]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++k;
    }
    c.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos)});
  }
  c.auc = trapezoid_auc(c.points);
  return c;
}

struct Rates {
  double detection_rate;    ///< flagged positives / positives
  double false_alarm_rate;  ///< flagged negatives / negatives
};

/// Rates for the rule score > theta.
inline Rates rates_at_threshold(std::span<const double> scores, const std::vector<bool>& labels, double theta) {
  const auto [pos, neg] = detail::class_counts(scores, labels);
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > theta) {
      if (labels[i]) {
        ++tp;
      } else {
        ++fp;
      }
    }
  }
  return {static_cast<double>(tp) / static_cast<double>(pos), static_cast<double>(fp) / static_cast<double>(neg)};
}

/// Largest true positive rate reached at false positive rate `fpr`, linear
/// between curve vertices.
inline double tpr_at(const RocCurve& c, double fpr) {
  const auto& p = c.points;
  if (p.empty()) throw InvalidArgument("tpr_at: empty curve");
  if (fpr <= 0.0) {
    double t = 0.0;
    for (const auto& pt : p) {
      if (pt.fpr <= 0.0) t = std::max(t, pt.tpr);
    }
    return t;
  }
  // First vertex with fpr >= requested value.
  auto it = std::lower_bound(p.begin(), p.end(), fpr, [](const RocPoint& a, double x) { return a.fpr < x; });
  if (it == p.end()) return p.back().tpr;
  if (it->fpr == fpr) {
    double t = it->tpr;
    for (auto jt = it; jt != p.end() && jt->fpr == fpr; ++jt) t = std::max(t, jt->tpr);
    return t;
  }
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (fpr - lo.fpr) / (hi.fpr - lo.fpr);
  return lo.tpr + w * (hi.tpr - lo.tpr);
}

inline constexpr std::size_t kDefaultRocGrid = 512;

inline double grid_fpr(std::size_t g, std::size_t grid_size) {
  return static_cast<double>(g) / static_cast<double>(grid_size - 1);
}

/// True positive rates of `c` at `grid_size` evenly spaced false positive rates in [0, 1].
inline std::vector<double> resample_on_grid(const RocCurve& c, std::size_t grid_size = kDefaultRocGrid) {
  if (grid_size < 2) throw InvalidArgument("ROC grid needs at least 2 points");
  std::vector<double> t(grid_size);
  for (std::size_t g = 0; g < grid_size; ++g) t[g] = tpr_at(c, grid_fpr(g, grid_size));
  return t;
}

/// Curve through (0,0) and the grid points (fpr_g, tpr[g]), ending at (1,1).
inline RocCurve curve_from_grid(std::span<const double> tpr) {
  if (tpr.size() < 2) throw InvalidArgument("ROC grid needs at least 2 points");
  RocCurve out;
  out.points.reserve(tpr.size() + 1);
  out.points.push_back({0.0, 0.0});
  for (std::size_t g = 0; g < tpr.size(); ++g) out.points.push_back({grid_fpr(g, tpr.size()), tpr[g]});
  out.points.back() = {1.0, 1.0};
  out.auc = trapezoid_auc(out.points);
  return out;
}

/// Vertical averaging on `grid_size` evenly spaced false positive rates in [0, 1].
inline RocCurve average_curves(std::span<const RocCurve> curves, std::size_t grid_size = kDefaultRocGrid) {
  if (curves.empty()) throw InvalidArgument("average_curves: no curves");
  std::vector<double> sum(grid_size, 0.0);
  for (const auto& c : curves) {
    const auto t = resample_on_grid(c, grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) sum[g] += t[g];
  }
  for (auto& s : sum) s /= static_cast<double>(curves.size());
  return curve_from_grid(sum);
}

}  // namespace pcaids
