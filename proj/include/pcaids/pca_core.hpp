#pragma once

// Standardization, SVD-based PCA on the correlation scale, projection into
// standardized component space, rank-q reconstruction and the t statistic.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "pcaids/error.hpp"
#include "pcaids/stats.hpp"

namespace pcaids {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Throws DataError unless the matrix has n >= 2 rows, p >= 1 columns and only finite entries.
inline void validate_data(const Matrix& y, const char* what = "data matrix") {
  if (y.rows() < 2 || y.cols() < 1) {
    std::ostringstream os;
    os << what << ": need at least 2 rows and 1 column, got " << y.rows() << "x" << y.cols();
    throw DataError(os.str());
  }
  if (!y.allFinite()) {
    for (Index j = 0; j < y.cols(); ++j) {
      for (Index i = 0; i < y.rows(); ++i) {
        if (!std::isfinite(y(i, j))) {
          std::ostringstream os;
          os << what << ": non-finite value at row " << i + 1 << ", column " << j + 1;
          throw DataError(os.str());
        }
      }
    }
  }
}

struct Standardizer {
  Vector means;
  Vector sds;

  Index size() const noexcept { return means.size(); }

  static Standardizer identity(Index p) { return {Vector::Zero(p), Vector::Ones(p)}; }
};

inline Standardizer fit_standardizer(const Matrix& y) {
  validate_data(y);
  const Index p = y.cols();
  Standardizer s{Vector(p), Vector(p)};
  std::vector<Index> zero;
  for (Index j = 0; j < p; ++j) {
    std::span<const double> col(y.col(j).data(), static_cast<std::size_t>(y.rows()));
    s.means(j) = mean(col);
    s.sds(j) = column_sd(col);
    if (!(s.sds(j) > 0.0)) zero.push_back(j);
  }
  if (!zero.empty()) {
    std::ostringstream os;
    os << "zero-variance column(s):";
    for (Index j : zero) os << ' ' << j + 1;
    throw ZeroVarianceColumn(std::move(zero), os.str());
  }
  return s;
}

/// Maps raw values onto the training scale: (y - mean) / sd, column-wise.
inline Matrix standardize(const Standardizer& s, const Matrix& y) {
  if (y.cols() != s.size()) {
    std::ostringstream os;
    os << "standardize: expected " << s.size() << " columns, got " << y.cols();
    throw InvalidArgument(os.str());
  }
  return ((y.rowwise() - s.means.transpose()).array().rowwise() / s.sds.transpose().array()).matrix();
}

inline Matrix destandardize(const Standardizer& s, const Matrix& x) {
  if (x.cols() != s.size()) throw InvalidArgument("destandardize: column count mismatch");
  return ((x.array().rowwise() * s.sds.transpose().array()).rowwise() + s.means.transpose().array()).matrix();
}

/// Frozen result of training: X = U diag(gamma) V^T with X the standardized
/// training matrix. Only V, gamma and lambda are kept; U is recovered on demand
/// by projection.
struct PcaModel {
  Standardizer standardizer;
  Matrix v;       ///< p x p, columns are eigenvectors of the correlation matrix
  Vector gamma;   ///< singular values, non-increasing
  Vector lambda;  ///< eigenvalues gamma^2 / (train_n - 1)
  Index train_n = 0;
  /// false for components whose singular value is numerically zero; those are
  /// excluded from projection.
  std::vector<bool> active;
  std::vector<std::string> feature_names;

  Index dim() const noexcept { return v.rows(); }
  Index rank() const noexcept { return std::count(active.begin(), active.end(), true); }
  double scale() const noexcept { return std::sqrt(static_cast<double>(train_n - 1)); }
};

/// Relative singular value cutoff below which a component counts as degenerate.
inline constexpr double kRankTolerance = 1e-10;

namespace detail {
/// Flips each column so its largest-magnitude entry (first on ties) is positive.
inline void canonicalize_signs(Matrix& v) {
  for (Index j = 0; j < v.cols(); ++j) {
    Index arg = 0;
    for (Index i = 1; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) > std::abs(v(arg, j))) arg = i;
    }
    if (v(arg, j) < 0.0) v.col(j) *= -1.0;
  }
}
}  // namespace detail

/// PCA of an already standardized matrix via SVD. The standardizer stored in
/// the model is the identity; use fit_model to standardize raw data first.
inline PcaModel fit_pca(const Matrix& x) {
  validate_data(x, "fit_pca");
  const Index n = x.rows();
  const Index p = x.cols();
  Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(x, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
    throw NumericalError("fit_pca: singular value decomposition did not converge");
  }
  const Vector sv = svd.singularValues();
  const Matrix& vfull = svd.matrixV();

  // Singular values come back in decreasing order; a stable sort keeps the
  // solver's order among exact ties.
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ga = a < sv.size() ? sv(a) : 0.0;
    const double gb = b < sv.size() ? sv(b) : 0.0;
    return ga > gb;
  });

  PcaModel m;
  m.standardizer = Standardizer::identity(p);
  m.train_n = n;
  m.v.resize(p, p);
  m.gamma.resize(p);
  for (Index k = 0; k < p; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    m.v.col(k) = vfull.col(src);
    m.gamma(k) = src < sv.size() ? std::max(0.0, sv(src)) : 0.0;
  }
  detail::canonicalize_signs(m.v);
  m.lambda = m.gamma.array().square() / static_cast<double>(n - 1);
  const double gmax = p > 0 ? m.gamma(0) : 0.0;
  m.active.resize(static_cast<std::size_t>(p));
  for (Index k = 0; k < p; ++k) {
    m.active[static_cast<std::size_t>(k)] = gmax > 0.0 && m.gamma(k) >= kRankTolerance * gmax;
  }
  return m;
}

/// Standardize raw training data and fit the PCA in one step.
inline PcaModel fit_model(const Matrix& y, std::vector<std::string> feature_names = {}) {
  if (feature_names.empty()) {
    for (Index j = 0; j < y.cols(); ++j) feature_names.push_back("f" + std::to_string(j + 1));
  }
  if (static_cast<Index>(feature_names.size()) != y.cols()) {
    throw InvalidArgument("fit_model: feature name count does not match column count");
  }
  Standardizer s;
  try {
    s = fit_standardizer(y);
  } catch (const ZeroVarianceColumn& e) {
    std::ostringstream os;
    os << "zero-variance column(s):";
    for (Index j : e.columns()) os << ' ' << feature_names[static_cast<std::size_t>(j)] << " (#" << j + 1 << ')';
    throw ZeroVarianceColumn(e.columns(), os.str());
  }
  PcaModel m = fit_pca(standardize(s, y));
  m.standardizer = std::move(s);
  m.feature_names = std::move(feature_names);
  return m;
}

/// Standardized principal component coordinates U = X V Gamma^-1 (m x p).
struct StandardizedScores {
  Matrix u;
  Index rows() const noexcept { return u.rows(); }
};

enum class RankPolicy { exclude, strict };

inline StandardizedScores project_standardized(const PcaModel& model, const Matrix& x_f,
                                               RankPolicy policy = RankPolicy::exclude) {
  if (x_f.cols() != model.dim()) {
    std::ostringstream os;
    os << "project_standardized: expected " << model.dim() << " columns, got " << x_f.cols();
    throw InvalidArgument(os.str());
  }
  if (policy == RankPolicy::strict && model.rank() < model.dim()) {
    throw RankDeficient("project_standardized: model has " +
                        std::to_string(model.dim() - model.rank()) + " degenerate component(s)");
  }
  Vector inv(model.dim());
  for (Index j = 0; j < model.dim(); ++j) {
    inv(j) = model.active[static_cast<std::size_t>(j)] ? 1.0 / model.gamma(j) : 0.0;
  }
  return {(x_f * model.v) * inv.asDiagonal()};
}

/// sqrt(n - 1) * U: each column has unit variance on the training data.
inline Matrix scaled_scores(const PcaModel& model, const Matrix& x_f) {
  return project_standardized(model, x_f).u * model.scale();
}

/// X_f V~ V~^T with V~ the leading q eigenvectors.
inline Matrix reconstruct_rank_q(const PcaModel& model, const Matrix& x_f, Index q) {
  if (q < 1 || q > model.dim()) {
    throw InvalidArgument("reconstruct_rank_q: q must lie in [1, " + std::to_string(model.dim()) + "]");
  }
  if (x_f.cols() != model.dim()) throw InvalidArgument("reconstruct_rank_q: column count mismatch");
  const auto vq = model.v.leftCols(q);
  return (x_f * vq) * vq.transpose();
}

namespace detail {
inline void check_component_set(std::span<const Index> set, Index p) {
  if (set.empty()) throw InvalidArgument("t_statistic: component set is empty");
  for (Index j : set) {
    if (j < 0 || j >= p) {
      throw InvalidArgument("t_statistic: component index " + std::to_string(j) + " out of range");
    }
  }
  std::vector<Index> sorted(set.begin(), set.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgument("t_statistic: duplicate component index");
  }
}
}  // namespace detail

/// t_i = (n - 1) * sum over the set of u_ij^2.
inline Vector t_statistic(const StandardizedScores& scores, std::span<const Index> component_set,
                          Index train_n) {
  detail::check_component_set(component_set, scores.u.cols());
  if (train_n < 2) throw InvalidArgument("t_statistic: train_n must be >= 2");
  Vector t = Vector::Zero(scores.rows());
  for (Index j : component_set) t += scores.u.col(j).array().square().matrix();
  return t * static_cast<double>(train_n - 1);
}

/// The same statistic from principal component scores Z = X V: sum of z_ij^2 / lambda_j.
inline Vector t_statistic_from_pcs(const Matrix& z, const Vector& lambda,
                                   std::span<const Index> component_set) {
  detail::check_component_set(component_set, z.cols());
  Vector t = Vector::Zero(z.rows());
  for (Index j : component_set) {
    if (!(lambda(j) > 0.0)) throw RankDeficient("t_statistic_from_pcs: zero eigenvalue in set");
    t += (z.col(j).array().square() / lambda(j)).matrix();
  }
  return t;
}

inline std::vector<Index> all_components(const PcaModel& model) {
  std::vector<Index> out;
  for (Index j = 0; j < model.dim(); ++j) {
    if (model.active[static_cast<std::size_t>(j)]) out.push_back(j);
  }
  return out;
}

}  // namespace pcaids
