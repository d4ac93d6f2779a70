#pragma once

// Shared test utilities: seeded generators, independent numerical oracles and
// scratch directories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

namespace testing_support {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double normal() { return std::normal_distribution<double>()(rng_); }
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform() < p; }

  Matrix gaussian(Index n, Index p) {
    Matrix m(n, p);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) m(i, j) = normal();
    return m;
  }

  /// Rows with correlated columns and varying scales/offsets.
  Matrix correlated(Index n, Index p) {
    Matrix mix(p, p);
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j) mix(i, j) = normal() * (i == j ? 2.0 : 0.5);
    Matrix y = gaussian(n, p) * mix;
    for (Index j = 0; j < p; ++j) {
      const double scale = std::exp(uniform(-3.0, 3.0));
      const double shift = uniform(-100.0, 100.0);
      y.col(j) = (y.col(j).array() * scale + shift).matrix();
    }
    return y;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix; eigenvalues sorted descending.
inline std::pair<Vector, Matrix> jacobi_eigen(Matrix a) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  Vector vals(n);
  Matrix vecs(n, n);
  for (Index k = 0; k < n; ++k) {
    vals(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    vecs.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return {vals, vecs};
}

/// Correlation matrix computed directly from the definition.
inline Matrix correlation(const Matrix& y) {
  const Index n = y.rows(), p = y.cols();
  Vector mu = y.colwise().mean();
  Matrix c(p, p);
  for (Index a = 0; a < p; ++a)
    for (Index b = 0; b < p; ++b) {
      double sab = 0, saa = 0, sbb = 0;
      for (Index i = 0; i < n; ++i) {
        const double da = y(i, a) - mu(a), db = y(i, b) - mu(b);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
      }
      c(a, b) = sab / std::sqrt(saa * sbb);
    }
  return c;
}

/// Chi-square CDF by composite Simpson quadrature of the density.
inline double chi2_cdf_quadrature(double x, int k) {
  if (x <= 0) return 0.0;
  const double half = 0.5 * k;
  const double log_norm = -half * std::log(2.0) - std::lgamma(half);
  // substitute u = t^(1/2) near zero to remove the t^(k/2-1) singularity for k = 1
  const int steps = 200000;
  const double umax = std::sqrt(x);
  const double h = umax / steps;
  auto f = [&](double u) {
    if (u <= 0) return k == 1 ? 2.0 * std::exp(log_norm) : 0.0;
    const double t = u * u;
    return 2.0 * u * std::exp(log_norm + (half - 1.0) * std::log(t) - 0.5 * t);
  };
  double s = f(0) + f(umax);
  for (int i = 1; i < steps; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double chi2_quantile_quadrature(double p, int k) {
  double lo = 0.0, hi = 1.0;
  while (chi2_cdf_quadrature(hi, k) < p) hi *= 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf_quadrature(mid, k) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pcaids_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV with header f1..fp (+ optional label column).
inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& y, const std::vector<bool>* labels = nullptr) {
  std::ofstream out(path);
  out.precision(17);
  for (Index j = 0; j < y.cols(); ++j) out << (j ? "," : "") << "f" << (j + 1);
  if (labels) out << ",label";
  out << "\n";
  for (Index i = 0; i < y.rows(); ++i) {
    for (Index j = 0; j < y.cols(); ++j) out << (j ? "," : "") << y(i, j);
    if (labels) out << "," << ((*labels)[static_cast<std::size_t>(i)] ? 1 : 0);
    out << "\n";
  }
}

}  // namespace testing_support
