#include "vitality/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vitality::linalg {

namespace {
thread_local alloc_stats::Snapshot g_stats;
}

namespace alloc_stats {
void reset() {
  g_stats.peak_bytes = g_stats.live_bytes;
  g_stats.largest_block = 0;
}
Snapshot snapshot() { return g_stats; }
}  // namespace alloc_stats

namespace detail {
void record_alloc(std::size_t bytes) {
  g_stats.live_bytes += bytes;
  g_stats.peak_bytes = std::max(g_stats.peak_bytes, g_stats.live_bytes);
  g_stats.largest_block = std::max(g_stats.largest_block, bytes);
}
void record_free(std::size_t bytes) {
  // Storage may be released on a different thread than it was allocated on.
  g_stats.live_bytes -= std::min(bytes, g_stats.live_bytes);
}
}  // namespace detail

SingularDenominatorError::SingularDenominatorError(std::size_t row, double value)
    : std::domain_error("singular Taylor denominator at row " + std::to_string(row) +
                        " (value " + std::to_string(value) + ")"),
      row_(row),
      value_(value) {}

Vector::Vector(std::size_t len, double fill) : data_(len, fill) {}

Vector::Vector(std::initializer_list<double> values) : data_(values.begin(), values.end()) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be >= 1, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  data_.assign(rows * cols, fill);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  if (rows_ == 0 || cols_ == 0) throw ShapeError("matrix literal must be non-empty");
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: lhs " + a.shape_string() + " vs rhs " +
                     b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn shape mismatch: lhs^T of " + a.shape_string() + " vs rhs " +
                     b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Vector col_sum(const Matrix& m) {
  Vector s(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += r[j];
  }
  return s;
}

Centered mean_center_cols(const Matrix& k) {
  // Mean taken relative to the first row: exact for constant columns.
  const auto first = k.row(0);
  Vector k_bar(k.cols());
  for (std::size_t i = 1; i < k.rows(); ++i) {
    auto r = k.row(i);
    for (std::size_t j = 0; j < k.cols(); ++j) k_bar[j] += r[j] - first[j];
  }
  const double inv_n = 1.0 / static_cast<double>(k.rows());
  for (std::size_t j = 0; j < k.cols(); ++j) k_bar[j] = first[j] + k_bar[j] * inv_n;

  Matrix k_hat = k;
  for (std::size_t i = 0; i < k.rows(); ++i) {
    auto r = k_hat.row(i);
    for (std::size_t j = 0; j < k.cols(); ++j) r[j] -= k_bar[j];
  }
  return {std::move(k_hat), std::move(k_bar)};
}

Matrix diag_inv_scale_rows(const Vector& t_d, const Matrix& t_n) {
  if (t_d.size() != t_n.rows()) {
    throw ShapeError("diag_inv_scale_rows: divisor length " + std::to_string(t_d.size()) +
                     " vs numerator " + t_n.shape_string());
  }
  Matrix out = t_n;
  for (std::size_t i = 0; i < t_n.rows(); ++i) {
    if (std::abs(t_d[i]) < kSingularThreshold) throw SingularDenominatorError(i, t_d[i]);
    for (double& x : out.row(i)) x /= t_d[i];
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("max_abs_diff shape mismatch: " + a.shape_string() + " vs " +
                     b.shape_string());
  }
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double x : m.values()) r = std::max(r, std::abs(x));
  return r;
}

}  // namespace vitality::linalg
