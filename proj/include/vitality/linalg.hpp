#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vitality::linalg {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a row divisor is zero or within kSingularThreshold of zero.
class SingularDenominatorError : public std::domain_error {
 public:
  SingularDenominatorError(std::size_t row, double value);
  std::size_t row() const { return row_; }
  double value() const { return value_; }

 private:
  std::size_t row_;
  double value_;
};

inline constexpr double kSingularThreshold = 1e-12;

// Per-thread accounting of live matrix/vector storage. Used by tests to show
// that the linear Taylor path never holds an n x n buffer.
namespace alloc_stats {
struct Snapshot {
  std::size_t live_bytes = 0;
  std::size_t peak_bytes = 0;
  std::size_t largest_block = 0;
};

// Resets peak and largest-block tracking to the current live size.
void reset();
Snapshot snapshot();
}  // namespace alloc_stats

namespace detail {
void record_alloc(std::size_t bytes);
void record_free(std::size_t bytes);

template <typename T>
struct TrackingAllocator {
  using value_type = T;
  TrackingAllocator() = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t count) {
    record_alloc(count * sizeof(T));
    return std::allocator<T>{}.allocate(count);
  }
  void deallocate(T* p, std::size_t count) noexcept {
    record_free(count * sizeof(T));
    std::allocator<T>{}.deallocate(p, count);
  }
  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};
}  // namespace detail

using Storage = std::vector<double, detail::TrackingAllocator<double>>;

class Vector {
 public:
  explicit Vector(std::size_t len, double fill = 0.0);
  Vector(std::initializer_list<double> values);

  std::size_t size() const { return data_.size(); }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  std::span<const double> values() const { return data_; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  Storage data_;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> values() const { return data_; }

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  Storage data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
// a^T * b without materializing a^T.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// 1_n^T m
Vector col_sum(const Matrix& m);

struct Centered {
  Matrix k_hat;
  Vector k_bar;
};
Centered mean_center_cols(const Matrix& k);

// diag^{-1}(t_d) * t_n
Matrix diag_inv_scale_rows(const Vector& t_d, const Matrix& t_n);

double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& m);

}  // namespace vitality::linalg
