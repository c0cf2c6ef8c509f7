#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace jsmix {

// Sentinel for log(0); finite so MH arithmetic never produces NaN.
constexpr double kLogZero = -1e308;

inline bool is_log_zero(double ll) { return ll <= kLogZero * 0.5; }

// Probabilities are clamped into this range before taking logs.
constexpr double kProbEps = 1e-12;

inline double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

inline double safe_log(double p) { return p <= 0.0 ? kLogZero : std::log(clamp_prob(p)); }

inline double expit(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Raised on malformed user input (CLI exit code 2).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an internal sampler invariant breaks (CLI exit code 3).
class InvariantError : public std::logic_error {
 public:
  explicit InvariantError(const std::string& msg) : std::logic_error(msg) {}
};

// Minimal dense row-major matrix; all the model needs is indexed storage.
template <typename T>
class Grid2 {
 public:
  Grid2() = default;
  Grid2(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  const T& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  T* row(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
  const T* row(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

inline double log_sum_exp(const double* v, int n) {
  double m = kLogZero;
  for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (is_log_zero(m)) return kLogZero;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace jsmix
