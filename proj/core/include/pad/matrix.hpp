#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pad {

/// Dense row-major matrix of doubles. Small and tabular by intent.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

// log(sum(exp(x))) with max-shift.
double log_sum_exp(std::span<const double> x);

// Writes log_softmax(x) into out (may alias x).
void log_softmax(std::span<const double> x, std::span<double> out);

// Numerically stable logistic function and its log.
double sigmoid(double x);
double log_sigmoid(double x);

}  // namespace pad
