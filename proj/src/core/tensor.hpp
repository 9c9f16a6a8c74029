#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "core/error.hpp"

namespace strucgrad {

// Dense 64-bit float vector with a fixed length. Arithmetic checks shape
// compatibility and throws ShapeError on mismatch.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : v_(n, fill) {}
  Vector(std::initializer_list<double> init) : v_(init) {}
  static Vector from(std::vector<double> values) {
    Vector out;
    out.v_ = std::move(values);
    return out;
  }

  std::size_t size() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::span<double> span() { return v_; }
  std::span<const double> span() const { return v_; }

  Vector& operator+=(const Vector& o);
  Vector& operator-=(const Vector& o);
  Vector& operator*=(double a);
  // this += a * x
  void axpy(double a, const Vector& x);

  double dot(const Vector& o) const;
  double norm() const;
  bool all_finite() const;
  void fill(double a) { std::fill(v_.begin(), v_.end(), a); }

  friend Vector operator+(Vector a, const Vector& b) { return a += b; }
  friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
  friend Vector operator*(double a, Vector x) { return x *= a; }

 private:
  std::vector<double> v_;
};

// Row-major dense matrix with immutable dimensions.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::span<double> row(std::size_t i) { return {v_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {v_.data() + i * cols_, cols_}; }

  Vector matvec(const Vector& x) const;   // A x
  Vector tmatvec(const Vector& x) const;  // A^T x
  Matrix transpose() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator*=(double a);

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

// Span-based kernels used on parameter-vector segments.
// w is row-major r x c.
void matvec(std::span<const double> w, std::size_t r, std::size_t c,
            std::span<const double> x, std::span<double> out);
void tmatvec(std::span<const double> w, std::size_t r, std::size_t c,
             std::span<const double> x, std::span<double> out);
// w += scale * a b^T
void add_outer(std::span<double> w, std::span<const double> a, std::span<const double> b,
               double scale);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(std::span<double> y, double a, std::span<const double> x);
double norm(std::span<const double> a);

}  // namespace strucgrad
