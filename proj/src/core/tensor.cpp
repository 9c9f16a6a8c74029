#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace strucgrad {

namespace {
[[noreturn]] void shape_fail(const char* op, std::size_t a, std::size_t b) {
  throw ShapeError(std::string(op) + ": size mismatch " + std::to_string(a) + " vs " +
                   std::to_string(b));
}
}  // namespace

Vector& Vector::operator+=(const Vector& o) {
  if (size() != o.size()) shape_fail("vector add", size(), o.size());
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

Vector& Vector::operator-=(const Vector& o) {
  if (size() != o.size()) shape_fail("vector sub", size(), o.size());
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

Vector& Vector::operator*=(double a) {
  for (double& x : v_) x *= a;
  return *this;
}

void Vector::axpy(double a, const Vector& x) {
  if (size() != x.size()) shape_fail("axpy", size(), x.size());
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
}

double Vector::dot(const Vector& o) const {
  if (size() != o.size()) shape_fail("dot", size(), o.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * o.v_[i];
  return s;
}

double Vector::norm() const {
  double s = 0.0;
  for (double x : v_) s += x * x;
  return std::sqrt(s);
}

bool Vector::all_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t i = 0;
  for (const auto& r : rows) {
    if (r.size() != m.cols_) shape_fail("matrix from_rows", r.size(), m.cols_);
    std::copy(r.begin(), r.end(), m.v_.begin() + i * m.cols_);
    ++i;
  }
  return m;
}

Vector Matrix::matvec(const Vector& x) const {
  if (x.size() != cols_) shape_fail("matvec", cols_, x.size());
  Vector out(rows_);
  strucgrad::matvec(v_, rows_, cols_, x.span(), out.span());
  return out;
}

Vector Matrix::tmatvec(const Vector& x) const {
  if (x.size() != rows_) shape_fail("tmatvec", rows_, x.size());
  Vector out(cols_);
  strucgrad::tmatvec(v_, rows_, cols_, x.span(), out.span());
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool Matrix::all_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) shape_fail("matrix add", rows_ * cols_, o.rows_ * o.cols_);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

Matrix& Matrix::operator*=(double a) {
  for (double& x : v_) x *= a;
  return *this;
}

void matvec(std::span<const double> w, std::size_t r, std::size_t c,
            std::span<const double> x, std::span<double> out) {
  if (w.size() != r * c || x.size() != c || out.size() != r)
    throw ShapeError("matvec kernel: inconsistent spans");
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = w.data() + i * c;
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += row[j] * x[j];
    out[i] = s;
  }
}

void tmatvec(std::span<const double> w, std::size_t r, std::size_t c,
             std::span<const double> x, std::span<double> out) {
  if (w.size() != r * c || x.size() != r || out.size() != c)
    throw ShapeError("tmatvec kernel: inconsistent spans");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = w.data() + i * c;
    double xi = x[i];
    for (std::size_t j = 0; j < c; ++j) out[j] += row[j] * xi;
  }
}

void add_outer(std::span<double> w, std::span<const double> a, std::span<const double> b,
               double scale) {
  if (w.size() != a.size() * b.size()) throw ShapeError("add_outer: inconsistent spans");
  for (std::size_t i = 0; i < a.size(); ++i) {
    double s = scale * a[i];
    double* row = w.data() + i * b.size();
    for (std::size_t j = 0; j < b.size(); ++j) row[j] += s * b[j];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot kernel: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(std::span<double> y, double a, std::span<const double> x) {
  if (y.size() != x.size()) throw ShapeError("axpy kernel: size mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

}  // namespace strucgrad
