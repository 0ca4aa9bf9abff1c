#include "core/matrix.hpp"

#include <cmath>

namespace msa::num {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols())
      throw DimensionError("ragged row " + std::to_string(i) + " in matrix literal");
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix softmax_rows(const Matrix& a) {
  if (a.cols() == 0)
    throw DimensionError("softmax_rows on zero-column matrix " + a.shape_str());
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double mx = a(i, 0);
    for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, a(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(i, j) = std::exp(a(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) /= total;
  }
  return out;
}

namespace {

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k]);
  return out;
}

template <typename F>
Matrix zip(const Matrix& a, const Matrix& b, const char* name, F f) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(name) + " shape mismatch: " + a.shape_str() +
                         " vs " + b.shape_str());
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = f(a[k], b[k]);
  return out;
}

}  // namespace

Matrix sigmoid(const Matrix& a) {
  return map(a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Matrix tanh_m(const Matrix& a) {
  return map(a, [](double v) { return std::tanh(v); });
}

Matrix relu(const Matrix& a) {
  return map(a, [](double v) { return v > 0.0 ? v : 0.0; });
}

Matrix add(const Matrix& a, const Matrix& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Matrix sub(const Matrix& a, const Matrix& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Matrix mul(const Matrix& a, const Matrix& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Matrix scale(const Matrix& a, double c) {
  return map(a, [c](double v) { return c * v; });
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps) {
  if (gain.size() != x.cols() || bias.size() != x.cols())
    throw DimensionError("layer_norm gain/bias length must equal cols: x=" + x.shape_str() +
                         " gain=" + std::to_string(gain.size()) +
                         " bias=" + std::to_string(bias.size()));
  Matrix out(x.rows(), x.cols());
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = gain[j] * (x(i, j) - mean) * inv + bias[j];
  }
  return out;
}

Matrix concat_cols(std::span<const Matrix> parts) {
  if (parts.empty()) throw DimensionError("concat_cols needs at least one part");
  std::size_t total = 0;
  for (const Matrix& p : parts) {
    if (p.rows() != parts[0].rows())
      throw DimensionError("concat_cols row mismatch: " + parts[0].shape_str() + " vs " +
                           p.shape_str());
    total += p.cols();
  }
  Matrix out(parts[0].rows(), total);
  std::size_t off = 0;
  for (const Matrix& p : parts) {
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, off + j) = p(i, j);
    off += p.cols();
  }
  return out;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  const Matrix parts[] = {a, b};
  return concat_cols(std::span<const Matrix>(parts, 2));
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols())
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for " + a.shape_str());
  Matrix out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a(i, j);
  return out;
}

Matrix mean_pool_rows(const Matrix& a) {
  if (a.rows() == 0)
    throw DimensionError("mean_pool_rows on empty matrix");
  Matrix out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) /= static_cast<double>(a.rows());
  return out;
}

double sum(const Matrix& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k];
  return s;
}

}  // namespace msa::num
