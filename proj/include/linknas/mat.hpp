#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace linknas {

// Dense row-major matrix of doubles. Everything in this project is tiny
// (N <= 31 nodes, feature widths 5/16/32), so a flat vector is all we need.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<size_t>(r) * cols_ + c];
  }

  double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  // Reshape without reallocating when capacity suffices; used by workspaces.
  void resize(int rows, int cols) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
  }

  bool operator==(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// out[r,:] += a[r,:] * b for a row-major a (r x k) and b (k x c).
inline void matmul(const Mat& a, const Mat& b, Mat& out) {
  assert(a.cols() == b.rows());
  out.resize(a.rows(), b.cols());
  for (int r = 0; r < a.rows(); ++r) {
    const double* arow = a.row(r);
    double* orow = out.row(r);
    for (int k = 0; k < a.cols(); ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b.row(k);
      for (int c = 0; c < b.cols(); ++c) orow[c] += av * brow[c];
    }
  }
}

}  // namespace linknas
