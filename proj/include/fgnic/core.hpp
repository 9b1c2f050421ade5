#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fgnic {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Invalid configuration value (unknown enum, bad boundary, bad range).
struct ConfigError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
/// Request is well formed but its inputs are not usable (e.g. missing clean image).
struct InputError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};
struct AccountingError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

/// Batch of spatial activations in NHWC order.
///
/// Stored as a `channels x (n*h*w)` column-major matrix, so every column is
/// the channel vector of one pixel and a sample occupies `h*w` consecutive
/// columns in row-major pixel order.
template <typename Scalar>
struct Tensor {
  int n = 0;
  int h = 0;
  int w = 0;
  Matrix<Scalar> data;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c) : n(n_), h(h_), w(w_), data(c, Index(n_) * h_ * w_) {}

  static Tensor zeros(int n, int h, int w, int c) {
    Tensor t(n, h, w, c);
    t.data.setZero();
    return t;
  }

  int c() const { return static_cast<int>(data.rows()); }
  Index pixels() const { return Index(h) * w; }

  auto sample(int i) { return data.middleCols(Index(i) * pixels(), pixels()); }
  auto sample(int i) const { return data.middleCols(Index(i) * pixels(), pixels()); }

  bool same_shape(const Tensor& o) const { return n == o.n && h == o.h && w == o.w && c() == o.c(); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.n = n;
    out.h = h;
    out.w = w;
    out.data = data.template cast<Other>();
    return out;
  }
};

inline std::string shape_string(int n, int h, int w, int c) {
  return "[" + std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" +
         std::to_string(c) + "]";
}

template <typename Scalar>
std::string shape_string(const Tensor<Scalar>& t) {
  return shape_string(t.n, t.h, t.w, t.c());
}

}  // namespace fgnic
