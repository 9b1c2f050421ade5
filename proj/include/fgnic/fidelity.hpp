#pragma once

#include "fgnic/core.hpp"
#include "fgnic/imaging.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fgnic {

/// Per-pixel confidence in a restored image, values in [0,1], row-major H x W.
template <typename Scalar>
struct FidelityMap {
  int h = 0;
  int w = 0;
  Vector<Scalar> values;

  FidelityMap() = default;
  FidelityMap(int h_, int w_) : h(h_), w(w_), values(Index(h_) * w_) {}
  FidelityMap(int h_, int w_, Vector<Scalar> v) : h(h_), w(w_), values(std::move(v)) {
    if (values.size() != Index(h) * w) throw ShapeError("fidelity map size does not match its dimensions");
  }

  static FidelityMap constant(int h, int w, Scalar v) {
    FidelityMap m(h, w);
    m.values.setConstant(v);
    return m;
  }

  Scalar operator()(int i, int j) const { return values(Index(i) * w + j); }
  Scalar& operator()(int i, int j) { return values(Index(i) * w + j); }

  /// View as an H x W matrix (row-major storage).
  auto grid() const {
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), h,
                                                                                                      w);
  }
};

enum class FidelityMetric { l1, l2, cosine };
enum class DownsampleMethod { average_pool, bilinear, nearest };

std::string to_string(FidelityMetric m);
FidelityMetric fidelity_metric_from_string(const std::string& s);
std::string to_string(DownsampleMethod m);
DownsampleMethod downsample_method_from_string(const std::string& s);

namespace detail {

/// Fidelity of every pixel column of two `channels x pixels` blocks.
template <typename Scalar, typename A, typename B>
RowVector<Scalar> pixel_fidelity(const Eigen::MatrixBase<A>& clean, const Eigen::MatrixBase<B>& restored,
                                 FidelityMetric metric) {
  const Index channels = clean.rows();
  RowVector<Scalar> f(clean.cols());
  switch (metric) {
    case FidelityMetric::l1:
      f = RowVector<Scalar>::Ones(clean.cols()) -
          (restored - clean).cwiseAbs().colwise().sum() / static_cast<Scalar>(channels);
      break;
    case FidelityMetric::l2:
      f = RowVector<Scalar>::Ones(clean.cols()) -
          ((restored - clean).cwiseAbs2().colwise().sum() / static_cast<Scalar>(channels)).cwiseSqrt();
      break;
    case FidelityMetric::cosine:
      for (Index p = 0; p < clean.cols(); ++p) {
        // One accumulation order for all three sums: identical inputs give
        // s / sqrt(s * s), which is exactly 1 under round-to-nearest.
        Scalar dot(0), xx(0), yy(0);
        for (Index c = 0; c < channels; ++c) {
          const Scalar x = clean(c, p), y = restored(c, p);
          dot += x * y;
          xx += x * x;
          yy += y * y;
        }
        if (xx == Scalar(0) && yy == Scalar(0))
          f(p) = Scalar(1);
        else if (xx == Scalar(0) || yy == Scalar(0))
          f(p) = Scalar(0);
        else
          f(p) = dot / std::sqrt(xx * yy);
      }
      break;
    default:
      throw ConfigError("unknown fidelity metric");
  }
  return f.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

/// Weights of a 1-D resampling from `src` to `dst` samples; entry (i, j, w)
/// means output i receives w * input j.
struct Taps {
  std::vector<std::vector<std::pair<int, double>>> rows;
};

Taps resample_taps(int src, int dst, DownsampleMethod method);

}  // namespace detail

template <typename Scalar>
FidelityMap<Scalar> oracle_fidelity(const Image<Scalar>& clean, const Image<Scalar>& restored, FidelityMetric metric) {
  if (!clean.same_shape(restored))
    throw ShapeError("oracle_fidelity: clean " + shape_string(1, clean.h, clean.w, clean.c()) + " vs restored " +
                     shape_string(1, restored.h, restored.w, restored.c()));
  RowVector<Scalar> f = detail::pixel_fidelity<Scalar>(clean.data, restored.data, metric);
  return FidelityMap<Scalar>(clean.h, clean.w, f.transpose());
}

/// Batched oracle fidelity; returns a single-channel tensor.
template <typename Scalar>
Tensor<Scalar> oracle_fidelity(const Tensor<Scalar>& clean, const Tensor<Scalar>& restored, FidelityMetric metric) {
  if (!clean.same_shape(restored)) throw ShapeError("oracle_fidelity: batch shapes differ");
  Tensor<Scalar> out(clean.n, clean.h, clean.w, 1);
  out.data = detail::pixel_fidelity<Scalar>(clean.data, restored.data, metric);
  return out;
}

/// Linear resampling operator from an (h x w) grid to (hs x ws), acting on
/// row-major flattened maps. Its transpose is the adjoint used in backprop.
template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> resize_operator(int h, int w, int hs, int ws, DownsampleMethod method) {
  if (h < 1 || w < 1 || hs < 1 || ws < 1) throw ShapeError("resize dimensions must be >= 1");
  const auto rt = detail::resample_taps(h, hs, method);
  const auto ct = detail::resample_taps(w, ws, method);
  std::vector<Eigen::Triplet<Scalar>> trips;
  for (int i = 0; i < hs; ++i)
    for (int j = 0; j < ws; ++j)
      for (auto [si, wi] : rt.rows[i])
        for (auto [sj, wj] : ct.rows[j])
          trips.emplace_back(i * ws + j, si * w + sj, static_cast<Scalar>(wi * wj));
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> op(Index(hs) * ws, Index(h) * w);
  op.setFromTriplets(trips.begin(), trips.end());
  return op;
}

/// Row-major flatten followed by 1-D resampling to `length` entries.
template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> flatten_operator(int h, int w, int length, DownsampleMethod method) {
  if (h < 1 || w < 1 || length < 1) throw ShapeError("flatten_downsample dimensions must be >= 1");
  const auto taps = detail::resample_taps(h * w, length, method);
  std::vector<Eigen::Triplet<Scalar>> trips;
  for (int i = 0; i < length; ++i)
    for (auto [s, wt] : taps.rows[i]) trips.emplace_back(i, s, static_cast<Scalar>(wt));
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> op(length, Index(h) * w);
  op.setFromTriplets(trips.begin(), trips.end());
  return op;
}

template <typename Scalar>
FidelityMap<Scalar> resize_fidelity(const FidelityMap<Scalar>& map, int hs, int ws,
                                     DownsampleMethod method = DownsampleMethod::average_pool) {
  if (hs == map.h && ws == map.w) return map;
  Vector<Scalar> v = resize_operator<Scalar>(map.h, map.w, hs, ws, method) * map.values;
  return FidelityMap<Scalar>(hs, ws, v.cwiseMax(Scalar(0)).cwiseMin(Scalar(1)));
}

template <typename Scalar>
Vector<Scalar> flatten_downsample(const FidelityMap<Scalar>& map, int length,
                                  DownsampleMethod method = DownsampleMethod::average_pool) {
  Vector<Scalar> v = flatten_operator<Scalar>(map.h, map.w, length, method) * map.values;
  return v.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

}  // namespace fgnic
