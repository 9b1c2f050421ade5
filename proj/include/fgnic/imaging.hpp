#pragma once

#include "fgnic/core.hpp"
#include "fgnic/random.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

namespace fgnic {

/// H x W x C image with values in [0,1].
///
/// Pixels are the columns of `data` (row-major pixel order) and channels its
/// rows, the same layout as a single-sample `Tensor`.
template <typename Scalar>
struct Image {
  int h = 0;
  int w = 0;
  Matrix<Scalar> data;

  Image() = default;
  Image(int h_, int w_, int c) : h(h_), w(w_), data(c, Index(h_) * w_) {
    if (h_ < 1 || w_ < 1 || c < 1) throw ShapeError("image dimensions must be >= 1, got " + shape_string(1, h_, w_, c));
  }

  static Image constant(int h, int w, int c, Scalar v) {
    Image im(h, w, c);
    im.data.setConstant(v);
    return im;
  }

  int c() const { return static_cast<int>(data.rows()); }
  Index pixels() const { return Index(h) * w; }

  Scalar& operator()(int i, int j, int ch) { return data(ch, Index(i) * w + j); }
  Scalar operator()(int i, int j, int ch) const { return data(ch, Index(i) * w + j); }

  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c() == o.c(); }

  bool in_unit_range() const {
    return data.size() > 0 && data.minCoeff() >= Scalar(0) && data.maxCoeff() <= Scalar(1);
  }

  template <typename Other>
  Image<Other> cast() const {
    Image<Other> out;
    out.h = h;
    out.w = w;
    out.data = data.template cast<Other>();
    return out;
  }
};

enum class DegradationKind { uniform, linear1d, radial2d };
enum class Axis { rows, cols };

std::string to_string(DegradationKind k);
DegradationKind degradation_kind_from_string(const std::string& s);
std::string to_string(Axis a);
Axis axis_from_string(const std::string& s);

/// Description of an additive white Gaussian noise degradation.
struct DegradationSpec {
  DegradationKind kind = DegradationKind::uniform;
  double sigma = 0.0;
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
  Axis axis = Axis::rows;
  /// Radial center as (row, col); empty means drawn from `seed`.
  std::optional<std::pair<int, int>> center;
  std::uint64_t seed = 0;

  static DegradationSpec uniform(double sigma) {
    DegradationSpec s;
    s.sigma = sigma;
    return s;
  }
  static DegradationSpec linear(double lo, double hi, Axis axis = Axis::rows) {
    DegradationSpec s;
    s.kind = DegradationKind::linear1d;
    s.sigma_lo = lo;
    s.sigma_hi = hi;
    s.axis = axis;
    return s;
  }
  static DegradationSpec radial(double lo, double hi, std::optional<std::pair<int, int>> center = std::nullopt,
                                std::uint64_t seed = 0) {
    DegradationSpec s;
    s.kind = DegradationKind::radial2d;
    s.sigma_lo = lo;
    s.sigma_hi = hi;
    s.center = center;
    s.seed = seed;
    return s;
  }

  /// Throws ConfigError when the spec violates its invariants.
  void validate() const;
  /// Short stable identifier, used as report column key.
  std::string label() const;
  /// Inverse of label(); throws ConfigError on malformed input.
  static DegradationSpec parse(const std::string& label);
  /// Largest sigma the spec can produce.
  double max_sigma() const { return kind == DegradationKind::uniform ? sigma : sigma_hi; }
};

/// Per-pixel noise standard deviation, row-major over an H x W grid.
struct NoiseField {
  int h = 0;
  int w = 0;
  Vector<double> sigma;

  double operator()(int i, int j) const { return sigma(Index(i) * w + j); }
};

NoiseField make_noise_field(const DegradationSpec& spec, int h, int w);

/// Unclamped noise realisation for `channels` channels, independent per
/// (pixel, channel). Fully determined by `seed`.
template <typename Scalar>
Matrix<Scalar> draw_noise(const NoiseField& field, int channels, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> n(channels, Index(field.h) * field.w);
  for (Index p = 0; p < n.cols(); ++p) {
    const double s = field.sigma(p);
    for (int c = 0; c < channels; ++c) n(c, p) = static_cast<Scalar>(s * normal(rng));
  }
  return n;
}

template <typename Scalar>
Image<Scalar> degrade(const Image<Scalar>& image, const NoiseField& field, std::uint64_t seed) {
  if (image.h != field.h || image.w != field.w)
    throw ShapeError("noise field " + std::to_string(field.h) + "x" + std::to_string(field.w) +
                     " does not match image " + std::to_string(image.h) + "x" + std::to_string(image.w));
  Image<Scalar> out = image;
  out.data = (image.data + draw_noise<Scalar>(field, image.c(), seed)).cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  return out;
}

/// Peak signal-to-noise ratio for unit peak; +infinity when the images match.
template <typename Scalar>
double psnr(const Image<Scalar>& a, const Image<Scalar>& b) {
  if (!a.same_shape(b)) throw ShapeError("psnr: image shapes differ");
  const double mse = (a.data.template cast<double>() - b.data.template cast<double>()).squaredNorm() /
                     static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

template <typename Derived>
auto gamma_correct(const Eigen::DenseBase<Derived>& map, double gamma) {
  using Scalar = typename Derived::Scalar;
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be > 0, got " + std::to_string(gamma));
  return map.derived().array().pow(static_cast<Scalar>(gamma)).matrix().eval();
}

}  // namespace fgnic
