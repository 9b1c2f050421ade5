#include "fgnic/fidelity.hpp"

namespace fgnic {

std::string to_string(FidelityMetric m) {
  switch (m) {
    case FidelityMetric::l1:
      return "l1";
    case FidelityMetric::l2:
      return "l2";
    case FidelityMetric::cosine:
      return "cosine";
  }
  throw ConfigError("unknown fidelity metric");
}

FidelityMetric fidelity_metric_from_string(const std::string& s) {
  if (s == "l1") return FidelityMetric::l1;
  if (s == "l2") return FidelityMetric::l2;
  if (s == "cosine") return FidelityMetric::cosine;
  throw ConfigError("unknown fidelity metric '" + s + "'");
}

std::string to_string(DownsampleMethod m) {
  switch (m) {
    case DownsampleMethod::average_pool:
      return "average_pool";
    case DownsampleMethod::bilinear:
      return "bilinear";
    case DownsampleMethod::nearest:
      return "nearest";
  }
  throw ConfigError("unknown downsample method");
}

DownsampleMethod downsample_method_from_string(const std::string& s) {
  if (s == "average_pool") return DownsampleMethod::average_pool;
  if (s == "bilinear") return DownsampleMethod::bilinear;
  if (s == "nearest") return DownsampleMethod::nearest;
  throw ConfigError("unknown downsample method '" + s + "'");
}

namespace detail {

Taps resample_taps(int src, int dst, DownsampleMethod method) {
  Taps t;
  t.rows.resize(dst);
  const double scale = double(src) / double(dst);
  for (int i = 0; i < dst; ++i) {
    auto& row = t.rows[i];
    switch (method) {
      case DownsampleMethod::average_pool: {
        // Near-equal contiguous bins; a bin never goes empty when upsampling.
        const int begin = static_cast<int>((long long)i * src / dst);
        const int end = std::max(static_cast<int>((long long)(i + 1) * src / dst), begin + 1);
        const double wt = 1.0 / double(end - begin);
        for (int s = begin; s < end; ++s) row.emplace_back(s, wt);
        break;
      }
      case DownsampleMethod::bilinear: {
        // Half-pixel centers, edge-clamped.
        const double pos = std::clamp((i + 0.5) * scale - 0.5, 0.0, double(src - 1));
        const int lo = static_cast<int>(std::floor(pos));
        const int hi = std::min(lo + 1, src - 1);
        const double frac = pos - lo;
        if (hi == lo || frac == 0.0) {
          row.emplace_back(lo, 1.0);
        } else {
          row.emplace_back(lo, 1.0 - frac);
          row.emplace_back(hi, frac);
        }
        break;
      }
      case DownsampleMethod::nearest: {
        const int s = std::min(static_cast<int>(std::floor((i + 0.5) * scale)), src - 1);
        row.emplace_back(s, 1.0);
        break;
      }
      default:
        throw ConfigError("unknown downsample method");
    }
  }
  return t;
}

}  // namespace detail
}  // namespace fgnic
