#include "fgnic/imaging.hpp"

#include <algorithm>
#include <cstdio>
#include <vector>

namespace fgnic {

std::string to_string(DegradationKind k) {
  switch (k) {
    case DegradationKind::uniform:
      return "uniform";
    case DegradationKind::linear1d:
      return "linear1d";
    case DegradationKind::radial2d:
      return "radial2d";
  }
  throw ConfigError("unknown degradation kind");
}

DegradationKind degradation_kind_from_string(const std::string& s) {
  if (s == "uniform") return DegradationKind::uniform;
  if (s == "linear1d") return DegradationKind::linear1d;
  if (s == "radial2d") return DegradationKind::radial2d;
  throw ConfigError("unknown degradation kind '" + s + "'");
}

std::string to_string(Axis a) { return a == Axis::rows ? "rows" : "cols"; }

Axis axis_from_string(const std::string& s) {
  if (s == "rows") return Axis::rows;
  if (s == "cols") return Axis::cols;
  throw ConfigError("unknown axis '" + s + "'");
}

namespace {

bool valid_sigma(double s) { return std::isfinite(s) && s >= 0.0; }

std::string fmt_sigma(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

}  // namespace

void DegradationSpec::validate() const {
  switch (kind) {
    case DegradationKind::uniform:
      if (!valid_sigma(sigma)) throw ConfigError("uniform sigma must be finite and >= 0");
      return;
    case DegradationKind::linear1d:
    case DegradationKind::radial2d:
      if (!valid_sigma(sigma_lo) || !valid_sigma(sigma_hi))
        throw ConfigError("varying sigma endpoints must be finite and >= 0");
      if (sigma_lo > sigma_hi) throw ConfigError("sigma_lo must not exceed sigma_hi");
      if (kind == DegradationKind::radial2d && center && (center->first < 0 || center->second < 0))
        throw ConfigError("radial center must be non-negative");
      return;
  }
  throw ConfigError("unknown degradation kind");
}

std::string DegradationSpec::label() const {
  switch (kind) {
    case DegradationKind::uniform:
      return "uniform:" + fmt_sigma(sigma);
    case DegradationKind::linear1d:
      return "linear1d:" + to_string(axis) + ":" + fmt_sigma(sigma_lo) + "-" + fmt_sigma(sigma_hi);
    case DegradationKind::radial2d: {
      std::string c = center ? std::to_string(center->first) + "," + std::to_string(center->second) : "random";
      return "radial2d:" + c + ":" + fmt_sigma(sigma_lo) + "-" + fmt_sigma(sigma_hi);
    }
  }
  throw ConfigError("unknown degradation kind");
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t pos; (pos = s.find(sep, start)) != std::string::npos; start = pos + 1)
    parts.push_back(s.substr(start, pos - start));
  parts.push_back(s.substr(start));
  return parts;
}

double parse_sigma(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("malformed sigma '" + s + "'");
  return v;
}

std::pair<double, double> parse_range(const std::string& s) {
  const auto r = split_on(s, '-');
  if (r.size() != 2) throw ConfigError("malformed sigma range '" + s + "'");
  return {parse_sigma(r[0]), parse_sigma(r[1])};
}

}  // namespace

DegradationSpec DegradationSpec::parse(const std::string& label) {
  const auto parts = split_on(label, ':');
  const DegradationKind kind = degradation_kind_from_string(parts[0]);
  DegradationSpec spec;
  if (kind == DegradationKind::uniform) {
    if (parts.size() != 2) throw ConfigError("expected uniform:<sigma>, got '" + label + "'");
    spec = uniform(parse_sigma(parts[1]));
  } else if (kind == DegradationKind::linear1d) {
    if (parts.size() != 3) throw ConfigError("expected linear1d:<rows|cols>:<lo>-<hi>, got '" + label + "'");
    const auto [lo, hi] = parse_range(parts[2]);
    spec = linear(lo, hi, axis_from_string(parts[1]));
  } else {
    if (parts.size() != 3) throw ConfigError("expected radial2d:<random|row,col>:<lo>-<hi>, got '" + label + "'");
    const auto [lo, hi] = parse_range(parts[2]);
    std::optional<std::pair<int, int>> center;
    if (parts[1] != "random") {
      const auto rc = split_on(parts[1], ',');
      if (rc.size() != 2) throw ConfigError("malformed radial center '" + parts[1] + "'");
      center = std::pair<int, int>(int(parse_sigma(rc[0])), int(parse_sigma(rc[1])));
    }
    spec = radial(lo, hi, center);
  }
  spec.validate();
  return spec;
}

NoiseField make_noise_field(const DegradationSpec& spec, int h, int w) {
  if (h < 1 || w < 1) throw ShapeError("noise field dimensions must be >= 1");
  spec.validate();
  NoiseField f{h, w, Vector<double>(Index(h) * w)};
  const double span = spec.sigma_hi - spec.sigma_lo;
  switch (spec.kind) {
    case DegradationKind::uniform:
      f.sigma.setConstant(spec.sigma);
      break;
    case DegradationKind::linear1d:
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const int pos = spec.axis == Axis::rows ? i : j;
          const int len = spec.axis == Axis::rows ? h : w;
          const double t = len > 1 ? double(pos) / double(len - 1) : 0.0;
          f.sigma(Index(i) * w + j) = spec.sigma_lo + span * t;
        }
      }
      break;
    case DegradationKind::radial2d: {
      int cr = 0;
      int cc = 0;
      if (spec.center) {
        cr = spec.center->first;
        cc = spec.center->second;
        if (cr >= h || cc >= w) throw ConfigError("radial center lies outside the image");
      } else {
        Rng rng(spec.seed);
        std::uniform_int_distribution<Index> pick(0, Index(h) * w - 1);
        const Index p = pick(rng);
        cr = static_cast<int>(p / w);
        cc = static_cast<int>(p % w);
      }
      double dmax = 0.0;
      for (int r : {0, h - 1})
        for (int c : {0, w - 1}) dmax = std::max(dmax, std::hypot(double(r - cr), double(c - cc)));
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          const double t = dmax > 0.0 ? std::hypot(double(i - cr), double(j - cc)) / dmax : 0.0;
          f.sigma(Index(i) * w + j) = spec.sigma_lo + span * t;
        }
      break;
    }
  }
  return f;
}

}  // namespace fgnic
