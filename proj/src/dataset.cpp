#include "fgnic/dataset.hpp"

#include "fgnic/hash.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

namespace fs = std::filesystem;

namespace fgnic {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_names = class_names;
  out.images.reserve(indices.size());
  for (auto i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
    if (!paths.empty()) out.paths.push_back(paths.at(i));
  }
  return out;
}

std::string Dataset::content_hash() const {
  Sha256 h;
  for (const auto& n : class_names) h.update(n + "\n");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int meta[4] = {labels[i], images[i].h, images[i].w, images[i].c()};
    h.update(meta, sizeof meta);
    h.update(images[i].data.data(), sizeof(float) * images[i].data.size());
  }
  return h.hex_digest();
}

SplitIndices stratified_split(const std::vector<int>& labels, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("split fraction must be in [0,1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  SplitIndices out;
  for (auto& [label, idx] : by_class) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(label)}));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(fraction * double(idx.size())));
    if (fraction > 0.0 && take == 0 && idx.size() >= 2) take = 1;
    out.held_out.insert(out.held_out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.held_out.begin(), out.held_out.end());
  return out;
}

namespace {

const std::array<const char*, 10> kShapeNames = {"disk",    "square",   "triangle", "ring",     "cross",
                                                 "hstripes", "vstripes", "checker",  "diagonal", "dots"};

/// Foreground membership of pixel offset (dx, dy) from the shape center,
/// in the shape's rotated frame.
bool inside(int shape, double dx, double dy, double r, int period) {
  const double d = std::hypot(dx, dy);
  const bool window = std::abs(dx) <= r && std::abs(dy) <= r;
  auto band = [&](double v) { return (static_cast<long>(std::floor(v / period)) & 1) == 0; };
  switch (shape % 10) {
    case 0:
      return d <= r;
    case 1:
      return std::max(std::abs(dx), std::abs(dy)) <= 0.85 * r;
    case 2:  // upward triangle, apex at -r
      return dy <= 0.6 * r && dy >= -r && std::abs(dx) <= (dy + r) * 0.65;
    case 3:
      return d <= r && d >= 0.55 * r;
    case 4:
      return (std::abs(dx) <= 0.3 * r && std::abs(dy) <= r) || (std::abs(dy) <= 0.3 * r && std::abs(dx) <= r);
    case 5:
      return window && band(dy + r);
    case 6:
      return window && band(dx + r);
    case 7:
      return window && (band(dx + r) != band(dy + r));
    case 8:
      return window && band(dx + dy + 2 * r);
    case 9: {
      const double sx = std::fmod(dx + r + 64.0 * period, 2.0 * period) - period;
      const double sy = std::fmod(dy + r + 64.0 * period, 2.0 * period) - period;
      return window && std::hypot(sx, sy) <= 0.5 * period + 0.3;
    }
  }
  return false;
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.classes < 1 || spec.per_class < 1 || spec.size < 8) throw ConfigError("invalid synthetic dataset spec");
  Dataset ds;
  for (int k = 0; k < spec.classes; ++k) {
    std::string name = kShapeNames[k % 10];
    if (k >= 10) name += "_" + std::to_string(k / 10);
    ds.class_names.push_back(name);
  }
  const int s = spec.size;
  const double scale = s / 32.0;
  for (int k = 0; k < spec.classes; ++k) {
    for (int i = 0; i < spec.per_class; ++i) {
      Rng rng(derive_seed(spec.seed, {std::uint64_t(k), std::uint64_t(i)}));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::array<double, 3> bg{}, fg{};
      for (auto& v : bg) v = 0.15 + 0.7 * u(rng);
      double contrast = 0.0;
      do {
        contrast = 0.0;
        for (int c = 0; c < 3; ++c) {
          fg[c] = 0.05 + 0.9 * u(rng);
          contrast += std::abs(fg[c] - bg[c]) / 3.0;
        }
      } while (contrast < 0.3);
      const double grad_amp = 0.12 * u(rng);
      const double grad_dir = 2.0 * std::numbers::pi * u(rng);
      const double cx = s / 2.0 + (u(rng) - 0.5) * 10.0 * scale;
      const double cy = s / 2.0 + (u(rng) - 0.5) * 10.0 * scale;
      const double r = (7.0 + 4.0 * u(rng)) * scale;
      const double theta = (u(rng) - 0.5) * 0.6;
      const int period = 2 + static_cast<int>(u(rng) * 2.0);
      std::normal_distribution<double> grain(0.0, 0.015);

      Image<float> im(s, s, 3);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          const double ox = x + 0.5 - cx;
          const double oy = y + 0.5 - cy;
          const double dx = std::cos(theta) * ox + std::sin(theta) * oy;
          const double dy = -std::sin(theta) * ox + std::cos(theta) * oy;
          const bool on = inside(k, dx, dy, r, static_cast<int>(period * scale + 0.5));
          const double g =
              grad_amp * ((x - s / 2.0) * std::cos(grad_dir) + (y - s / 2.0) * std::sin(grad_dir)) / (s / 2.0);
          for (int c = 0; c < 3; ++c) {
            const double v = (on ? fg[c] : bg[c] + g) + grain(rng);
            im(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
      }
      ds.images.push_back(std::move(im));
      ds.labels.push_back(k);
      ds.paths.push_back(ds.class_names[k] + "/" + std::to_string(i) + ".png");
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Image files

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

Image<float> read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  Image<float> im(static_cast<int>(img.height), static_cast<int>(img.width), 3);
  for (Index p = 0; p < im.pixels(); ++p)
    for (int c = 0; c < 3; ++c) im.data(c, p) = buf[std::size_t(p) * 3 + c] / 255.0f;
  return im;
}

void write_png(const fs::path& path, int h, int w, int channels, const std::vector<unsigned char>& buf) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
}

Image<float> read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw IoError(path.string() + ": only binary P5/P6 supported");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
    int v = 0;
    in >> v;
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  in.get();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw IoError(path.string() + ": unsupported PNM header");
  const int src_c = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(std::size_t(w) * h * src_c);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw IoError(path.string() + ": truncated pixel data");
  Image<float> im(h, w, 3);
  for (Index p = 0; p < im.pixels(); ++p)
    for (int c = 0; c < 3; ++c) im.data(c, p) = buf[std::size_t(p) * src_c + (src_c == 3 ? c : 0)] / float(maxval);
  return im;
}

unsigned char to_byte(float v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

}  // namespace

Image<float> read_image(const fs::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  throw IoError("unsupported image format: " + path.string());
}

void write_image(const fs::path& path, const Image<float>& image) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const int c = image.c();
  if (c != 1 && c != 3) throw ShapeError("write_image: only 1 or 3 channels supported");
  std::vector<unsigned char> buf(std::size_t(image.pixels()) * c);
  for (Index p = 0; p < image.pixels(); ++p)
    for (int k = 0; k < c; ++k) buf[std::size_t(p) * c + k] = to_byte(image.data(k, p));
  if (lower_ext(path) == ".png") {
    write_png(path, image.h, image.w, c, buf);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (c == 3 ? "P6" : "P5") << "\n" << image.w << " " << image.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_gray(const fs::path& path, int h, int w, const Vector<float>& values) {
  Image<float> im(h, w, 1);
  im.data = values.transpose();
  write_image(path, im);
}

Dataset load_image_tree(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  Dataset ds;
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[k])) {
      const auto ext = lower_ext(e.path());
      if (e.is_regular_file() && (ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm"))
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    ds.class_names.push_back(class_dirs[k].filename().string());
    for (const auto& f : files) {
      ds.images.push_back(read_image(f));
      ds.labels.push_back(static_cast<int>(k));
      ds.paths.push_back((class_dirs[k].filename() / f.filename()).string());
    }
  }
  if (ds.empty()) throw IoError("no images found under " + root.string());
  return ds;
}

void write_image_tree(const fs::path& root, const Dataset& dataset) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::string rel = i < dataset.paths.size()
                                ? dataset.paths[i]
                                : dataset.class_names[dataset.labels[i]] + "/" + std::to_string(i) + ".png";
    write_image(root / rel, dataset.images[i]);
  }
}

}  // namespace fgnic
