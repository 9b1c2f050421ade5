#pragma once

#include "fgnic/imaging.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fgnic {

/// Labelled image collection. Images are decoded to [0,1] floats.
struct Dataset {
  std::vector<Image<float>> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  /// Path of each image relative to the dataset root ("class/file.png").
  std::vector<std::string> paths;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  Dataset subset(std::span<const std::size_t> indices) const;
  /// SHA-256 over labels and pixel data; identifies the dataset in manifests.
  std::string content_hash() const;
};

/// Stack images into one batch tensor (all images must share a shape).
template <typename Scalar>
Tensor<Scalar> stack(const std::vector<Image<float>>& images, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("cannot stack an empty batch");
  const auto& first = images[indices[0]];
  Tensor<Scalar> t(static_cast<int>(indices.size()), first.h, first.w, first.c());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& im = images[indices[k]];
    if (!im.same_shape(first)) throw ShapeError("batch images have different shapes");
    t.sample(static_cast<int>(k)) = im.data.template cast<Scalar>();
  }
  return t;
}

template <typename Scalar>
Tensor<Scalar> stack(const std::vector<Image<float>>& images) {
  std::vector<std::size_t> idx(images.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return stack<Scalar>(images, idx);
}

template <typename Scalar>
Image<Scalar> unstack(const Tensor<Scalar>& t, int i) {
  Image<Scalar> im(t.h, t.w, t.c());
  im.data = t.sample(i);
  return im;
}

/// Per-class split: each class contributes round(fraction * count) samples
/// (at least one when the class has two or more) to the held-out side.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> held_out;
};
SplitIndices stratified_split(const std::vector<int>& labels, double fraction, std::uint64_t seed);

/// Procedurally generated classification set used for desk-scale runs.
struct SyntheticSpec {
  int classes = 10;
  int per_class = 500;
  int size = 32;
  std::uint64_t seed = 7;
};
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

/// Directory-per-class tree of .png / .ppm / .pgm files. Classes are sorted
/// by directory name, files by file name.
Dataset load_image_tree(const std::filesystem::path& root);

Image<float> read_image(const std::filesystem::path& path);
/// Writes PNG (by extension .png) or binary PPM/PGM.
void write_image(const std::filesystem::path& path, const Image<float>& image);
/// Writes a single-channel [0,1] map as an 8-bit grayscale PNG.
void write_gray(const std::filesystem::path& path, int h, int w, const Vector<float>& values);

/// Writes `dataset` as a directory-per-class tree.
void write_image_tree(const std::filesystem::path& root, const Dataset& dataset);

}  // namespace fgnic
