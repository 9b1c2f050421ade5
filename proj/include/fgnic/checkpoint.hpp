#pragma once

#include "fgnic/core.hpp"
#include "fgnic/nn/layers.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fgnic {

/// Binary container for model checkpoints and raw tensor exports.
///
/// Layout: 8-byte magic "FGNICKPT", u32 version, u64 header length, JSON
/// header (meta, dtype, tensor table), then each tensor's column-major data
/// in table order as little-endian f32 or f64.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::string dtype = "f32";
  std::vector<std::pair<std::string, Matrix<double>>> tensors;

  template <typename Scalar>
  void add_params(const nn::ConstParamList<Scalar>& params) {
    for (const auto* p : params) tensors.emplace_back(p->name, p->value.template cast<double>());
  }

  void add_tensor(std::string name, Matrix<double> value) { tensors.emplace_back(std::move(name), std::move(value)); }

  const Matrix<double>& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;

  /// Copies stored values into `params` by name; missing or mis-shaped
  /// entries raise IoError.
  template <typename Scalar>
  void load_params(const nn::ParamList<Scalar>& params) const {
    for (auto* p : params) {
      const auto& m = tensor(p->name);
      if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
        throw IoError("checkpoint tensor '" + p->name + "' has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", model expects " + std::to_string(p->value.rows()) + "x" +
                      std::to_string(p->value.cols()));
      p->value = m.template cast<Scalar>();
      p->zero_grad();
    }
  }

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

template <typename Scalar>
constexpr const char* dtype_name() {
  return sizeof(Scalar) == 8 ? "f64" : "f32";
}

/// SHA-256 over parameter names, shapes and raw values.
template <typename Scalar>
std::string hash_params(const nn::ConstParamList<Scalar>& params);

std::string file_sha256(const std::filesystem::path& path);

}  // namespace fgnic
