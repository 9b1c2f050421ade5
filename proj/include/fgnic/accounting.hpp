#pragma once

#include "fgnic/core.hpp"
#include "fgnic/nn/layers.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fgnic {

struct InputShape {
  int h = 0;
  int w = 0;
  int c = 0;

  bool operator==(const InputShape&) const = default;
};

/// Analytic multiply-accumulate count of a layer sequence applied to one
/// input of shape `input`. conv: k*k*Cin*Cout*Hout*Wout; fully connected:
/// Din*Dout; pooling, activations and block markers: 0. Side-branch convs
/// read the shape recorded at the enclosing block_begin. Layers of kind
/// `other` raise AccountingError naming the layer.
std::int64_t count_macs(std::span<const nn::LayerDesc> layers, InputShape input);

/// Output shape of the same walk (useful for chaining descriptors).
InputShape propagate_shape(std::span<const nn::LayerDesc> layers, InputShape input);

struct CostEntry {
  std::string network;
  InputShape input;
  std::int64_t macs = 0;
  std::int64_t trainable_params = 0;
  std::int64_t total_params = 0;

  bool operator==(const CostEntry&) const = default;
};

/// Per-network MACs at a stated input size and parameter counts.
struct CostReport {
  std::vector<CostEntry> entries;

  void add(CostEntry e);
  nlohmann::json to_json() const;
  static CostReport from_json(const nlohmann::json& j);
  bool operator==(const CostReport&) const = default;
};

}  // namespace fgnic
