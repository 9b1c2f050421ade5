#include "fgnic/accounting.hpp"

#include <algorithm>

namespace fgnic {

namespace {

using K = nn::LayerDesc::Kind;

struct Walk {
  InputShape shape;
  std::int64_t macs = 0;
};

Walk walk(std::span<const nn::LayerDesc> layers, InputShape input) {
  if (input.h < 1 || input.w < 1 || input.c < 1) throw AccountingError("input shape must be positive");
  Walk st{input, 0};
  std::vector<InputShape> block_inputs;
  for (const auto& l : layers) {
    switch (l.kind) {
      case K::conv: {
        InputShape in = st.shape;
        if (l.from_block_input) {
          if (block_inputs.empty()) throw AccountingError("side-branch layer '" + l.name + "' outside a block");
          in = block_inputs.back();
        }
        if (l.in != in.c)
          throw AccountingError("layer '" + l.name + "' expects " + std::to_string(l.in) + " channels, got " +
                                std::to_string(in.c));
        const int ho = (in.h + 2 * l.padding - l.kernel) / l.stride + 1;
        const int wo = (in.w + 2 * l.padding - l.kernel) / l.stride + 1;
        if (ho < 1 || wo < 1) throw AccountingError("layer '" + l.name + "' produces an empty output");
        st.macs += std::int64_t(l.kernel) * l.kernel * l.in * l.out * ho * wo;
        if (!l.from_block_input) st.shape = {ho, wo, l.out};
        break;
      }
      case K::fully_connected: {
        const std::int64_t flat = std::int64_t(st.shape.h) * st.shape.w * st.shape.c;
        if (flat != l.in)
          throw AccountingError("layer '" + l.name + "' expects " + std::to_string(l.in) + " inputs, got " +
                                std::to_string(flat));
        st.macs += std::int64_t(l.in) * l.out;
        st.shape = {1, 1, l.out};
        break;
      }
      case K::pool: {
        const int ho = (st.shape.h + 2 * l.padding - l.kernel) / l.stride + 1;
        const int wo = (st.shape.w + 2 * l.padding - l.kernel) / l.stride + 1;
        if (ho < 1 || wo < 1) throw AccountingError("layer '" + l.name + "' produces an empty output");
        st.shape = {ho, wo, st.shape.c};
        break;
      }
      case K::norm:
        // Folds into the preceding convolution at inference: no MACs.
        if (!l.from_block_input && l.in != st.shape.c)
          throw AccountingError("layer '" + l.name + "' expects " + std::to_string(l.in) + " channels, got " +
                                std::to_string(st.shape.c));
        break;
      case K::global_pool: st.shape = {1, 1, st.shape.c}; break;
      case K::activation: break;
      case K::block_begin: block_inputs.push_back(st.shape); break;
      case K::block_end:
        if (block_inputs.empty()) throw AccountingError("unbalanced block end '" + l.name + "'");
        block_inputs.pop_back();
        break;
      case K::other: throw AccountingError("unsupported layer type for MAC accounting: '" + l.name + "'");
    }
  }
  return st;
}

nlohmann::json shape_json(const InputShape& s) { return {s.h, s.w, s.c}; }

}  // namespace

std::int64_t count_macs(std::span<const nn::LayerDesc> layers, InputShape input) { return walk(layers, input).macs; }

InputShape propagate_shape(std::span<const nn::LayerDesc> layers, InputShape input) {
  return walk(layers, input).shape;
}

void CostReport::add(CostEntry e) {
  if (e.macs < 0 || e.trainable_params < 0 || e.total_params < 0) throw AccountingError("negative cost entry");
  entries.push_back(std::move(e));
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries)
    rows.push_back({{"network", e.network},
                    {"input_hwc", shape_json(e.input)},
                    {"macs", e.macs},
                    {"trainable_params", e.trainable_params},
                    {"total_params", e.total_params}});
  return {{"kind", "cost_report"}, {"entries", rows}};
}

CostReport CostReport::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "cost_report") throw IoError("document is not a cost report");
  CostReport r;
  for (const auto& e : j.at("entries")) {
    const auto s = e.at("input_hwc").get<std::vector<int>>();
    if (s.size() != 3) throw IoError("cost entry input shape must have three entries");
    r.add({e.at("network").get<std::string>(), {s[0], s[1], s[2]}, e.at("macs").get<std::int64_t>(),
           e.at("trainable_params").get<std::int64_t>(), e.at("total_params").get<std::int64_t>()});
  }
  return r;
}

}  // namespace fgnic
