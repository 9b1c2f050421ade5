#include "fgnic/backbone.hpp"

namespace fgnic {

void BackboneArch::validate() const {
  if (in_channels < 1 || stem_width < 1 || num_classes < 1) throw ConfigError("backbone: invalid channel/class counts");
  if (widths.empty() || widths.size() != blocks.size()) throw ConfigError("backbone: widths and blocks must align");
  for (std::size_t i = 0; i < widths.size(); ++i)
    if (widths[i] < 1 || blocks[i] < 1) throw ConfigError("backbone: stage widths and block counts must be >= 1");
}

nlohmann::json BackboneArch::to_json() const {
  return {{"name", name},
          {"in_channels", in_channels},
          {"stem_width", stem_width},
          {"widths", widths},
          {"blocks", blocks},
          {"block", block == BlockKind::basic ? "basic" : "bottleneck"},
          {"num_classes", num_classes},
          {"batch_norm", batch_norm}};
}

BackboneArch BackboneArch::from_json(const nlohmann::json& j) {
  const int classes = j.value("num_classes", 10);
  const std::string preset = j.value("name", std::string("desk"));
  BackboneArch a;
  if (preset == "resnet18_like")
    a = resnet18_like(classes);
  else if (preset == "resnet50_like")
    a = resnet50_like(classes);
  else
    a = desk(classes);
  a.name = preset;
  a.in_channels = j.value("in_channels", a.in_channels);
  a.stem_width = j.value("stem_width", a.stem_width);
  a.batch_norm = j.value("batch_norm", a.batch_norm);
  if (j.contains("widths")) a.widths = j.at("widths").get<std::vector<int>>();
  if (j.contains("blocks")) a.blocks = j.at("blocks").get<std::vector<int>>();
  if (j.contains("block")) {
    const auto b = j.at("block").get<std::string>();
    if (b == "basic")
      a.block = BlockKind::basic;
    else if (b == "bottleneck")
      a.block = BlockKind::bottleneck;
    else
      throw ConfigError("unknown block kind '" + b + "'");
  }
  a.validate();
  return a;
}

}  // namespace fgnic
