#include "fgnic/fusion.hpp"

#include <algorithm>

namespace fgnic {

std::string to_string(FidelitySource s) {
  switch (s) {
    case FidelitySource::oracle: return "oracle";
    case FidelitySource::estimator: return "estimator";
    case FidelitySource::end_to_end: return "end_to_end";
  }
  return "?";
}

FidelitySource fidelity_source_from_string(const std::string& s) {
  if (s == "oracle") return FidelitySource::oracle;
  if (s == "estimator") return FidelitySource::estimator;
  if (s == "end_to_end") return FidelitySource::end_to_end;
  throw ConfigError("unknown fidelity source '" + s + "'");
}

std::vector<int> FusionConfig::spatial_stages(int num_stages) const {
  if (!stages_with_spatial_fusion) {
    std::vector<int> all(std::size_t(std::max(num_stages, 0)));
    for (int s = 0; s < num_stages; ++s) all[std::size_t(s)] = s;
    return all;
  }
  std::vector<int> v = *stages_with_spatial_fusion;
  std::sort(v.begin(), v.end());
  return v;
}

void FusionConfig::validate(int num_stages) const {
  if (!stages_with_spatial_fusion) return;
  std::vector<int> v = *stages_with_spatial_fusion;
  std::sort(v.begin(), v.end());
  if (std::adjacent_find(v.begin(), v.end()) != v.end()) throw ConfigError("duplicate spatial fusion stage index");
  for (int s : v)
    if (s < 0 || s >= num_stages)
      throw ConfigError("spatial fusion stage " + std::to_string(s) + " outside [0, " + std::to_string(num_stages) +
                        ")");
}

nlohmann::json FusionConfig::to_json() const {
  nlohmann::json j = {{"fidelity_metric", to_string(fidelity_metric)},
                      {"downsample_method", to_string(downsample_method)},
                      {"use_ensemble", use_ensemble},
                      {"pass_through", pass_through},
                      {"fidelity_source", to_string(fidelity_source)}};
  j["stages_with_spatial_fusion"] =
      stages_with_spatial_fusion ? nlohmann::json(*stages_with_spatial_fusion) : nlohmann::json("all");
  return j;
}

FusionConfig FusionConfig::from_json(const nlohmann::json& j) { return from_json(j, FusionConfig()); }

FusionConfig FusionConfig::from_json(const nlohmann::json& j, const FusionConfig& defaults) {
  FusionConfig c = defaults;
  if (j.contains("stages_with_spatial_fusion")) {
    const auto& s = j.at("stages_with_spatial_fusion");
    if (s.is_string()) {
      if (s.get<std::string>() != "all") throw ConfigError("stages_with_spatial_fusion must be a list or \"all\"");
      c.stages_with_spatial_fusion.reset();
    } else {
      c.stages_with_spatial_fusion = s.get<std::vector<int>>();
    }
  }
  if (j.contains("fidelity_metric")) c.fidelity_metric = fidelity_metric_from_string(j.at("fidelity_metric"));
  if (j.contains("downsample_method")) c.downsample_method = downsample_method_from_string(j.at("downsample_method"));
  c.use_ensemble = j.value("use_ensemble", c.use_ensemble);
  c.pass_through = j.value("pass_through", c.pass_through);
  if (j.contains("fidelity_source")) c.fidelity_source = fidelity_source_from_string(j.at("fidelity_source"));
  return c;
}

}  // namespace fgnic
