#pragma once
#include "hdrtv/models/agcm.hpp"
#include "hdrtv/models/le.hpp"
#include "hdrtv/nn/checkpoint.hpp"

namespace hdrtv {

inline constexpr const char* kColorMapperKind = "color_mapper";
inline constexpr const char* kLocalEnhancerKind = "local_enhancer";

namespace detail_ser {
inline void copy_named(const nn::Checkpoint& ck,
                       const std::vector<std::pair<std::string, nn::TensorPtr<float>>>& dst) {
  for (const auto& [name, t] : dst) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) fail(Errc::io, "model file is missing tensor '" + name + "'");
    if (it->second.shape != t->shape)
      fail(Errc::io, "model tensor '" + name + "' has the wrong shape");
    t->v = it->second.v;
  }
}
}  // namespace detail_ser

inline void save_model(const std::string& path, const Agcm<float>& m) {
  nlohmann::json cfg = {{"base_width", m.base_width},   {"cond_blocks", m.cond_blocks},
                        {"cond_width", m.cond_width},   {"lrelu_slope", m.lrelu_slope},
                        {"dropout_p", m.dropout_p},     {"in_eps", m.in_eps},
                        {"use_condition", m.use_condition}};
  std::vector<std::pair<std::string, const nn::Tensor<float>*>> ts;
  for (const auto& [n, t] : m.named()) ts.emplace_back(n, t.get());
  nn::save_checkpoint(path, kColorMapperKind, cfg, ts);
}

inline void save_model(const std::string& path, const Le<float>& m) {
  nlohmann::json cfg = {{"width", m.width}, {"lrelu_slope", m.lrelu_slope}};
  std::vector<std::pair<std::string, const nn::Tensor<float>*>> ts;
  for (const auto& [n, t] : m.named()) ts.emplace_back(n, t.get());
  nn::save_checkpoint(path, kLocalEnhancerKind, cfg, ts);
}

inline Agcm<float> agcm_from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.kind != kColorMapperKind)
    fail(Errc::io, "expected a " + std::string(kColorMapperKind) + " model, found '" + ck.kind + "'");
  Agcm<float> m = Agcm<float>::make(0, ck.config.value("use_condition", true));
  m.lrelu_slope = ck.config.value("lrelu_slope", m.lrelu_slope);
  m.dropout_p = ck.config.value("dropout_p", m.dropout_p);
  m.in_eps = ck.config.value("in_eps", m.in_eps);
  detail_ser::copy_named(ck, m.named());
  return m;
}

inline Le<float> le_from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.kind != kLocalEnhancerKind)
    fail(Errc::io, "expected a " + std::string(kLocalEnhancerKind) + " model, found '" + ck.kind + "'");
  Le<float> m = Le<float>::make(0, ck.config.value("width", 20));
  m.lrelu_slope = ck.config.value("lrelu_slope", m.lrelu_slope);
  detail_ser::copy_named(ck, m.named());
  return m;
}

inline Agcm<float> load_agcm(const std::string& path) {
  return agcm_from_checkpoint(nn::load_checkpoint(path));
}
inline Le<float> load_le(const std::string& path) {
  return le_from_checkpoint(nn::load_checkpoint(path));
}

}  // namespace hdrtv
