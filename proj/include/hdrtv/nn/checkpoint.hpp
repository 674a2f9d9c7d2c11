#pragma once
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdrtv/nn/tensor.hpp"

namespace hdrtv::nn {

// Model file layout: 8-byte magic "HTVMDL01", a little-endian u64 manifest
// length, a JSON manifest {kind, config, tensors:[{name, shape}]}, then the
// tensor payloads as float32 little-endian in manifest order. Two saves of
// identical weights produce identical bytes.
void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors);

struct Checkpoint {
  std::string kind;
  nlohmann::json config;
  std::map<std::string, Tensor<float>> tensors;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace hdrtv::nn
