#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hcpo/model.hpp"

namespace hcpo {

using nlohmann::json;

// Checkpoint layout: u64 little-endian header length, UTF-8 JSON header
// {schema, meta, tensors: [{name, rows, cols, offset}]}, then consecutive
// little-endian f64 blobs in manifest order.
void save_tensors(const std::string& path, const json& meta,
                  const std::vector<TensorView>& tensors);

// Loads into pre-shaped views; the manifest must list exactly these tensors
// with matching shapes. Returns the meta object.
json load_tensors(const std::string& path, const std::vector<TensorView>& tensors);

// Reads only the meta object (to recover dims before shaping views).
json peek_meta(const std::string& path);

void save_model(const std::string& path, ModelParams& params, const json& extra_meta = {});
ModelParams load_model(const std::string& path, json* meta_out = nullptr);

json dims_to_json(const ModelDims& d);
ModelDims dims_from_json(const json& j);

}  // namespace hcpo
