// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <filesystem>
#include <string>

#include "eraloc/ad/nn.hpp"
#include "eraloc/ad/optim.hpp"

namespace eraloc::ad {

/// Writes `dir/manifest.json`, `dir/data.bin` and, if `optimizer` is given,
/// `dir/optimizer.bin`.
///
/// The manifest lists every tensor as {name, shape, dtype: "f64", offset,
/// length} with offset and length counted in f64 elements. `config_json`
/// must be a JSON object; it is stored verbatim under the `config` key.
void save_checkpoint(const std::filesystem::path& dir, const ParameterStore& params, const Adam* optimizer,
                     const std::string& config_json);

/// Loads parameter values (and optimizer state if `optimizer` is non-null and
/// the checkpoint has one). Names and shapes must match exactly; throws
/// ConfigError otherwise and IoError on unreadable files.
void load_checkpoint(const std::filesystem::path& dir, ParameterStore& params, Adam* optimizer);

/// The `config` object of a checkpoint manifest, serialized.
std::string read_checkpoint_config(const std::filesystem::path& dir);

}  // namespace eraloc::ad
