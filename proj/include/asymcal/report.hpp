// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "asymcal/engine.hpp"
#include "asymcal/pipeline.hpp"
#include "asymcal/quantizer.hpp"
#include "json.hpp"

namespace asymcal {

nlohmann::json to_json(const QuantParams& p);
QuantParams quant_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QuantConfig& cfg);
nlohmann::json to_json(const LayerReport& lr);
nlohmann::json to_json(const BlockReport& br);
/// Includes a "metadata" object describing reduction and grouping choices.
nlohmann::json to_json(const CalibReport& r);

/// One row per layer: block,layer,name,sym_loss,asym_loss,deployed_asym_loss,elapsed_us.
std::string layers_csv(const CalibReport& r);
/// One row per block: block,input_mae,mae,peak_captures.
std::string blocks_csv(const CalibReport& r);

/// Writes `text` to `path`, replacing any existing file.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace asymcal
