// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "asymcal/engine.hpp"
#include "asymcal/tensor.hpp"

namespace asymcal {

enum class BlockKind { Mlp, Attention };

std::string_view to_string(BlockKind kind) noexcept;
BlockKind parse_block_kind(std::string_view s);

struct LinearLayer {
  std::string name;
  Matrix weight;  // out × in
};

/// Pre-norm residual block.
///   Mlp:       x + down(gelu(up(norm x)))
///   Attention: y = x + o(attn(q, k, v)(norm x)); y + down(gelu(up(norm y)))
/// Attention is single-head and causal within each sample of
/// `tokens_per_sample` consecutive columns.
struct Block {
  BlockKind kind = BlockKind::Mlp;
  std::vector<LinearLayer> layers;
};

struct ModelGraph {
  std::vector<Block> blocks;
  std::size_t width = 0;
  std::size_t tokens_per_sample = 1;
  DType dtype = DType::F64;
  std::uint64_t seed = 0;
  std::string nonlinearity = "gelu_rational";

  /// Throws ShapeError when layer shapes do not chain.
  void validate() const;
  std::size_t layer_count() const noexcept;
};

/// Rational tanh-form GELU, identical on every platform.
double gelu(double x) noexcept;
/// Per-column RMS normalization without learned weights.
Matrix rms_norm(const Matrix& x);

/// Called for each linear layer with its index within the block and its
/// input; returns the layer output.
using LayerFn = std::function<Matrix(std::size_t layer, const Matrix& input)>;

Matrix forward_block(const Block& block, const Matrix& x, std::size_t tokens_per_sample,
                     const LayerFn& linear);

/// Plain forward with the block's own weights; `act` simulates activation
/// quantization on every linear input when enabled.
Matrix forward_block(const Block& block, const Matrix& x, std::size_t tokens_per_sample,
                     const ActQuantConfig& act = {});
Matrix forward(const ModelGraph& model, const Matrix& x, const ActQuantConfig& act = {});

/// mean |X̃ − X| over all elements.
double block_mae(const Matrix& x_tilde, const Matrix& x);

/// Holds full-precision layer inputs for the block being calibrated.
/// Entries can be spilled to tensor files and reloaded on demand.
class CaptureStore {
 public:
  explicit CaptureStore(std::optional<std::filesystem::path> spill_dir = std::nullopt);
  ~CaptureStore();
  CaptureStore(const CaptureStore&) = delete;
  CaptureStore& operator=(const CaptureStore&) = delete;

  void put(std::size_t layer, Matrix m);
  Matrix get(std::size_t layer) const;
  void release(std::size_t layer);
  void clear();

  std::size_t live() const noexcept { return live_; }
  std::size_t peak() const noexcept { return peak_; }
  std::size_t spilled_bytes() const noexcept { return spilled_bytes_; }

 private:
  std::filesystem::path path_for(std::size_t layer) const;

  std::optional<std::filesystem::path> spill_dir_;
  std::vector<std::optional<Matrix>> resident_;
  std::vector<bool> on_disk_;
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
  std::size_t spilled_bytes_ = 0;
};

struct LayerReport {
  std::size_t block = 0;
  std::size_t layer = 0;
  std::string name;
  LayerResult result;
  /// ‖Ŵ·X_eval − W·X̃‖² on the deployed stream (activation quantization
  /// applied when enabled).
  double deployed_asym_loss = 0.0;
};

struct BlockReport {
  std::size_t block_index = 0;
  /// mean |X̃ − X| of the block input and output on the deployed stream.
  double input_mae = 0.0;
  double mae = 0.0;
  std::vector<LayerReport> layers;
  std::size_t peak_captures = 0;
};

struct PipelineOptions {
  std::optional<std::filesystem::path> spill_dir;
};

struct CalibReport {
  QuantConfig config;
  std::vector<BlockReport> blocks;
  double total_asym_loss = 0.0;
  double total_sym_loss = 0.0;
  double total_deployed_asym_loss = 0.0;
  double final_mae = 0.0;
  std::size_t peak_captures = 0;
  std::chrono::nanoseconds elapsed{0};
};

/// Block-at-a-time calibration. For each block the full-precision stream is
/// forwarded first with activation quantization off, capturing every layer
/// input; the quantized stream is then forwarded layer by layer and each
/// layer is calibrated when its input is reached, so the second stream is
/// produced with already-quantized weights. The model's weights are replaced
/// in place. A final pass measures the deployed model against the
/// full-precision one.
CalibReport calibrate_model(ModelGraph& model, const Matrix& calib, const QuantConfig& cfg,
                            const PipelineOptions& opts = {});

/// model.json plus one tensor file per layer under `dir`.
void write_model(const std::filesystem::path& dir, const ModelGraph& model,
                 const std::string& weights_subdir = "weights");
ModelGraph read_model(const std::filesystem::path& model_json);

}  // namespace asymcal
