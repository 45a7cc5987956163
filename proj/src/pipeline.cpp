// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "asymcal/error.hpp"
#include "asymcal/quantizer.hpp"
#include "asymcal/tensor_io.hpp"
#include "json.hpp"

namespace asymcal {

namespace {

constexpr double kNormEps = 1e-6;

constexpr std::size_t kQ = 0, kK = 1, kV = 2, kO = 3, kAttnUp = 4, kAttnDown = 5;

Matrix mlp_part(const Matrix& x, std::size_t up, std::size_t down, const LayerFn& linear) {
  Matrix u = linear(up, rms_norm(x));
  for (double& v : u.data()) v = gelu(v);
  return add(x, linear(down, u));
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t tokens) {
  const std::size_t n = q.rows();
  const std::size_t cols = q.cols();
  const Matrix qt = q.transposed();
  const Matrix kt = k.transposed();
  const Matrix vt = v.transposed();
  Matrix out(cols, n);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> w(tokens);
  for (std::size_t s0 = 0; s0 < cols; s0 += tokens) {
    const std::size_t len = std::min(tokens, cols - s0);
    for (std::size_t t = 0; t < len; ++t) {
      const auto qr = qt.row(s0 + t);
      double mx = -INFINITY;
      for (std::size_t u = 0; u <= t; ++u) {
        const auto kr = kt.row(s0 + u);
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += qr[i] * kr[i];
        w[u] = d * inv_sqrt;
        mx = std::max(mx, w[u]);
      }
      double z = 0.0;
      for (std::size_t u = 0; u <= t; ++u) {
        w[u] = std::exp(w[u] - mx);
        z += w[u];
      }
      auto orow = out.row(s0 + t);
      for (std::size_t u = 0; u <= t; ++u) {
        const auto vr = vt.row(s0 + u);
        const double p = w[u] / z;
        for (std::size_t i = 0; i < n; ++i) orow[i] += p * vr[i];
      }
    }
  }
  return out.transposed();
}

std::string annotate(std::size_t block, const std::string& layer, const char* what) {
  return "block " + std::to_string(block) + " layer " + layer + ": " + what;
}

}  // namespace

std::string_view to_string(BlockKind kind) noexcept {
  return kind == BlockKind::Mlp ? "mlp" : "attention";
}

BlockKind parse_block_kind(std::string_view s) {
  if (s == "mlp") return BlockKind::Mlp;
  if (s == "attention") return BlockKind::Attention;
  throw FormatError("unknown block kind '" + std::string(s) + "'");
}

void ModelGraph::validate() const {
  if (blocks.empty()) throw ShapeError("model has no blocks");
  if (width == 0) throw ShapeError("model width is zero");
  if (tokens_per_sample == 0) throw ShapeError("tokens_per_sample is zero");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Block& blk = blocks[b];
    const std::size_t expected = blk.kind == BlockKind::Mlp ? 2 : 6;
    if (blk.layers.size() != expected) {
      throw ShapeError("block " + std::to_string(b) + " has " +
                       std::to_string(blk.layers.size()) + " layers, expected " +
                       std::to_string(expected));
    }
    auto need = [&](std::size_t i, std::size_t rows, std::size_t cols) {
      const Matrix& w = blk.layers[i].weight;
      if ((rows != 0 && w.rows() != rows) || w.cols() != cols || w.rows() == 0) {
        throw ShapeError("block " + std::to_string(b) + " layer " + blk.layers[i].name +
                         " is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                         ", shape chain broken");
      }
    };
    const std::size_t base = blk.kind == BlockKind::Mlp ? 0 : kAttnUp;
    if (blk.kind == BlockKind::Attention) {
      for (std::size_t i : {kQ, kK, kV}) need(i, width, width);
      need(kO, width, width);
    }
    need(base, 0, width);
    need(base + 1, width, blk.layers[base].weight.rows());
  }
}

std::size_t ModelGraph::layer_count() const noexcept {
  std::size_t c = 0;
  for (const Block& b : blocks) c += b.layers.size();
  return c;
}

double gelu(double x) noexcept {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  const double y = kC * (x + 0.044715 * x * x * x);
  const double y2 = y * y;
  // Lambert continued fraction for tanh truncated at [7/6].
  const double num = y * (135135.0 + y2 * (17325.0 + y2 * (378.0 + y2)));
  const double den = 135135.0 + y2 * (62370.0 + y2 * (3150.0 + 28.0 * y2));
  const double t = std::clamp(num / den, -1.0, 1.0);
  return 0.5 * x * (1.0 + t);
}

Matrix rms_norm(const Matrix& x) {
  Matrix out = x.as(DType::F64);
  std::vector<double> ss(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = out.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) ss[c] += row[c] * row[c];
  }
  for (double& s : ss) s = 1.0 / std::sqrt(s / static_cast<double>(x.rows()) + kNormEps);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) row[c] *= ss[c];
  }
  return out;
}

Matrix forward_block(const Block& block, const Matrix& x, std::size_t tokens,
                     const LayerFn& linear) {
  if (block.kind == BlockKind::Mlp) return mlp_part(x, 0, 1, linear);
  const Matrix h = rms_norm(x);
  const Matrix q = linear(kQ, h);
  const Matrix k = linear(kK, h);
  const Matrix v = linear(kV, h);
  const Matrix y = add(x, linear(kO, attention(q, k, v, tokens)));
  return mlp_part(y, kAttnUp, kAttnDown, linear);
}

Matrix forward_block(const Block& block, const Matrix& x, std::size_t tokens,
                     const ActQuantConfig& act) {
  return forward_block(block, x, tokens, [&](std::size_t i, const Matrix& in) {
    return matmul(block.layers[i].weight.as(DType::F64), quantize_activations(in, act));
  });
}

Matrix forward(const ModelGraph& model, const Matrix& x, const ActQuantConfig& act) {
  Matrix cur = x.as(DType::F64);
  for (const Block& b : model.blocks) cur = forward_block(b, cur, model.tokens_per_sample, act);
  return cur;
}

double block_mae(const Matrix& x_tilde, const Matrix& x) {
  if (x_tilde.rows() != x.rows() || x_tilde.cols() != x.cols()) {
    throw ShapeError("block_mae: shape mismatch");
  }
  if (x.size() == 0) return 0.0;
  double s = 0.0;
  const auto a = x_tilde.data();
  const auto b = x.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

CaptureStore::CaptureStore(std::optional<std::filesystem::path> spill_dir)
    : spill_dir_(std::move(spill_dir)) {
  if (spill_dir_) std::filesystem::create_directories(*spill_dir_);
}

CaptureStore::~CaptureStore() {
  try {
    clear();
  } catch (...) {
  }
}

std::filesystem::path CaptureStore::path_for(std::size_t layer) const {
  return *spill_dir_ / ("capture_" + std::to_string(layer) + ".gtaq");
}

void CaptureStore::put(std::size_t layer, Matrix m) {
  if (layer >= resident_.size()) {
    resident_.resize(layer + 1);
    on_disk_.resize(layer + 1, false);
  }
  if (resident_[layer] || on_disk_[layer]) release(layer);
  if (spill_dir_) {
    write_tensor(path_for(layer), m);
    spilled_bytes_ += kTensorHeaderBytes + m.size() * 8;
    on_disk_[layer] = true;
  } else {
    resident_[layer] = std::move(m);
  }
  ++live_;
  peak_ = std::max(peak_, live_);
}

Matrix CaptureStore::get(std::size_t layer) const {
  if (layer < resident_.size()) {
    if (resident_[layer]) return *resident_[layer];
    if (on_disk_[layer]) return read_tensor(path_for(layer));
  }
  throw IndexError("capture for layer " + std::to_string(layer) + " is not stored");
}

void CaptureStore::release(std::size_t layer) {
  if (layer >= resident_.size()) return;
  if (resident_[layer]) {
    resident_[layer].reset();
    --live_;
  } else if (on_disk_[layer]) {
    std::error_code ec;
    std::filesystem::remove(path_for(layer), ec);
    on_disk_[layer] = false;
    --live_;
  }
}

void CaptureStore::clear() {
  for (std::size_t i = 0; i < resident_.size(); ++i) release(i);
}

CalibReport calibrate_model(ModelGraph& model, const Matrix& calib, const QuantConfig& cfg,
                            const PipelineOptions& opts) {
  cfg.validate();
  model.validate();
  if (calib.rows() != model.width) {
    throw ShapeError("calibration data has " + std::to_string(calib.rows()) +
                     " rows, model width is " + std::to_string(model.width));
  }
  if (calib.cols() < model.width) {
    throw ValidationError("calibration set needs at least " + std::to_string(model.width) +
                          " columns, got " + std::to_string(calib.cols()));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const bool aq = cfg.act_cfg.enabled && cfg.act_cfg.bits < kPassthroughBits;
  const bool aq_during_calib = aq && cfg.aq_order == AqOrder::AThenW;

  CalibReport report;
  report.config = cfg;
  CaptureStore store(opts.spill_dir);
  Matrix x_fp = calib.as(DType::F64);
  Matrix x_q = x_fp;
  Matrix x_eval = x_fp;

  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    Block& block = model.blocks[b];
    const Block fp_block = block;
    BlockReport br;
    br.block_index = b;
    br.input_mae = block_mae(x_fp, x_eval);

    // Full-precision stream, activation quantization off.
    Matrix next_fp = forward_block(fp_block, x_fp, model.tokens_per_sample,
                                   [&](std::size_t i, const Matrix& in) {
                                     store.put(i, in);
                                     return matmul(fp_block.layers[i].weight.as(DType::F64), in);
                                   });

    // Quantized stream; each layer is calibrated when its input arrives.
    Matrix next_q = forward_block(
        block, x_q, model.tokens_per_sample, [&](std::size_t i, const Matrix& in) {
          const Matrix xin = aq_during_calib ? quantize_activations(in, cfg.act_cfg) : in;
          LayerReport lr;
          lr.block = b;
          lr.layer = i;
          lr.name = block.layers[i].name;
          try {
            lr.result = calibrate_layer(block.layers[i].weight, xin, store.get(i), cfg);
          } catch (const CalibrationError& e) {
            throw CalibrationError(e.column(), annotate(b, lr.name, e.what()));
          } catch (const FactorizationError& e) {
            throw FactorizationError(e.pivot(), annotate(b, lr.name, e.what()));
          } catch (const Error& e) {
            throw Error(e.kind(), annotate(b, lr.name, e.what()));
          }
          store.release(i);
          block.layers[i].weight = lr.result.q;
          br.layers.push_back(std::move(lr));
          return matmul(block.layers[i].weight, xin);
        });
    br.peak_captures = store.peak();

    // Deployed stream against a fresh full-precision pass.
    forward_block(fp_block, x_fp, model.tokens_per_sample, [&](std::size_t i, const Matrix& in) {
      store.put(i, in);
      return matmul(fp_block.layers[i].weight.as(DType::F64), in);
    });
    Matrix next_eval = forward_block(
        block, x_eval, model.tokens_per_sample, [&](std::size_t i, const Matrix& in) {
          const Matrix xin = aq ? quantize_activations(in, cfg.act_cfg) : in;
          const Matrix out = matmul(block.layers[i].weight, xin);
          const Matrix target = matmul(fp_block.layers[i].weight.as(DType::F64), store.get(i));
          store.release(i);
          br.layers[i].deployed_asym_loss = frobenius_sq(sub(out, target));
          return out;
        });

    br.mae = block_mae(next_fp, next_eval);
    for (const LayerReport& lr : br.layers) {
      report.total_asym_loss += lr.result.asym_loss;
      report.total_sym_loss += lr.result.sym_loss;
      report.total_deployed_asym_loss += lr.deployed_asym_loss;
    }
    report.peak_captures = std::max(report.peak_captures, store.peak());
    report.blocks.push_back(std::move(br));
    x_fp = std::move(next_fp);
    x_q = std::move(next_q);
    x_eval = std::move(next_eval);
  }
  report.final_mae = report.blocks.back().mae;
  report.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(
      std::chrono::steady_clock::now() - t0);
  return report;
}

void write_model(const std::filesystem::path& dir, const ModelGraph& model,
                 const std::string& weights_subdir) {
  model.validate();
  std::filesystem::create_directories(dir / weights_subdir);
  nlohmann::json j;
  j["format"] = "asymcal-model";
  j["version"] = 1;
  j["width"] = model.width;
  j["tokens_per_sample"] = model.tokens_per_sample;
  j["dtype"] = std::string(to_string(model.dtype));
  j["seed"] = model.seed;
  j["nonlinearity"] = model.nonlinearity;
  j["blocks"] = nlohmann::json::array();
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    nlohmann::json jb;
    jb["kind"] = std::string(to_string(model.blocks[b].kind));
    jb["layers"] = nlohmann::json::array();
    for (const LinearLayer& l : model.blocks[b].layers) {
      const std::string rel = weights_subdir + "/b" + std::to_string(b) + "_" + l.name + ".gtaq";
      write_tensor(dir / rel, l.weight);
      jb["layers"].push_back({{"name", l.name},
                              {"rows", l.weight.rows()},
                              {"cols", l.weight.cols()},
                              {"weight", rel}});
    }
    j["blocks"].push_back(std::move(jb));
  }
  std::ofstream f(dir / "model.json");
  if (!f) throw IoError("cannot write " + (dir / "model.json").string());
  f << j.dump(2) << '\n';
}

ModelGraph read_model(const std::filesystem::path& model_json) {
  std::ifstream f(model_json);
  if (!f) throw IoError("cannot open " + model_json.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(model_json.string() + ": " + e.what());
  }
  const auto base = model_json.parent_path();
  ModelGraph m;
  try {
    if (j.at("format").get<std::string>() != "asymcal-model") {
      throw FormatError("not an asymcal model description");
    }
    m.width = j.at("width").get<std::size_t>();
    m.tokens_per_sample = j.value("tokens_per_sample", std::size_t{1});
    const auto dt = j.value("dtype", std::string("f64"));
    if (dt == "f32") {
      m.dtype = DType::F32;
    } else if (dt == "f64") {
      m.dtype = DType::F64;
    } else {
      throw FormatError("unknown dtype '" + dt + "'");
    }
    m.seed = j.value("seed", std::uint64_t{0});
    m.nonlinearity = j.value("nonlinearity", std::string("gelu_rational"));
    if (m.nonlinearity != "gelu_rational") {
      throw FormatError("unsupported nonlinearity '" + m.nonlinearity + "'");
    }
    for (const auto& jb : j.at("blocks")) {
      Block blk;
      blk.kind = parse_block_kind(jb.at("kind").get<std::string>());
      for (const auto& jl : jb.at("layers")) {
        LinearLayer l;
        l.name = jl.at("name").get<std::string>();
        l.weight = read_tensor(base / jl.at("weight").get<std::string>());
        if (l.weight.rows() != jl.at("rows").get<std::size_t>() ||
            l.weight.cols() != jl.at("cols").get<std::size_t>()) {
          throw ShapeError("layer " + l.name + ": tensor shape differs from description");
        }
        blk.layers.push_back(std::move(l));
      }
      m.blocks.push_back(std::move(blk));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(model_json.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

}  // namespace asymcal
