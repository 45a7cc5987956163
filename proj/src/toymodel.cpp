// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asymcal/error.hpp"

namespace asymcal {

namespace {

constexpr std::uint64_t kCalibTag = 0xca11b;

// rows × r matrix with orthonormal columns (modified Gram-Schmidt).
Matrix orthonormal_columns(Seed seed, std::size_t rows, std::size_t r) {
  Matrix g = gen_normal(seed, r, rows);  // each row becomes one basis vector
  for (std::size_t i = 0; i < r; ++i) {
    auto gi = g.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const auto gj = g.row(j);
      double d = 0.0;
      for (std::size_t t = 0; t < rows; ++t) d += gi[t] * gj[t];
      for (std::size_t t = 0; t < rows; ++t) gi[t] -= d * gj[t];
    }
    double nrm = 0.0;
    for (double v : gi) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (double& v : gi) v /= nrm;
  }
  return g.transposed();
}

}  // namespace

std::string_view to_string(ToyKind kind) noexcept {
  return kind == ToyKind::Mlp ? "mlp" : "transformer";
}

ToyKind parse_toy_kind(std::string_view s) {
  if (s == "mlp") return ToyKind::Mlp;
  if (s == "transformer") return ToyKind::TinyTransformer;
  throw ValidationError("unknown toy kind '" + std::string(s) + "'");
}

void ToySpec::validate() const {
  if (blocks < 2 || blocks > 6) throw ValidationError("toy blocks must lie in [2, 6]");
  if (width < 16 || width > 128) throw ValidationError("toy width must lie in [16, 128]");
  if (hidden_mult < 1 || hidden_mult > 4) throw ValidationError("hidden_mult must lie in [1, 4]");
  if (!(weight_decay > 0.0 && weight_decay <= 1.0)) {
    throw ValidationError("weight decay must lie in (0, 1]");
  }
  if (!(calib_decay > 0.0 && calib_decay <= 1.0)) {
    throw ValidationError("calibration decay must lie in (0, 1]");
  }
  if (samples < 1 || tokens < 1) throw ValidationError("samples and tokens must be >= 1");
}

Matrix spectral_weight(Seed seed, std::size_t rows, std::size_t cols, double decay) {
  const std::size_t r = std::min(rows, cols);
  const Matrix u = orthonormal_columns(derive_seed(seed, 1), rows, r);
  const Matrix v = orthonormal_columns(derive_seed(seed, 2), cols, r);
  std::vector<double> s(r);
  double ss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    s[i] = std::pow(decay, static_cast<double>(i));
    ss += s[i] * s[i];
  }
  const double norm = std::sqrt(static_cast<double>(r) / ss);
  Matrix us = u;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < r; ++j) us(i, j) *= s[j] * norm;
  return matmul_nt(us, v);
}

ModelGraph build_model(const ToySpec& spec) {
  spec.validate();
  ModelGraph m;
  m.width = spec.width;
  m.tokens_per_sample = spec.tokens;
  m.seed = spec.seed.value;
  const std::size_t n = spec.width;
  const std::size_t hidden = n * spec.hidden_mult;
  std::uint64_t tag = 100;
  auto layer = [&](const char* name, std::size_t rows, std::size_t cols) {
    return LinearLayer{name, spectral_weight(derive_seed(spec.seed, tag++), rows, cols,
                                             spec.weight_decay)};
  };
  for (std::size_t b = 0; b < spec.blocks; ++b) {
    Block blk;
    if (spec.kind == ToyKind::TinyTransformer) {
      blk.kind = BlockKind::Attention;
      blk.layers.push_back(layer("q", n, n));
      blk.layers.push_back(layer("k", n, n));
      blk.layers.push_back(layer("v", n, n));
      blk.layers.push_back(layer("o", n, n));
    }
    blk.layers.push_back(layer("up", hidden, n));
    blk.layers.push_back(layer("down", n, hidden));
    m.blocks.push_back(std::move(blk));
  }
  m.validate();
  return m;
}

Matrix gen_calib(const ToySpec& spec, std::size_t samples, std::size_t tokens) {
  if (samples < 1 || tokens < 1) throw ValidationError("samples and tokens must be >= 1");
  return gen_correlated(derive_seed(spec.seed, kCalibTag), spec.width, samples * tokens,
                        spec.calib_decay);
}

Matrix gen_calib(const ToySpec& spec) { return gen_calib(spec, spec.samples, spec.tokens); }

}  // namespace asymcal
