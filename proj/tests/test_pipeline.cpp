// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "asymcal/error.hpp"
#include "asymcal/pipeline.hpp"
#include "asymcal/toymodel.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace asymcal;

namespace {

ToySpec small_spec(ToyKind kind, std::uint64_t seed) {
  ToySpec s;
  s.kind = kind;
  s.blocks = 2;
  s.width = 16;
  s.seed = Seed{seed};
  s.samples = 8;
  s.tokens = 8;
  return s;
}

ModelGraph single_mlp_block(std::uint64_t seed) {
  ModelGraph m;
  m.width = 16;
  m.tokens_per_sample = 8;
  Block b;
  b.kind = BlockKind::Mlp;
  b.layers.push_back({"up", spectral_weight(derive_seed(Seed{seed}, 1), 32, 16, 0.9)});
  b.layers.push_back({"down", spectral_weight(derive_seed(Seed{seed}, 2), 16, 32, 0.9)});
  m.blocks.push_back(std::move(b));
  return m;
}

}  // namespace

TEST_CASE("elementwise pieces") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(10.0) == doctest::Approx(10.0));
  CHECK(std::abs(gelu(-10.0)) < 1e-12);
  // Rational tanh approximation; stays close to the erf form.
  for (double x = -6.0; x <= 6.0; x += 0.25)
    CHECK(std::abs(gelu(x) - 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)))) <= 1e-3);
  const Matrix n = rms_norm(gen_normal(Seed{1}, 8, 5));
  for (std::size_t c = 0; c < 5; ++c) {
    double ss = 0.0;
    for (std::size_t r = 0; r < 8; ++r) ss += n(r, c) * n(r, c);
    CHECK(std::sqrt(ss / 8) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("block_mae") {
  const Matrix a = gen_normal(Seed{2}, 4, 6);
  CHECK(block_mae(a, a) == 0.0);
  Matrix shifted = a;
  for (double& v : shifted.data()) v += 0.25;
  CHECK(block_mae(shifted, a) == doctest::Approx(0.25));
  const Matrix b = gen_normal(Seed{3}, 4, 6);
  double s = 0.0;
  for (std::size_t i = 0; i < 24; ++i) s += std::abs(a.data()[i] - b.data()[i]);
  CHECK(block_mae(a, b) == doctest::Approx(s / 24).epsilon(1e-14));
  CHECK_THROWS_AS(block_mae(a, Matrix(4, 5)), ShapeError);
}

TEST_CASE("identity quantizer leaves no error") {
  for (ToyKind kind : {ToyKind::Mlp, ToyKind::TinyTransformer}) {
    const ToySpec spec = small_spec(kind, 4);
    ModelGraph model = build_model(spec);
    QuantConfig cfg;
    cfg.mode = CalibMode::Rtn;
    cfg.bits = 16;
    const CalibReport rep = calibrate_model(model, gen_calib(spec), cfg);
    for (const BlockReport& b : rep.blocks) {
      CHECK(b.mae == 0.0);
      CHECK(b.input_mae == 0.0);
    }
    CHECK(rep.total_asym_loss == 0.0);
  }
}

TEST_CASE("first layer reduces to GPTQ") {
  const Matrix calib = gen_correlated(Seed{5}, 16, 64, 0.5);
  QuantConfig cfg;
  cfg.mode = CalibMode::Gptq;
  ModelGraph a = single_mlp_block(6);
  const CalibReport ra = calibrate_model(a, calib, cfg);
  cfg.mode = CalibMode::Gptaq;
  ModelGraph b = single_mlp_block(6);
  const CalibReport rb = calibrate_model(b, calib, cfg);
  CHECK(ra.blocks[0].input_mae == 0.0);
  CHECK(ra.blocks[0].layers[0].result.q == rb.blocks[0].layers[0].result.q);
  CHECK(ra.blocks[0].layers[0].result.asym_loss == rb.blocks[0].layers[0].result.asym_loss);
  CHECK_FALSE(ra.blocks[0].layers[1].result.q == rb.blocks[0].layers[1].result.q);
  CHECK(rb.blocks[0].layers[1].result.asym_loss < ra.blocks[0].layers[1].result.asym_loss);
}

TEST_CASE("stream independence and residency") {
  const ToySpec spec = small_spec(ToyKind::TinyTransformer, 7);
  const ModelGraph fp = build_model(spec);
  const Matrix calib = gen_calib(spec);
  const Matrix before = forward(fp, calib);
  CHECK(content_hash(forward(fp, calib)) == content_hash(before));

  ModelGraph q = fp;
  QuantConfig cfg;
  const CalibReport rep = calibrate_model(q, calib, cfg);
  CHECK(content_hash(forward(fp, calib)) == content_hash(before));
  // One block of captures at most.
  CHECK(rep.peak_captures <= fp.blocks[0].layers.size());
  CHECK(rep.peak_captures >= 1);
  CHECK(rep.blocks.size() == 2);
  CHECK(rep.blocks[0].input_mae == 0.0);
  CHECK(rep.blocks[1].input_mae > 0.0);
  CHECK(rep.final_mae == rep.blocks[1].mae);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t l = 0; l < q.blocks[b].layers.size(); ++l)
      CHECK(q.blocks[b].layers[l].weight == rep.blocks[b].layers[l].result.q);
}

TEST_CASE("spilled captures give identical results") {
  const ToySpec spec = small_spec(ToyKind::Mlp, 8);
  const Matrix calib = gen_calib(spec);
  QuantConfig cfg;
  ModelGraph a = build_model(spec);
  ModelGraph b = build_model(spec);
  const CalibReport ra = calibrate_model(a, calib, cfg);
  PipelineOptions opts;
  opts.spill_dir = testsupport::scratch_dir("spill");
  const CalibReport rb = calibrate_model(b, calib, cfg, opts);
  CHECK(ra.total_asym_loss == rb.total_asym_loss);
  CHECK(ra.final_mae == rb.final_mae);
}

TEST_CASE("capture store") {
  const auto dir = testsupport::scratch_dir("captures");
  CaptureStore store(dir);
  const Matrix m = gen_normal(Seed{9}, 3, 4);
  store.put(2, m);
  CHECK(std::filesystem::exists(dir / "capture_2.gtaq"));
  CHECK(store.spilled_bytes() > 0);
  CHECK(store.get(2) == m);
  CHECK(store.live() == 1);
  store.put(0, m);
  CHECK(store.peak() == 2);
  store.release(2);
  CHECK_FALSE(std::filesystem::exists(dir / "capture_2.gtaq"));
  CHECK(store.live() == 1);

  CaptureStore mem;
  mem.put(1, m);
  CHECK(mem.get(1) == m);
  CHECK(mem.spilled_bytes() == 0);
  mem.clear();
  CHECK(mem.live() == 0);
}

TEST_CASE("activation order ablation without activation quantization") {
  const ToySpec spec = small_spec(ToyKind::Mlp, 10);
  const Matrix calib = gen_calib(spec);
  QuantConfig cfg;
  cfg.aq_order = AqOrder::WThenA;
  ModelGraph a = build_model(spec);
  const CalibReport ra = calibrate_model(a, calib, cfg);
  cfg.aq_order = AqOrder::AThenW;
  ModelGraph b = build_model(spec);
  const CalibReport rb = calibrate_model(b, calib, cfg);
  CHECK(ra.total_asym_loss == rb.total_asym_loss);
  CHECK(ra.total_deployed_asym_loss == rb.total_deployed_asym_loss);
  for (std::size_t i = 0; i < ra.blocks.size(); ++i) CHECK(ra.blocks[i].mae == rb.blocks[i].mae);
}

TEST_CASE("activation quantization changes the deployed path") {
  const ToySpec spec = small_spec(ToyKind::Mlp, 11);
  const Matrix calib = gen_calib(spec);
  QuantConfig cfg;
  cfg.act_cfg = ActQuantConfig{4, 0.9, true};
  ModelGraph a = build_model(spec);
  const CalibReport r = calibrate_model(a, calib, cfg);
  CHECK(r.final_mae > 0.0);
  CHECK(std::isfinite(r.total_deployed_asym_loss));
}

TEST_CASE("pipeline errors") {
  const ToySpec spec = small_spec(ToyKind::Mlp, 12);
  ModelGraph m = build_model(spec);
  CHECK_THROWS_AS(calibrate_model(m, Matrix(15, 64), QuantConfig{}), ShapeError);
  CHECK_THROWS_AS(calibrate_model(m, gen_normal(Seed{1}, 16, 8), QuantConfig{}), ValidationError);
  m.blocks[1].layers[1].weight(0, 3) = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)calibrate_model(m, gen_calib(spec), QuantConfig{});
    FAIL("expected a calibration error");
  } catch (const CalibrationError& e) {
    CHECK(std::string(e.what()).find("block 1 layer down") != std::string::npos);
    CHECK(e.column() == 3);
  }
}

TEST_CASE("model files round-trip") {
  const auto dir = testsupport::scratch_dir("model");
  const ModelGraph m = build_model(small_spec(ToyKind::TinyTransformer, 13));
  write_model(dir, m);
  const ModelGraph r = read_model(dir / "model.json");
  REQUIRE(r.blocks.size() == m.blocks.size());
  CHECK(r.width == m.width);
  CHECK(r.tokens_per_sample == m.tokens_per_sample);
  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    CHECK(r.blocks[b].kind == m.blocks[b].kind);
    for (std::size_t l = 0; l < m.blocks[b].layers.size(); ++l) {
      CHECK(r.blocks[b].layers[l].name == m.blocks[b].layers[l].name);
      CHECK(content_hash(r.blocks[b].layers[l].weight) ==
            content_hash(m.blocks[b].layers[l].weight));
    }
  }
  CHECK_THROWS_AS(read_model(dir / "missing.json"), IoError);
  std::ofstream(dir / "bad.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(read_model(dir / "bad.json"), FormatError);
}
