// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "asymcal/bench.hpp"
#include "asymcal/error.hpp"
#include "asymcal/pipeline.hpp"
#include "asymcal/report.hpp"
#include "asymcal/runtime.hpp"
#include "asymcal/tensor_io.hpp"
#include "asymcal/toymodel.hpp"
#include "json.hpp"

namespace asymcal {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  std::string toy;
  std::string model;
  int bits = 4;
  bool symmetric = false;
  std::string mode = "gptaq";
  std::size_t group_size = 0;
  std::size_t block_size = 128;
  double damp = 0.01;
  bool act_order = false;
  std::string aq_order = "aw";
  std::string clip = "minmax";
  int act_bits = kPassthroughBits;
  double act_clip = 0.9;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t blocks = 4;
  std::size_t width = 32;
  std::size_t hidden_mult = 2;
  double weight_decay = 0.9;
  std::size_t samples = 128;
  std::size_t tokens = 16;
  std::string spill;

  std::string what = "p";
  std::vector<std::size_t> sizes;
  std::size_t reps = 9;
  std::size_t k = 0;
};

json echo(const RunConfig& c) {
  return {{"toy", c.toy},           {"model", c.model},
          {"bits", c.bits},         {"symmetric", c.symmetric},
          {"mode", c.mode},         {"group_size", c.group_size},
          {"block_size", c.block_size}, {"damp", c.damp},
          {"act_order", c.act_order}, {"aq_order", c.aq_order},
          {"clip", c.clip},         {"act_bits", c.act_bits},
          {"act_clip", c.act_clip}, {"seed", c.seed},
          {"out", c.out},           {"blocks", c.blocks},
          {"width", c.width},       {"hidden_mult", c.hidden_mult},
          {"weight_decay", c.weight_decay}, {"samples", c.samples},
          {"tokens", c.tokens},     {"spill", c.spill},
          {"what", c.what},         {"sizes", c.sizes},
          {"reps", c.reps},         {"k", c.k}};
}

void add_model_options(CLI::App* app, RunConfig& c) {
  app->add_option("--toy", c.toy, "Build a toy model")->check(CLI::IsMember({"mlp", "transformer"}));
  app->add_option("--model", c.model, "Path to a model.json description");
  app->add_option("--bits", c.bits, "Weight bit-width")->check(CLI::IsMember({2, 3, 4, 8, 16}));
  app->add_flag("--symmetric", c.symmetric, "Symmetric weight grid");
  app->add_option("--group-size", c.group_size, "Columns per quantization group (0: per channel)");
  app->add_option("--block-size", c.block_size, "Lazy-batch block size")
      ->check(CLI::PositiveNumber);
  app->add_option("--damp", c.damp, "Dampening ratio")->check(CLI::NonNegativeNumber);
  app->add_flag("--act-order", c.act_order, "Process columns by descending Hessian diagonal");
  app->add_option("--clip", c.clip, "Weight clip search")->check(CLI::IsMember({"minmax", "mse"}));
  app->add_option("--act-bits", c.act_bits, "Activation bit-width (16 disables)")
      ->check(CLI::IsMember({2, 3, 4, 8, 16}));
  app->add_option("--act-clip", c.act_clip, "Activation clip ratio")->check(CLI::Range(1e-9, 1.0));
  app->add_option("--seed", c.seed, "Seed for toy weights and calibration data");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--blocks", c.blocks, "Toy block count")->check(CLI::Range(2, 6));
  app->add_option("--width", c.width, "Toy width")->check(CLI::Range(16, 128));
  app->add_option("--hidden-mult", c.hidden_mult, "Toy MLP hidden multiplier")
      ->check(CLI::Range(1, 4));
  app->add_option("--weight-decay", c.weight_decay, "Toy weight singular-value decay")
      ->check(CLI::Range(1e-9, 1.0));
  app->add_option("--samples", c.samples, "Calibration samples")->check(CLI::PositiveNumber);
  app->add_option("--tokens", c.tokens, "Tokens per sample")->check(CLI::PositiveNumber);
  app->add_option("--spill", c.spill, "Spill layer captures to this directory");
}

QuantConfig quant_config(const RunConfig& c) {
  QuantConfig q;
  q.bits = c.bits;
  q.symmetric = c.symmetric;
  q.group_size = c.group_size;
  q.block_size = c.block_size;
  q.damp_ratio = c.damp;
  q.act_order = c.act_order;
  q.mode = parse_mode(c.mode);
  q.clip_search = parse_clip(c.clip);
  q.aq_order = parse_aq_order(c.aq_order);
  q.act_cfg.bits = c.act_bits;
  q.act_cfg.clip_ratio = c.act_clip;
  q.act_cfg.enabled = c.act_bits < kPassthroughBits;
  q.validate();
  return q;
}

struct Workload {
  ModelGraph model;
  Matrix calib;
};

Workload load_workload(const RunConfig& c) {
  if (c.toy.empty() == c.model.empty()) {
    throw ValidationError("exactly one of --toy or --model is required");
  }
  ToySpec spec;
  spec.seed = Seed{c.seed};
  spec.samples = c.samples;
  spec.tokens = c.tokens;
  Workload w;
  if (!c.toy.empty()) {
    spec.kind = parse_toy_kind(c.toy);
    spec.blocks = c.blocks;
    spec.width = c.width;
    spec.hidden_mult = c.hidden_mult;
    spec.weight_decay = c.weight_decay;
    w.model = build_model(spec);
  } else {
    w.model = read_model(c.model);
    spec.width = w.model.width;
    spec.tokens = w.model.tokens_per_sample;
  }
  w.calib = gen_calib(spec, spec.samples, spec.tokens);
  return w;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& c,
                    const std::vector<std::string>& args) {
  fs::create_directories(dir);
  json m;
  m["command"] = command;
  m["args"] = args;
  m["config"] = echo(c);
  m["seed"] = c.seed;
  m["version"] = std::string(version());
  m["git_hash"] = std::string(git_hash());
  m["threads"] = thread_budget();
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

int cmd_quantize(const RunConfig& c, const std::vector<std::string>& args, std::ostream& out) {
  const QuantConfig cfg = quant_config(c);
  Workload w = load_workload(c);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  PipelineOptions opts;
  if (!c.spill.empty()) opts.spill_dir = fs::path(c.spill);
  const CalibReport report = calibrate_model(w.model, w.calib, cfg, opts);

  write_model(dir, w.model, "weights");
  json params = json::array();
  for (const auto& b : report.blocks) {
    for (const auto& l : b.layers) {
      params.push_back({{"block", l.block},
                        {"layer", l.layer},
                        {"name", l.name},
                        {"perm", l.result.perm},
                        {"params", to_json(l.result.params)}});
    }
  }
  write_text(dir / "params.json", params.dump(2) + "\n");
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(dir / "report.csv", layers_csv(report));
  write_text(dir / "blocks.csv", blocks_csv(report));
  write_manifest(dir, "quantize", c, args);
  out << blocks_csv(report);
  return kExitOk;
}

int cmd_ablate(const RunConfig& c, const std::vector<std::string>& args, std::ostream& out) {
  const QuantConfig base = quant_config(c);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  json rows = json::array();
  std::string csv = "mode,aq_order,total_sym_loss,total_asym_loss,total_deployed_asym_loss,final_mae\n";
  for (CalibMode mode : {CalibMode::Rtn, CalibMode::Gptq, CalibMode::GptaqSecondOnly,
                         CalibMode::Gptaq}) {
    for (AqOrder order : {AqOrder::WThenA, AqOrder::AThenW}) {
      QuantConfig cfg = base;
      cfg.mode = mode;
      cfg.aq_order = order;
      Workload w = load_workload(c);
      const CalibReport r = calibrate_model(w.model, w.calib, cfg);
      rows.push_back({{"mode", std::string(to_string(mode))},
                      {"aq_order", std::string(to_string(order))},
                      {"total_sym_loss", r.total_sym_loss},
                      {"total_asym_loss", r.total_asym_loss},
                      {"total_deployed_asym_loss", r.total_deployed_asym_loss},
                      {"final_mae", r.final_mae}});
      std::ostringstream line;
      line.precision(17);
      line << to_string(mode) << ',' << to_string(order) << ',' << r.total_sym_loss << ','
           << r.total_asym_loss << ',' << r.total_deployed_asym_loss << ',' << r.final_mae
           << '\n';
      csv += line.str();
    }
  }
  write_text(dir / "ablation.csv", csv);
  write_text(dir / "ablation.json", json{{"rows", rows}}.dump(2) + "\n");
  write_manifest(dir, "ablate", c, args);
  out << csv;
  return kExitOk;
}

int cmd_bench(const RunConfig& c, const std::vector<std::string>& args, std::ostream& out) {
  BenchOptions opts;
  opts.reps = c.reps;
  opts.k = c.k;
  opts.seed = Seed{c.seed};
  std::vector<std::size_t> sizes = c.sizes;
  if (sizes.empty()) sizes = {256, 512, 1024};
  const bool layer = c.what == "layer";
  const auto rows = layer ? bench_layer(sizes, opts) : bench_p(sizes, opts);
  const std::string csv = bench_csv(rows, layer);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  write_text(dir / (layer ? "bench_layer.csv" : "bench_p.csv"), csv);
  write_manifest(dir, "bench", c, args);
  out << csv;
  return kExitOk;
}

// Unsectioned keys in a config file belong to the subcommand being run.
class ScopedConfig : public CLI::ConfigINI {
 public:
  explicit ScopedConfig(std::string scope) : scope_(std::move(scope)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "++" && item.name != "--") {
        item.parents.push_back(scope_);
      }
    }
    return items;
  }

 private:
  std::string scope_;
};

void emit_error(std::ostream& err, std::string_view kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-training weight quantization for linear layers", "asymcal"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* quantize = app.add_subcommand("quantize", "Calibrate and quantize a model");
  add_model_options(quantize, cfg);
  quantize->add_option("--mode", cfg.mode, "rtn | gptq | gptaq2 | gptaq")
      ->check(CLI::IsMember({"rtn", "gptq", "gptaq2", "gptaq"}));
  quantize->add_option("--aq-order", cfg.aq_order, "wa | aw")->check(CLI::IsMember({"wa", "aw"}));

  auto* ablate = app.add_subcommand("ablate", "Run every update mode under both AQ orders");
  add_model_options(ablate, cfg);

  auto* bench = app.add_subcommand("bench", "Time P construction or layer calibration");
  bench->add_option("--what", cfg.what, "p | layer")->check(CLI::IsMember({"p", "layer"}));
  bench->add_option("--sizes", cfg.sizes, "Comma-separated sizes")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench->add_option("--reps", cfg.reps, "Timed repetitions")->check(CLI::Range(5, 1000000));
  bench->add_option("--k", cfg.k, "Calibration columns (0: automatic)");
  bench->add_option("--seed", cfg.seed, "Seed");
  bench->add_option("--out", cfg.out, "Output directory");

  for (auto* sub : {quantize, ablate, bench}) sub->fallthrough();
  const auto scope = std::find_if(args.begin(), args.end(), [](const std::string& a) {
    return a == "quantize" || a == "ablate" || a == "bench";
  });
  app.set_config("--config", "", "Config file of key = value lines for the subcommand");
  app.config_formatter(std::make_shared<ScopedConfig>(scope == args.end() ? "" : *scope));
  app.allow_config_extras(false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "validation", e.what());
    return kExitValidation;
  }

  try {
    if (quantize->parsed()) return cmd_quantize(cfg, args, out);
    if (ablate->parsed()) return cmd_ablate(cfg, args, out);
    return cmd_bench(cfg, args, out);
  } catch (const ValidationError& e) {
    emit_error(err, to_string(e.kind()), e.what());
    return kExitValidation;
  } catch (const Error& e) {
    emit_error(err, to_string(e.kind()), e.what());
    return kExitFailure;
  } catch (const fs::filesystem_error& e) {
    emit_error(err, "io", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    emit_error(err, "internal", e.what());
    return kExitFailure;
  }
}

}  // namespace asymcal
