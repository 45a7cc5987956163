// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/report.hpp"

#include <fstream>
#include <sstream>

#include "asymcal/error.hpp"

namespace asymcal {

namespace {

double micros(std::chrono::nanoseconds d) { return static_cast<double>(d.count()) / 1e3; }

}  // namespace

nlohmann::json to_json(const QuantParams& p) {
  nlohmann::json j;
  j["bits"] = p.bits;
  j["symmetric"] = p.symmetric;
  if (p.group_size == 0) {
    j["group_size"] = nullptr;
  } else {
    j["group_size"] = p.group_size;
  }
  j["rows"] = p.rows;
  j["cols"] = p.cols;
  j["scale"] = p.scale;
  if (p.symmetric) {
    j["zero_point"] = nullptr;
  } else {
    j["zero_point"] = p.zero_point;
  }
  j["shrink"] = p.shrink;
  j["scale_floored"] = p.scale_floored;
  return j;
}

QuantParams quant_params_from_json(const nlohmann::json& j) {
  QuantParams p;
  try {
    p.bits = j.at("bits").get<int>();
    p.symmetric = j.at("symmetric").get<bool>();
    p.group_size = j.at("group_size").is_null() ? 0 : j.at("group_size").get<std::size_t>();
    p.rows = j.at("rows").get<std::size_t>();
    p.cols = j.at("cols").get<std::size_t>();
    p.scale = j.at("scale").get<std::vector<double>>();
    if (!p.symmetric) p.zero_point = j.at("zero_point").get<std::vector<std::int32_t>>();
    p.shrink = j.value("shrink", std::vector<double>(p.scale.size(), 1.0));
    p.scale_floored = j.value("scale_floored", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("quant params: ") + e.what());
  }
  validate_bits(p.bits);
  if (p.scale.size() != p.rows * p.groups_per_row() ||
      (!p.symmetric && p.zero_point.size() != p.scale.size())) {
    throw FormatError("quant params: array lengths do not match the shape");
  }
  for (double s : p.scale) {
    if (!(s > 0.0)) throw FormatError("quant params: non-positive scale");
  }
  for (std::int32_t z : p.zero_point) {
    if (z < p.qmin() || z > p.qmax()) throw FormatError("quant params: zero point out of range");
  }
  return p;
}

nlohmann::json to_json(const QuantConfig& c) {
  nlohmann::json j;
  j["bits"] = c.bits;
  j["symmetric"] = c.symmetric;
  j["group_size"] = c.group_size;
  j["block_size"] = c.block_size;
  j["damp_ratio"] = c.damp_ratio;
  j["act_order"] = c.act_order;
  j["mode"] = std::string(to_string(c.mode));
  j["clip_search"] = std::string(to_string(c.clip_search));
  j["aq_order"] = std::string(to_string(c.aq_order));
  j["act_bits"] = c.act_cfg.bits;
  j["act_clip"] = c.act_cfg.clip_ratio;
  j["act_enabled"] = c.act_cfg.enabled;
  return j;
}

nlohmann::json to_json(const LayerReport& lr) {
  nlohmann::json j;
  j["block"] = lr.block;
  j["layer"] = lr.layer;
  j["name"] = lr.name;
  j["rows"] = lr.result.q.rows();
  j["cols"] = lr.result.q.cols();
  j["sym_loss"] = lr.result.sym_loss;
  j["asym_loss"] = lr.result.asym_loss;
  j["deployed_asym_loss"] = lr.deployed_asym_loss;
  j["elapsed_us"] = micros(lr.result.elapsed);
  j["dead_channels"] = lr.result.dead_channels;
  j["perm"] = lr.result.perm;
  return j;
}

nlohmann::json to_json(const BlockReport& br) {
  nlohmann::json j;
  j["block"] = br.block_index;
  j["input_mae"] = br.input_mae;
  j["mae"] = br.mae;
  j["peak_captures"] = br.peak_captures;
  j["layers"] = nlohmann::json::array();
  for (const auto& lr : br.layers) j["layers"].push_back(to_json(lr));
  return j;
}

nlohmann::json to_json(const CalibReport& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : r.blocks) j["blocks"].push_back(to_json(b));
  j["total_sym_loss"] = r.total_sym_loss;
  j["total_asym_loss"] = r.total_asym_loss;
  j["total_deployed_asym_loss"] = r.total_deployed_asym_loss;
  j["final_mae"] = r.final_mae;
  j["peak_captures"] = r.peak_captures;
  j["elapsed_us"] = micros(r.elapsed);
  j["metadata"] = {
      {"mae_reduction", "mean over all elements"},
      {"mae_stream", "deployed model vs full precision"},
      {"group_order", "processing order"},
      {"clip_search_scope", "once per layer on original weights"},
  };
  return j;
}

std::string layers_csv(const CalibReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "block,layer,name,sym_loss,asym_loss,deployed_asym_loss,elapsed_us\n";
  for (const auto& b : r.blocks) {
    for (const auto& l : b.layers) {
      os << l.block << ',' << l.layer << ',' << l.name << ',' << l.result.sym_loss << ','
         << l.result.asym_loss << ',' << l.deployed_asym_loss << ',' << micros(l.result.elapsed)
         << '\n';
    }
  }
  return os.str();
}

std::string blocks_csv(const CalibReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "block,input_mae,mae,peak_captures\n";
  for (const auto& b : r.blocks) {
    os << b.block_index << ',' << b.input_mae << ',' << b.mae << ',' << b.peak_captures << '\n';
  }
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace asymcal
