// Copyright 2026 The asymcal Authors
// SPDX-License-Identifier: Apache-2.0

#include "asymcal/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "asymcal/engine.hpp"
#include "asymcal/error.hpp"
#include "asymcal/linalg.hpp"
#include "asymcal/runtime.hpp"

namespace asymcal {

namespace {

void validate(const std::vector<std::size_t>& sizes, const BenchOptions& opts) {
  if (sizes.empty()) throw ValidationError("bench: no sizes given");
  for (std::size_t n : sizes) {
    if (n == 0) throw ValidationError("bench: size must be >= 1");
  }
  if (opts.reps < kBenchMinReps) {
    throw ValidationError("bench: reps must be >= " + std::to_string(kBenchMinReps));
  }
}

BenchResult time_it(BenchVariant v, std::size_t n, std::size_t k, const BenchOptions& opts,
                    const std::function<void()>& fn) {
  for (std::size_t i = 0; i < opts.warmups; ++i) fn();
  std::vector<double> us;
  us.reserve(opts.reps);
  for (std::size_t i = 0; i < opts.reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  BenchResult r;
  r.variant = v;
  r.n = n;
  r.k = k;
  r.reps = opts.reps;
  r.median_us = std::max(median_of(us), 1e-3);
  r.iqr_us = iqr_of(us);
  r.threads = thread_budget();
  r.dtype = DType::F64;
  return r;
}

double quantile(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct PInstance {
  Matrix dx_xt;
  CholFactor l;
};

PInstance make_p_instance(Seed seed, std::size_t n, std::size_t k) {
  const Matrix x = gen_correlated(derive_seed(seed, n), n, k, 0.5);
  const Matrix dx = scaled(gen_normal(derive_seed(seed, n + 1), n, k), 0.1);
  return {matmul_nt(dx, x), inverse_cholesky(build_hessian(x, 0.01))};
}

}  // namespace

std::string_view to_string(BenchVariant v) noexcept {
  switch (v) {
    case BenchVariant::PReference: return "P_reference";
    case BenchVariant::PFused: return "P_fused";
    case BenchVariant::GptqLayer: return "GPTQ_layer";
    case BenchVariant::GptaqLayer: return "GPTAQ_layer";
  }
  return "?";
}

BenchVariant parse_bench_variant(std::string_view s) {
  for (auto v : {BenchVariant::PReference, BenchVariant::PFused, BenchVariant::GptqLayer,
                 BenchVariant::GptaqLayer}) {
    if (to_string(v) == s) return v;
  }
  throw FormatError("unknown bench variant '" + std::string(s) + "'");
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  return quantile(v, 0.5);
}

double iqr_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  return quantile(v, 0.75) - quantile(v, 0.25);
}

std::vector<BenchResult> bench_p(const std::vector<std::size_t>& sizes, const BenchOptions& opts) {
  validate(sizes, opts);
  for (std::size_t n : sizes) {
    if (n > kPReferenceMaxN) {
      throw CapabilityError("bench_p: reference variant is capped at n = " +
                            std::to_string(kPReferenceMaxN));
    }
  }
  std::vector<BenchResult> out;
  for (std::size_t n : sizes) {
    const std::size_t k = opts.k != 0 ? opts.k : 2 * n;
    const PInstance inst = make_p_instance(opts.seed, n, k);
    const double diff = max_abs_diff(compute_p_fused(inst.dx_xt, inst.l),
                                     compute_p_reference_rows(inst.dx_xt, inst.l));
    if (!(diff <= 1e-8)) {
      throw CalibrationError(0, "bench_p: fused and reference P differ by " +
                                    std::to_string(diff) + " at n = " + std::to_string(n));
    }
    Matrix sink;
    out.push_back(time_it(BenchVariant::PReference, n, k, opts, [&] {
      sink = compute_p_reference_rows(inst.dx_xt, inst.l);
    }));
    out.push_back(time_it(BenchVariant::PFused, n, k, opts, [&] {
      sink = compute_p_fused(inst.dx_xt, inst.l);
    }));
  }
  return out;
}

std::vector<BenchResult> bench_layer(const std::vector<std::size_t>& sizes,
                                     const BenchOptions& opts) {
  validate(sizes, opts);
  const std::size_t k =
      opts.k != 0 ? opts.k : 2 * *std::max_element(sizes.begin(), sizes.end());
  std::vector<BenchResult> out;
  for (std::size_t n : sizes) {
    if (k < n) throw ValidationError("bench_layer: k must be >= n");
    const Matrix w = gen_normal(derive_seed(opts.seed, 3 * n), n, n);
    const Matrix x = gen_correlated(derive_seed(opts.seed, 3 * n + 1), n, k, 0.5);
    const Matrix xt = add(x, scaled(gen_normal(derive_seed(opts.seed, 3 * n + 2), n, k), 0.05));
    for (CalibMode mode : {CalibMode::Gptq, CalibMode::Gptaq}) {
      QuantConfig cfg;
      cfg.mode = mode;
      cfg.bits = 4;
      cfg.block_size = 128;
      QuantConfig single = cfg;
      single.block_size = n;
      const Matrix qa = calibrate_layer(w, x, xt, cfg).q;
      const Matrix qb = calibrate_layer(w, x, xt, single).q;
      const double diff = max_abs_diff(qa, qb);
      if (!(diff <= 1e-9 * std::max(1.0, max_abs(qa)))) {
        throw CalibrationError(0, "bench_layer: block-size invariance violated by " +
                                      std::to_string(diff) + " at n = " + std::to_string(n));
      }
      const auto variant = mode == CalibMode::Gptq ? BenchVariant::GptqLayer
                                                   : BenchVariant::GptaqLayer;
      out.push_back(time_it(variant, n, k, opts, [&] { (void)calibrate_layer(w, x, xt, cfg); }));
    }
  }
  return out;
}

std::string bench_csv(const std::vector<BenchResult>& rows, bool overhead) {
  std::map<std::size_t, double> gptq;
  for (const auto& r : rows) {
    if (r.variant == BenchVariant::GptqLayer) gptq[r.n] = r.median_us;
  }
  std::ostringstream os;
  os.precision(17);
  os << "variant,n,k,reps,median_us,iqr_us,threads,dtype";
  if (overhead) os << ",overhead_ratio";
  os << '\n';
  for (const auto& r : rows) {
    os << to_string(r.variant) << ',' << r.n << ',' << r.k << ',' << r.reps << ','
       << r.median_us << ',' << r.iqr_us << ',' << r.threads << ',' << to_string(r.dtype);
    if (overhead) {
      os << ',';
      const auto it = gptq.find(r.n);
      if (r.variant == BenchVariant::GptqLayer) {
        os << 1;
      } else if (r.variant == BenchVariant::GptaqLayer && it != gptq.end()) {
        os << r.median_us / it->second;
      }
    }
    os << '\n';
  }
  return os.str();
}

std::vector<BenchResult> parse_bench_csv(std::string_view text) {
  std::vector<BenchResult> out;
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line.rfind("variant,n,k,reps,median_us,iqr_us,threads,dtype", 0) != 0) {
    throw FormatError("bench csv: unexpected header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 8) throw FormatError("bench csv: short row '" + line + "'");
    BenchResult r;
    try {
      r.variant = parse_bench_variant(f[0]);
      r.n = std::stoull(f[1]);
      r.k = std::stoull(f[2]);
      r.reps = std::stoull(f[3]);
      r.median_us = std::stod(f[4]);
      r.iqr_us = std::stod(f[5]);
      r.threads = static_cast<unsigned>(std::stoul(f[6]));
    } catch (const std::logic_error&) {
      throw FormatError("bench csv: malformed row '" + line + "'");
    }
    if (f[7] == "f32") {
      r.dtype = DType::F32;
    } else if (f[7] == "f64") {
      r.dtype = DType::F64;
    } else {
      throw FormatError("bench csv: unknown dtype '" + f[7] + "'");
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace asymcal
