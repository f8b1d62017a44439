#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sbd::roofline {

struct HardwareSpec {
  // Dense FP8 peak and HBM3 bandwidth of an H100 SXM.
  double peak_flops = 1979e12;
  double memory_bandwidth = 3.35e12;
  std::string label = "H100 SXM (FP8)";

  void validate() const;
};

struct ArchSpec {
  // Llama-3.1-8B.
  std::size_t n_layers = 32;
  std::size_t d_model = 4096;
  std::size_t n_heads = 32;
  std::size_t n_kv_heads = 8;
  std::size_t head_dim = 128;
  std::size_t d_ff = 14336;
  std::size_t vocab_size = 128256;
  double bytes_per_weight = 1.0;
  double bytes_per_kv_element = 1.0;
  double bytes_per_activation = 1.0;

  void validate() const;
  // Weights touched by the linear component: per-layer projections plus the
  // output head.
  double linear_weight_count() const;
  // Inputs plus outputs of every linear op, per token.
  double linear_io_per_token() const;
};

struct WorkloadPoint {
  std::size_t batch = 1;
  // 1 is a plain next-token forward.
  std::size_t k = 1;
  std::size_t kv_length = 1;
};

enum class Bound { Compute, Memory };

struct TimingEstimate {
  double flops_total = 0.0;
  double bytes_total = 0.0;
  double compute_time = 0.0;
  double memory_time = 0.0;
  double time = 0.0;
  Bound bound = Bound::Memory;

  static TimingEstimate of(double flops, double bytes, double peak_flops, double bandwidth);
};

// How much of the attention a single fused kernel covers.
// Model: every head of every layer. Head: one query head against its KV head.
enum class AttentionScope { Model, Head };
enum class ActivationTraffic { None, InputOutput };

struct Calibration {
  double bytes_per_weight = 1.0;
  // 1 reads the bandwidth in decimal units; 1.024^4 reads TB/s as TiB/s.
  double bandwidth_scale = 1.0;
  ActivationTraffic activations = ActivationTraffic::InputOutput;
  AttentionScope scope = AttentionScope::Model;

  std::string describe() const;
  bool operator==(const Calibration&) const = default;
};

inline constexpr double kBinaryBandwidthScale = 1.024 * 1.024 * 1.024 * 1.024;

// Straight physical accounting: whole model, decimal bandwidth.
Calibration physical_calibration(const ArchSpec& arch);
// The sweep winner for the default hardware and architecture.
Calibration default_calibration();

struct ForwardTime {
  TimingEstimate attention;
  TimingEstimate linear;
  // Sum of the component times.
  double time = 0.0;
};

ForwardTime forward_time(const HardwareSpec& hw, const ArchSpec& arch, const WorkloadPoint& wp,
                         const Calibration& calib = default_calibration());

// time(k) / time(1) at the same batch and cache length.
double slowdown(const HardwareSpec& hw, const ArchSpec& arch, const WorkloadPoint& wp,
                const Calibration& calib = default_calibration());

// rows: kv_lengths, cols: block_sizes, for one batch size.
std::vector<std::vector<double>> slowdown_table(const HardwareSpec& hw, const ArchSpec& arch,
                                                const std::vector<std::size_t>& kv_lengths,
                                                const std::vector<std::size_t>& block_sizes, std::size_t batch,
                                                const Calibration& calib = default_calibration());

// k * t1 / (t2k + (l - 1) * tk) with l = k / nfe_speedup.
double speedup_from_times(double k, double nfe_speedup, double t1, double t2k, double tk);

// The first forward of a block also carries the previous block, so it covers
// 2k tokens against a cache that is still k short; later forwards cover k.
// k == 1 is plain next-token decoding and returns 1. nfe_speedup > k or
// nfe_speedup < 1 throws ConfigError.
double wallclock_speedup(const HardwareSpec& hw, const ArchSpec& arch, const WorkloadPoint& wp, double nfe_speedup,
                         const Calibration& calib = default_calibration());

}  // namespace sbd::roofline
