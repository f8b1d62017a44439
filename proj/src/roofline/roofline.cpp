#include "sbd/roofline/roofline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sbd/errors.hpp"

namespace sbd::roofline {

namespace {

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

}  // namespace

void HardwareSpec::validate() const {
  if (!positive(peak_flops)) throw ConfigError("peak_flops must be positive");
  if (!positive(memory_bandwidth)) throw ConfigError("memory_bandwidth must be positive");
}

void ArchSpec::validate() const {
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || n_kv_heads == 0 || head_dim == 0 || d_ff == 0 ||
      vocab_size == 0) {
    throw ConfigError("architecture sizes must be positive");
  }
  if (head_dim * n_heads != d_model) throw ConfigError("head_dim * n_heads must equal d_model");
  if (n_heads % n_kv_heads != 0) throw ConfigError("n_kv_heads must divide n_heads");
  if (!positive(bytes_per_weight) || !positive(bytes_per_kv_element) || !positive(bytes_per_activation)) {
    throw ConfigError("byte widths must be positive");
  }
}

double ArchSpec::linear_weight_count() const {
  const double d = static_cast<double>(d_model);
  const double q = static_cast<double>(n_heads * head_dim);
  const double kv = static_cast<double>(n_kv_heads * head_dim);
  const double ff = static_cast<double>(d_ff);
  // wq, wk, wv, wo, gate, up, down
  const double per_layer = d * q + 2.0 * d * kv + q * d + 3.0 * d * ff;
  return static_cast<double>(n_layers) * per_layer + d * static_cast<double>(vocab_size);
}

double ArchSpec::linear_io_per_token() const {
  const double d = static_cast<double>(d_model);
  const double q = static_cast<double>(n_heads * head_dim);
  const double kv = static_cast<double>(n_kv_heads * head_dim);
  const double ff = static_cast<double>(d_ff);
  const double per_layer = (d + q) + 2.0 * (d + kv) + (q + d) + 2.0 * (d + ff) + (ff + d);
  return static_cast<double>(n_layers) * per_layer + d + static_cast<double>(vocab_size);
}

TimingEstimate TimingEstimate::of(double flops, double bytes, double peak_flops, double bandwidth) {
  TimingEstimate t;
  t.flops_total = flops;
  t.bytes_total = bytes;
  t.compute_time = flops / peak_flops;
  t.memory_time = bytes / bandwidth;
  t.bound = t.compute_time > t.memory_time ? Bound::Compute : Bound::Memory;
  t.time = std::max(t.compute_time, t.memory_time);
  return t;
}

std::string Calibration::describe() const {
  std::ostringstream os;
  os << "bytes_per_weight=" << bytes_per_weight
     << ", bandwidth=" << (bandwidth_scale == 1.0 ? "decimal" : bandwidth_scale == kBinaryBandwidthScale ? "binary" : "scaled")
     << ", activations=" << (activations == ActivationTraffic::None ? "none" : "io")
     << ", attention_scope=" << (scope == AttentionScope::Model ? "model" : "head");
  return os.str();
}

Calibration physical_calibration(const ArchSpec& arch) {
  Calibration c;
  c.bytes_per_weight = arch.bytes_per_weight;
  c.bandwidth_scale = 1.0;
  c.activations = ActivationTraffic::InputOutput;
  c.scope = AttentionScope::Model;
  return c;
}

Calibration default_calibration() {
  Calibration c;
  c.bytes_per_weight = 1.0;
  c.bandwidth_scale = kBinaryBandwidthScale;
  c.activations = ActivationTraffic::InputOutput;
  c.scope = AttentionScope::Head;
  return c;
}

ForwardTime forward_time(const HardwareSpec& hw, const ArchSpec& arch, const WorkloadPoint& wp,
                         const Calibration& calib) {
  const double b = static_cast<double>(wp.batch);
  const double k = static_cast<double>(wp.k);
  const double L = static_cast<double>(wp.kv_length);
  const double hd = static_cast<double>(arch.head_dim);
  const double bw = hw.memory_bandwidth * calib.bandwidth_scale;
  const bool io = calib.activations == ActivationTraffic::InputOutput;

  // Fused attention: QK^T and PV over the cache plus the block itself, reading
  // the cached K and V once and the queries/outputs once.
  double att_flops = 4.0 * b * k * (L + k) * hd;
  double att_bytes = b * L * hd * 2.0 * arch.bytes_per_kv_element;
  double att_io = b * k * hd * 2.0 * arch.bytes_per_activation;
  if (calib.scope == AttentionScope::Model) {
    const double layers = static_cast<double>(arch.n_layers);
    att_flops *= layers * static_cast<double>(arch.n_heads);
    att_bytes *= layers * static_cast<double>(arch.n_kv_heads);
    att_io *= layers * static_cast<double>(arch.n_heads);
  }
  if (io) att_bytes += att_io;

  const double w = arch.linear_weight_count();
  const double lin_flops = 2.0 * b * k * w;
  double lin_bytes = w * calib.bytes_per_weight;
  if (io) lin_bytes += b * k * arch.linear_io_per_token() * arch.bytes_per_activation;

  ForwardTime out;
  out.attention = TimingEstimate::of(att_flops, att_bytes, hw.peak_flops, bw);
  out.linear = TimingEstimate::of(lin_flops, lin_bytes, hw.peak_flops, bw);
  out.time = out.attention.time + out.linear.time;
  return out;
}

double slowdown(const HardwareSpec& hw, const ArchSpec& arch, const WorkloadPoint& wp, const Calibration& calib) {
  if (wp.k == 1) return 1.0;
  WorkloadPoint base = wp;
  base.k = 1;
  return forward_time(hw, arch, wp, calib).time / forward_time(hw, arch, base, calib).time;
}

std::vector<std::vector<double>> slowdown_table(const HardwareSpec& hw, const ArchSpec& arch,
                                                const std::vector<std::size_t>& kv_lengths,
                                                const std::vector<std::size_t>& block_sizes, std::size_t batch,
                                                const Calibration& calib) {
  std::vector<std::vector<double>> rows;
  for (std::size_t L : kv_lengths) {
    std::vector<double>& row = rows.emplace_back();
    for (std::size_t k : block_sizes) row.push_back(slowdown(hw, arch, {batch, k, L}, calib));
  }
  return rows;
}

double speedup_from_times(double k, double nfe_speedup, double t1, double t2k, double tk) {
  const double l = k / nfe_speedup;
  return k * t1 / (t2k + (l - 1.0) * tk);
}

double wallclock_speedup(const HardwareSpec& hw, const ArchSpec& arch, const WorkloadPoint& wp, double nfe_speedup,
                         const Calibration& calib) {
  const double k = static_cast<double>(wp.k);
  if (!(nfe_speedup >= 1.0) || nfe_speedup > k) {
    throw ConfigError("nfe_speedup must lie in [1, k]; got " + std::to_string(nfe_speedup) + " for k = " +
                      std::to_string(wp.k));
  }
  if (wp.k == 1) return 1.0;
  const double t1 = forward_time(hw, arch, {wp.batch, 1, wp.kv_length}, calib).time;
  const std::size_t short_cache = wp.kv_length > wp.k ? wp.kv_length - wp.k : 0;
  const double t2k = forward_time(hw, arch, {wp.batch, 2 * wp.k, short_cache}, calib).time;
  const double tk = forward_time(hw, arch, wp, calib).time;
  return speedup_from_times(k, nfe_speedup, t1, t2k, tk);
}

}  // namespace sbd::roofline
