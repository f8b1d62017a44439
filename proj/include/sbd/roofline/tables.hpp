#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sbd/roofline/calibration.hpp"

namespace sbd::roofline {

struct TableGrid {
  std::vector<std::size_t> kv_lengths{16, 256, 1024, 4096, 16384, 65536, 1048576, 4194304};
  std::vector<std::size_t> block_sizes{1, 2, 4, 8, 16, 32, 64};
  std::vector<std::size_t> batches{1, 4, 8, 16};
  std::vector<std::size_t> speedup_block_sizes{8, 16, 32, 64};
  std::vector<std::size_t> speedup_batches{1, 4, 8};
  std::vector<double> nfe_speedups{2, 4, 8};

  static TableGrid empty() { return {{}, {}, {}, {}, {}, {}}; }
};

// Cell tags shown in the Markdown report as *, ** and ***. Slowdowns are tagged
// from 1.5 and 3.0; speedups when they fall below 97.5%, 90% and 60% of the
// NFE speedup.
enum class CellTag { None, Mild, Strong, Severe };
CellTag slowdown_tag(double slowdown);
CellTag speedup_tag(double speedup, double nfe_speedup);

struct EmitOptions {
  std::filesystem::path out_dir;
  // Include the anchor residual section.
  bool residuals = true;
};

// Writes slowdown_<batch>.csv, speedup_<batch>_<nfe>.csv and roofline.md.
// Returns the written paths. Throws IoError when a file cannot be written.
std::vector<std::filesystem::path> emit_tables(const HardwareSpec& hw, const ArchSpec& arch, const Calibration& calib,
                                               const TableGrid& grid, const EmitOptions& opt);

// Formats a ratio with three decimals.
std::string format_ratio(double r);

}  // namespace sbd::roofline
