#include "sbd/roofline/tables.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sbd/errors.hpp"

namespace sbd::roofline {

namespace {

std::string number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string nfe_label(double nfe) {
  if (nfe == std::floor(nfe)) return std::to_string(static_cast<long long>(nfe));
  return number(nfe);
}

std::string mark(CellTag t) {
  switch (t) {
    case CellTag::None: return "";
    case CellTag::Mild: return "*";
    case CellTag::Strong: return "**";
    case CellTag::Severe: return "***";
  }
  return "";
}

void write_file(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
  written.push_back(path);
}

std::string csv_header(const std::vector<std::size_t>& blocks) {
  std::string h = "kv_length";
  for (std::size_t k : blocks) h += ",k=" + std::to_string(k);
  return h + "\n";
}

std::string md_header(const std::vector<std::size_t>& blocks) {
  std::string h = "| KV cache length |";
  std::string rule = "|---|";
  for (std::size_t k : blocks) {
    h += " k=" + std::to_string(k) + " |";
    rule += "---|";
  }
  return h + "\n" + rule + "\n";
}

}  // namespace

std::string format_ratio(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", r);
  return buf;
}

CellTag slowdown_tag(double s) {
  if (s >= 3.0) return CellTag::Strong;
  if (s >= 1.5) return CellTag::Mild;
  return CellTag::None;
}

CellTag speedup_tag(double speedup, double nfe_speedup) {
  const double eff = speedup / nfe_speedup;
  if (eff < 0.6) return CellTag::Severe;
  if (eff < 0.9) return CellTag::Strong;
  if (eff < 0.975) return CellTag::Mild;
  return CellTag::None;
}

std::vector<std::filesystem::path> emit_tables(const HardwareSpec& hw, const ArchSpec& arch, const Calibration& calib,
                                               const TableGrid& grid, const EmitOptions& opt) {
  hw.validate();
  arch.validate();
  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create " + opt.out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  std::ostringstream md;
  md << "# Roofline estimates\n\n";
  md << "- hardware: " << hw.label << ", peak_flops=" << number(hw.peak_flops)
     << ", memory_bandwidth=" << number(hw.memory_bandwidth) << "\n";
  md << "- architecture: layers=" << arch.n_layers << ", d_model=" << arch.d_model << ", heads=" << arch.n_heads
     << ", kv_heads=" << arch.n_kv_heads << ", head_dim=" << arch.head_dim << ", d_ff=" << arch.d_ff
     << ", vocab=" << arch.vocab_size << "\n";
  md << "- calibration: " << calib.describe() << "\n";
  md << "- speedup: k*t(1, L) / (t(2k, L-k) + (l-1)*t(k, L)), l = k / nfe_speedup\n";
  md << "- tags: slowdown >= 1.5 `*`, >= 3.0 `**`; speedup below 97.5% / 90% / 60% of the NFE speedup `*` / `**` / "
        "`***`\n\n";

  for (std::size_t b : grid.batches) {
    const auto table = slowdown_table(hw, arch, grid.kv_lengths, grid.block_sizes, b, calib);
    std::string csv = csv_header(grid.block_sizes);
    md << "## Slowdown, batch " << b << "\n\n" << md_header(grid.block_sizes);
    for (std::size_t r = 0; r < grid.kv_lengths.size(); ++r) {
      csv += std::to_string(grid.kv_lengths[r]);
      md << "| " << grid.kv_lengths[r] << " |";
      for (double v : table[r]) {
        csv += "," + format_ratio(v);
        md << " " << format_ratio(v) << mark(slowdown_tag(v)) << " |";
      }
      csv += "\n";
      md << "\n";
    }
    md << "\n";
    write_file(opt.out_dir / ("slowdown_" + std::to_string(b) + ".csv"), csv, written);
  }

  for (double nfe : grid.nfe_speedups) {
    for (std::size_t b : grid.speedup_batches) {
      std::string csv = csv_header(grid.speedup_block_sizes);
      md << "## Wall-clock speedup, batch " << b << ", NFE speedup " << nfe_label(nfe) << "\n\n"
         << md_header(grid.speedup_block_sizes);
      for (std::size_t L : grid.kv_lengths) {
        csv += std::to_string(L);
        md << "| " << L << " |";
        for (std::size_t k : grid.speedup_block_sizes) {
          const double v = wallclock_speedup(hw, arch, {b, k, L}, nfe, calib);
          csv += "," + format_ratio(v);
          md << " " << format_ratio(v) << mark(speedup_tag(v, nfe)) << " |";
        }
        csv += "\n";
        md << "\n";
      }
      md << "\n";
      write_file(opt.out_dir / ("speedup_" + std::to_string(b) + "_" + nfe_label(nfe) + ".csv"), csv, written);
    }
  }

  if (opt.residuals) {
    md << "## Anchor residuals\n\n| anchor | expected | model | relative error | gating |\n|---|---|---|---|---|\n";
    for (const AnchorResidual& r : anchor_residuals(hw, arch, calib)) {
      char err[32];
      std::snprintf(err, sizeof err, "%+.4f%%", 100.0 * r.relative_error);
      md << "| " << r.anchor.name << " | " << format_ratio(r.anchor.expected) << " | " << format_ratio(r.value)
         << " | " << err << " | " << (r.anchor.gating ? "yes" : "no") << " |\n";
    }
  }
  write_file(opt.out_dir / "roofline.md", md.str(), written);
  return written;
}

}  // namespace sbd::roofline
