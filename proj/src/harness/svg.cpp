#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "sbd/harness/evaluate.hpp"

namespace sbd {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string eval_svg(const EvalReport& report, const std::string& title) {
  constexpr double W = 640, H = 420, L = 60, R = 150, T = 40, B = 50;
  double xmax = 1.0;
  for (const EvalRow& r : report.rows) xmax = std::max(xmax, r.nfe_speedup);
  xmax = std::ceil(xmax);
  const double xmin = 1.0;
  auto px = [&](double x) { return L + (x - xmin) / std::max(xmax - xmin, 1.0) * (W - L - R); };
  auto py = [&](double y) { return H - B - y * (H - T - B); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::map<std::string, std::string> colour;
  for (const EvalRow& r : report.rows) {
    if (!colour.count(r.variant)) colour[r.variant] = palette[colour.size() % 5];
  }

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      W, H);
  s += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"14\">{}</text>\n", L, escape(title));
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, py(0), W - R, py(0));
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, py(0), L, py(1));
  for (int i = 0; i <= 4; ++i) {
    const double y = i / 4.0;
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2f}</text>\n", L - 6, py(y) + 4, y);
  }
  for (double x = xmin; x <= xmax + 1e-9; x += 1.0) {
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.0f}x</text>\n", px(x), py(0) + 16, x);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">mean NFE speedup</text>\n", (L + W - R) / 2, H - 12);
  s += fmt::format("<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">accuracy</text>\n",
                   (T + H - B) / 2, (T + H - B) / 2);
  for (const EvalRow& r : report.rows) {
    s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"{}\"/>\n", px(r.nfe_speedup),
                     py(r.accuracy), colour[r.variant]);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"9\">{}</text>\n", px(r.nfe_speedup) + 6,
                     py(r.accuracy) - 4, escape(r.threshold));
  }
  double ly = T + 10;
  for (const auto& [name, c] : colour) {
    s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n", W - R + 20, ly, c);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", W - R + 30, ly + 4, escape(name));
    ly += 16;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace sbd
