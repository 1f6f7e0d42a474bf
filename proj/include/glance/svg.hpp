#pragma once

// Minimal SVG line charts: accuracy versus ROI count, one line per ROI side,
// plus the full-frame baseline as a dashed line.

#include <cstdio>
#include <sstream>
#include <string>

#include "glance/detect.hpp"
#include "glance/sim.hpp"

namespace glance::svg {

inline std::string accuracy_chart(const sim::SweepTable& t, int stratum) {
  constexpr int W = 560, H = 360, L = 60, R = 110, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  int max_n = 1;
  for (int n : t.counts) max_n = std::max(max_n, n);
  auto X = [&](double n) { return L + pw * (n - 1) / std::max(1, max_n - 1); };
  auto Y = [&](double a) { return T + ph * (1.0 - a); };
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream s;
  char buf[256];
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"18\" font-size=\"14\">Acc vs N (%s)</text>\n", L,
                det::kStratumNames[stratum]);
  s << buf;
  for (int k = 0; k <= 4; ++k) {
    const double a = k / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                  "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n",
                  L, Y(a), L + pw, Y(a), L - 6, Y(a) + 4, a);
    s << buf;
  }
  for (int n : t.counts) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%d</text>\n", X(n), T + ph + 16,
                  n);
    s << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">ROI count N</text>\n", L + pw / 2,
                H - 10);
  s << buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%.1f\" stroke=\"black\"/>"
                "<line x1=\"%d\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                L, T, L, T + ph, L, T + ph, L + pw, T + ph);
  s << buf;

  for (std::size_t i = 0; i < t.sides.size(); ++i) {
    const char* color = colors[i % 6];
    std::string pts;
    for (std::size_t j = 0; j < t.counts.size(); ++j) {
      const auto a = t.cells[stratum][i][j].acc();
      if (!a) continue;
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", X(t.counts[j]), Y(*a));
      pts += buf;
    }
    if (!pts.empty())
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\">s=%d</text>\n",
                  L + pw + 10, T + 12.0 + 18 * i, L + pw + 30, T + 12.0 + 18 * i, color, L + pw + 36,
                  T + 16.0 + 18 * i, t.sides[i]);
    s << buf;
  }
  if (const auto g = t.global[stratum].acc()) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" fill=\"gray\">global</text>\n",
                  L, Y(*g), L + pw, Y(*g), L + pw + 36, T + 16.0 + 18 * t.sides.size());
    s << buf;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace glance::svg
