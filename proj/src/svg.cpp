// Copyright 2026 The sensfarm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace sensfarm::svg {

namespace {

constexpr const char* kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

void Document::add_note(const std::string& text) {
  height_ += 20.0;
  body_ += "<text x=\"10\" y=\"" + num(height_) + "\" font-size=\"12\">" + escape(text) + "</text>\n";
  height_ += 6.0;
}

void Document::add(const BarPanel& panel) {
  constexpr double kBar = 12.0, kGap = 8.0, kLabel = 140.0;
  const double plot_w = width_ - kLabel - 80.0;
  double lo = 0.0, hi = 0.0;
  for (const auto& g : panel.groups) {
    for (double v : g.values) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;
  const auto x_of = [&](double v) { return kLabel + (v - lo) / (hi - lo) * plot_w; };

  height_ += 24.0;
  body_ += "<text x=\"10\" y=\"" + num(height_) + "\" font-size=\"14\" font-weight=\"bold\">" +
           escape(panel.title) + "</text>\n";
  // Legend.
  double lx = kLabel;
  for (std::size_t s = 0; s < panel.series.size(); ++s) {
    body_ += "<rect x=\"" + num(lx) + "\" y=\"" + num(height_ + 6) + "\" width=\"10\" height=\"10\" fill=\"" +
             kPalette[s % 6] + "\"/>\n";
    body_ += "<text x=\"" + num(lx + 14) + "\" y=\"" + num(height_ + 15) + "\" font-size=\"11\">" +
             escape(panel.series[s]) + "</text>\n";
    lx += 90.0;
  }
  height_ += 24.0;
  const double top = height_;
  for (const auto& g : panel.groups) {
    const double group_h = kBar * static_cast<double>(g.values.size());
    body_ += "<text x=\"10\" y=\"" + num(height_ + group_h / 2 + 4) + "\" font-size=\"12\">" +
             escape(g.label) + "</text>\n";
    for (std::size_t s = 0; s < g.values.size(); ++s) {
      const double v = std::isfinite(g.values[s]) ? g.values[s] : 0.0;
      const double x0 = x_of(std::min(0.0, v)), x1 = x_of(std::max(0.0, v));
      body_ += "<rect x=\"" + num(x0) + "\" y=\"" + num(height_) + "\" width=\"" + num(x1 - x0) +
               "\" height=\"" + num(kBar - 2) + "\" fill=\"" + kPalette[s % 6] + "\"/>\n";
      body_ += "<text x=\"" + num(x1 + 4) + "\" y=\"" + num(height_ + kBar - 3) + "\" font-size=\"10\">" +
               fmt_value(g.values[s]) + "</text>\n";
      height_ += kBar;
    }
    height_ += kGap;
  }
  body_ += "<line x1=\"" + num(x_of(0.0)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(x_of(0.0)) + "\" y2=\"" +
           num(height_) + "\" stroke=\"#333\"/>\n";
  height_ += 10.0;
}

void Document::add(const LinePanel& panel) {
  constexpr double kPlotH = 180.0, kLeft = 60.0;
  const double plot_w = width_ - kLeft - 20.0;
  double x_hi = 0.0, y_hi = 0.0;
  for (const auto& s : panel.series) {
    for (const auto& [x, y] : s.points) {
      x_hi = std::max(x_hi, x);
      y_hi = std::max(y_hi, y);
    }
  }
  if (x_hi <= 0.0) x_hi = 1.0;
  if (y_hi <= 0.0) y_hi = 1.0;

  height_ += 24.0;
  body_ += "<text x=\"10\" y=\"" + num(height_) + "\" font-size=\"14\" font-weight=\"bold\">" +
           escape(panel.title) + "</text>\n";
  double lx = kLeft;
  for (std::size_t s = 0; s < panel.series.size(); ++s) {
    body_ += "<rect x=\"" + num(lx) + "\" y=\"" + num(height_ + 6) + "\" width=\"10\" height=\"10\" fill=\"" +
             kPalette[s % 6] + "\"/>\n";
    body_ += "<text x=\"" + num(lx + 14) + "\" y=\"" + num(height_ + 15) + "\" font-size=\"11\">" +
             escape(panel.series[s].name) + "</text>\n";
    lx += 110.0;
  }
  height_ += 28.0;
  const double top = height_;
  const double bottom = top + kPlotH;
  body_ += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) + "\" height=\"" +
           num(kPlotH) + "\" fill=\"none\" stroke=\"#999\"/>\n";
  body_ += "<text x=\"4\" y=\"" + num(top + 10) + "\" font-size=\"10\">" + fmt_value(y_hi) + "</text>\n";
  body_ += "<text x=\"4\" y=\"" + num(bottom) + "\" font-size=\"10\">0</text>\n";
  for (std::size_t s = 0; s < panel.series.size(); ++s) {
    if (panel.series[s].points.empty()) continue;
    std::string pts;
    for (const auto& [x, y] : panel.series[s].points) {
      pts += num(kLeft + x / x_hi * plot_w) + "," + num(bottom - y / y_hi * kPlotH) + " ";
    }
    body_ += "<polyline fill=\"none\" stroke=\"" + std::string(kPalette[s % 6]) + "\" points=\"" + pts + "\"/>\n";
  }
  height_ = bottom + 16.0;
  body_ += "<text x=\"" + num(kLeft) + "\" y=\"" + num(height_) + "\" font-size=\"10\">" +
           escape(panel.x_label) + " (0 .. " + fmt_value(x_hi) + ")</text>\n";
  height_ += 10.0;
}

std::string Document::str() const {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" +
         num(height_ + 10.0) + "\" font-family=\"sans-serif\">\n" + body_ + "</svg>\n";
}

}  // namespace sensfarm::svg
