#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pftrack/io.hpp"
#include "pftrack/types.hpp"

namespace pftrack::plot {

// Deterministic static BEV figures: gt trajectories in grey, predicted
// tracks colored by id. Plain SVG text, no external tooling.

inline const char* kPalette[] = {"#e41a1c", "#377eb8", "#4daf4a", "#984ea3",
                                 "#ff7f00", "#a65628", "#f781bf"};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string bev_svg(const std::vector<io::TrackRecord>& gt,
                           const std::vector<io::TrackRecord>& pred,
                           const RegionBounds& bounds = {}) {
  const double size = 640.0;
  const double span_x = bounds.x_max - bounds.x_min;
  const double span_y = bounds.y_max - bounds.y_min;
  auto px = [&](double x) { return (x - bounds.x_min) / span_x * size; };
  auto py = [&](double y) { return size - (y - bounds.y_min) / span_y * size; };

  auto polyline = [&](const std::vector<Vec2>& pts, const std::string& color, double width,
                      double opacity) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
       << "\" stroke-opacity=\"" << opacity << "\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
      if (i) os << " ";
      os << fmt(px(pts[i].x)) << "," << fmt(py(pts[i].y));
    }
    os << "\"/>\n";
    return os.str();
  };

  std::map<TrackId, std::vector<Vec2>> gt_tracks, pred_tracks;
  for (const auto& r : gt) gt_tracks[r.id].push_back({r.box.center.x, r.box.center.y});
  for (const auto& r : pred) pred_tracks[r.id].push_back({r.box.center.x, r.box.center.y});

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << int(size) << "\" height=\""
     << int(size) << "\" viewBox=\"0 0 " << int(size) << " " << int(size) << "\">\n";
  os << "<rect width=\"" << int(size) << "\" height=\"" << int(size) << "\" fill=\"white\"/>\n";
  for (const auto& [id, pts] : gt_tracks) os << polyline(pts, "#999999", 2.0, 0.8);
  int color_idx = 0;
  for (const auto& [id, pts] : pred_tracks) {
    const char* color = kPalette[color_idx % 7];
    ++color_idx;
    os << polyline(pts, color, 1.5, 0.9);
    if (!pts.empty())
      os << "<circle cx=\"" << fmt(px(pts.back().x)) << "\" cy=\"" << fmt(py(pts.back().y))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Simple line chart for sweep outputs (e.g. id switches vs extension length).
inline std::string line_chart_svg(const std::vector<double>& xs,
                                  const std::vector<std::vector<double>>& series,
                                  const std::vector<std::string>& labels,
                                  const std::string& x_label) {
  const double w = 640.0, h = 400.0, margin = 50.0;
  double ymax = 1e-9, xmin = xs.front(), xmax = xs.back();
  for (const auto& s : series)
    for (double v : s) ymax = std::max(ymax, v);
  auto px = [&](double x) { return margin + (x - xmin) / std::max(1e-9, xmax - xmin) * (w - 2 * margin); };
  auto py = [&](double y) { return h - margin - y / ymax * (h - 2 * margin); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << int(w) << "\" height=\"" << int(h)
     << "\">\n<rect width=\"" << int(w) << "\" height=\"" << int(h) << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(h - margin) << "\" x2=\"" << fmt(w - margin)
     << "\" y2=\"" << fmt(h - margin) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(margin) << "\" x2=\"" << fmt(margin)
     << "\" y2=\"" << fmt(h - margin) << "\" stroke=\"black\"/>\n";
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 7];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < xs.size(); ++i) {
      if (i) os << " ";
      os << fmt(px(xs[i])) << "," << fmt(py(series[s][i]));
    }
    os << "\"/>\n";
    os << "<text x=\"" << fmt(w - margin + 4) << "\" y=\"" << fmt(py(series[s].back()))
       << "\" font-size=\"12\" fill=\"" << color << "\">" << labels[s] << "</text>\n";
  }
  for (size_t i = 0; i < xs.size(); ++i)
    os << "<text x=\"" << fmt(px(xs[i]) - 4) << "\" y=\"" << fmt(h - margin + 16)
       << "\" font-size=\"11\">" << xs[i] << "</text>\n";
  os << "<text x=\"" << fmt(w / 2) << "\" y=\"" << fmt(h - 10) << "\" font-size=\"12\">" << x_label
     << "</text>\n";
  os << "<text x=\"10\" y=\"" << fmt(margin - 10) << "\" font-size=\"11\">max "
     << fmt(ymax) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace pftrack::plot
