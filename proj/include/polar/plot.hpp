#pragma once
// Static SVG figures: per-axis box-and-swarm panels, trajectory step plots and
// the 2-D PCA scatter. Output is plain text so it can be diffed in tests.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "polar/metrics.hpp"
#include "polar/rng.hpp"

namespace polar::plot {

struct Point {
  std::string id;
  std::string group;
  double x = 0.0;
  double y = 0.0;
  std::string tag;  // optional marker label
};

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Safe file stem for an axis name.
inline std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "axis" : out;
}

// Deterministic jitter in [-0.5, 0.5) from an id.
inline double jitter(const std::string& id) {
  auto eng = rng::make_engine(0, "plot-jitter/" + id);
  return rng::uniform01(eng) - 0.5;
}

struct Frame {
  double w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

inline void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

inline void open_svg(std::ostringstream& os, const Frame& f, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.w) << "\" height=\"" << num(f.h)
     << "\" viewBox=\"0 0 " << num(f.w) << ' ' << num(f.h) << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(f.w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"14\">" << escape(title) << "</text>\n";
}

inline void axes(std::ostringstream& os, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  os << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.h - f.bottom) << "\" x2=\"" << num(f.w - f.right)
     << "\" y2=\"" << num(f.h - f.bottom) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.top) << "\" x2=\"" << num(f.left) << "\" y2=\""
     << num(f.h - f.bottom) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.h - f.bottom + 16)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << num(xv) << "</text>\n";
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.py(yv) + 3)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(yv) << "</text>\n";
  }
  os << "<text x=\"" << num((f.left + f.w - f.right) / 2) << "\" y=\"" << num(f.h - 12)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num((f.top + f.h - f.bottom) / 2) << "\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " << num((f.top + f.h - f.bottom) / 2)
     << ")\">" << escape(ylabel) << "</text>\n";
}

inline std::map<std::string, std::size_t> group_colors(const std::vector<Point>& pts) {
  std::map<std::string, std::size_t> colors;
  for (const auto& p : pts) colors.emplace(p.group, 0);
  std::size_t i = 0;
  for (auto& [g, c] : colors) c = i++ % std::size(kPalette);
  return colors;
}

inline void legend(std::ostringstream& os, const Frame& f, const std::map<std::string, std::size_t>& colors) {
  constexpr std::size_t kMaxEntries = 12;
  double y = f.top + 4;
  std::size_t shown = 0;
  for (const auto& [g, c] : colors) {
    if (shown++ == kMaxEntries) {
      os << "<text x=\"" << num(f.w - f.right - 80) << "\" y=\"" << num(y + 4)
         << "\" font-family=\"sans-serif\" font-size=\"11\">+" << colors.size() - kMaxEntries << " more</text>\n";
      break;
    }
    os << "<circle cx=\"" << num(f.w - f.right - 90) << "\" cy=\"" << num(y) << "\" r=\"4\" fill=\"" << kPalette[c]
       << "\"/>\n<text x=\"" << num(f.w - f.right - 80) << "\" y=\"" << num(y + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(g.empty() ? "(none)" : g) << "</text>\n";
    y += 16;
  }
}

// Horizontal box-and-swarm: one row per group, x = score.
inline std::string box_swarm(const std::string& title, const std::vector<Point>& pts) {
  Frame f;
  const auto colors = group_colors(pts);
  f.x0 = 1e300;
  f.x1 = -1e300;
  for (const auto& p : pts) {
    f.x0 = std::min(f.x0, p.x);
    f.x1 = std::max(f.x1, p.x);
  }
  if (pts.empty()) f.x0 = f.x1 = 0;
  widen(f.x0, f.x1);
  f.y0 = -0.5;
  f.y1 = static_cast<double>(colors.size()) - 0.5;
  std::ostringstream os;
  open_svg(os, f, title);
  axes(os, f, "s", "");
  std::size_t row = 0;
  for (const auto& [g, c] : colors) {
    std::vector<double> xs;
    for (const auto& p : pts)
      if (p.group == g) xs.push_back(p.x);
    std::sort(xs.begin(), xs.end());
    const double q1 = metrics::quantile_sorted(xs, 0.25), q2 = metrics::quantile_sorted(xs, 0.5),
                 q3 = metrics::quantile_sorted(xs, 0.75);
    const double iqr = q3 - q1;
    double lo = q1, hi = q3;
    for (double x : xs) {
      if (x >= q1 - 1.5 * iqr) lo = std::min(lo, x);
      if (x <= q3 + 1.5 * iqr) hi = std::max(hi, x);
    }
    const double yc = f.py(static_cast<double>(row)), half = 18;
    os << "<line x1=\"" << num(f.px(lo)) << "\" y1=\"" << num(yc) << "\" x2=\"" << num(f.px(hi)) << "\" y2=\""
       << num(yc) << "\" stroke=\"#444\"/>\n";
    os << "<rect x=\"" << num(f.px(q1)) << "\" y=\"" << num(yc - half) << "\" width=\""
       << num(std::max(1.0, f.px(q3) - f.px(q1))) << "\" height=\"" << num(2 * half) << "\" fill=\"none\" stroke=\""
       << kPalette[c] << "\"/>\n";
    os << "<line x1=\"" << num(f.px(q2)) << "\" y1=\"" << num(yc - half) << "\" x2=\"" << num(f.px(q2))
       << "\" y2=\"" << num(yc + half) << "\" stroke=\"" << kPalette[c] << "\" stroke-width=\"2\"/>\n";
    for (const auto& p : pts) {
      if (p.group != g) continue;
      os << "<circle cx=\"" << num(f.px(p.x)) << "\" cy=\"" << num(yc + 1.6 * half * jitter(p.id))
         << "\" r=\"2.5\" fill=\"" << kPalette[c] << "\" fill-opacity=\"0.6\"><title>" << escape(p.id)
         << "</title></circle>\n";
    }
    ++row;
  }
  legend(os, f, colors);
  os << "</svg>\n";
  return os.str();
}

// Scatter; points sharing an id are joined in input order (trajectories).
inline std::string scatter(const std::string& title, const std::vector<Point>& pts, const std::string& xlabel,
                           const std::string& ylabel, bool connect) {
  Frame f;
  const auto colors = group_colors(pts);
  f.x0 = f.y0 = 1e300;
  f.x1 = f.y1 = -1e300;
  for (const auto& p : pts) {
    f.x0 = std::min(f.x0, p.x);
    f.x1 = std::max(f.x1, p.x);
    f.y0 = std::min(f.y0, p.y);
    f.y1 = std::max(f.y1, p.y);
  }
  if (pts.empty()) f.x0 = f.x1 = f.y0 = f.y1 = 0;
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);
  std::ostringstream os;
  open_svg(os, f, title);
  axes(os, f, xlabel, ylabel);
  if (connect) {
    std::map<std::string, std::vector<const Point*>> by_id;
    std::vector<std::string> order;
    for (const auto& p : pts) {
      if (!by_id.contains(p.id)) order.push_back(p.id);
      by_id[p.id].push_back(&p);
    }
    for (const auto& id : order) {
      const auto& path = by_id[id];
      if (path.size() < 2) continue;
      os << "<polyline fill=\"none\" stroke=\"#999\" stroke-width=\"1\" points=\"";
      for (std::size_t i = 0; i < path.size(); ++i)
        os << (i ? " " : "") << num(f.px(path[i]->x)) << ',' << num(f.py(path[i]->y));
      os << "\"/>\n";
    }
  }
  for (const auto& p : pts) {
    const auto c = colors.at(p.group);
    os << "<circle cx=\"" << num(f.px(p.x)) << "\" cy=\"" << num(f.py(p.y)) << "\" r=\"3\" fill=\"" << kPalette[c]
       << "\"><title>" << escape(p.id) << "</title></circle>\n";
    if (!p.tag.empty())
      os << "<text x=\"" << num(f.px(p.x) + 4) << "\" y=\"" << num(f.py(p.y) - 4)
         << "\" font-family=\"sans-serif\" font-size=\"9\">" << escape(p.tag) << "</text>\n";
  }
  legend(os, f, colors);
  os << "</svg>\n";
  return os.str();
}

}  // namespace polar::plot
