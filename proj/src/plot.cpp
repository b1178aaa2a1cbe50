#include "invlmp/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "invlmp/lp.hpp"

namespace invlmp {

std::vector<double> CsvTable::column(std::size_t j) const {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.at(j));
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr double kWidth = 720, kHeight = 440, kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string open_svg(const Frame& f, const std::string& title, const std::string& x_label, const std::string& y_label) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  const double bx = f.px(f.x0), ex = f.px(f.x1), by = f.py(f.y0), ey = f.py(f.y1);
  s << "<path d=\"M" << num(bx) << ' ' << num(ey) << " V" << num(by) << " H" << num(ex)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(by + 16) << "\" text-anchor=\"middle\">" << tick(xv)
      << "</text>\n";
    s << "<text x=\"" << num(bx - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  s << "<text x=\"" << num((bx + ex) / 2) << "\" y=\"" << num(kHeight - 18) << "\" text-anchor=\"middle\">"
    << escape(x_label) << "</text>\n";
  s << "<text x=\"16\" y=\"" << num((by + ey) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num((by + ey) / 2) << ")\">" << escape(y_label) << "</text>\n";
  return s.str();
}

std::string legend(const std::vector<std::string>& names) {
  std::ostringstream s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 14.0 * static_cast<double>(i);
    s << "<rect x=\"" << num(kWidth - kRight + 12) << "\" y=\"" << num(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
      << kColors[i % 10] << "\"/>";
    s << "<text x=\"" << num(kWidth - kRight + 26) << "\" y=\"" << num(y + 1) << "\">" << escape(names[i])
      << "</text>\n";
  }
  return s.str();
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      for (auto& c : cells) t.header.push_back(trim(c));
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw InputError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      const std::string v = trim(c);
      std::size_t used = 0;
      double d = 0.0;
      try {
        d = std::stod(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (v.empty() || used != v.size()) {
        throw InputError("csv line " + std::to_string(line_no) + ": non-numeric cell '" + v + "'");
      }
      row.push_back(d);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw InputError("csv: empty file");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string svg_line_chart(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw InputError("series " + s.name + ": x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = x1 = y0 = y1 = 0.0;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};
  std::ostringstream s;
  s << open_svg(f, title, x_label, y_label);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    names.push_back(series[k].name);
    s << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kColors[k % 10] << "\" points=\"";
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      if (!std::isfinite(series[k].x[i]) || !std::isfinite(series[k].y[i])) continue;
      s << num(f.px(series[k].x[i])) << ',' << num(f.py(series[k].y[i])) << ' ';
    }
    s << "\"/>\n";
  }
  s << legend(names) << "</svg>\n";
  return s.str();
}

std::string svg_histogram(const std::vector<double>& edges, const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& counts, const std::string& title,
                          const std::string& x_label) {
  if (edges.size() < 2) throw InputError("histogram: need at least one bin");
  double top = 0.0;
  for (const auto& c : counts) {
    if (c.size() + 1 != edges.size()) throw InputError("histogram: counts do not match the bins");
    for (double v : c) top = std::max(top, v);
  }
  const Frame f{edges.front(), edges.back(), 0.0, top > 0.0 ? top : 1.0};
  std::ostringstream s;
  s << open_svg(f, title, x_label, "count");
  const double share = counts.empty() ? 1.0 : 1.0 / static_cast<double>(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      if (counts[k][b] <= 0.0) continue;
      const double w = edges[b + 1] - edges[b];
      const double left = f.px(edges[b] + w * share * static_cast<double>(k));
      const double right = f.px(edges[b] + w * share * static_cast<double>(k + 1));
      s << "<rect x=\"" << num(left) << "\" y=\"" << num(f.py(counts[k][b])) << "\" width=\""
        << num(std::max(right - left, 0.5)) << "\" height=\"" << num(f.py(0.0) - f.py(counts[k][b]))
        << "\" fill=\"" << kColors[k % 10] << "\"/>\n";
    }
  }
  s << legend(names) << "</svg>\n";
  return s.str();
}

std::string svg_from_csv(const CsvTable& t, const std::string& title) {
  if (t.header.size() < 2) throw InputError("csv: need at least two columns to plot");
  if (t.header.size() >= 3 && t.header[0] == "bin_lo" && t.header[1] == "bin_hi") {
    std::vector<double> edges;
    for (const auto& r : t.rows) edges.push_back(r[0]);
    if (!t.rows.empty()) edges.push_back(t.rows.back()[1]);
    std::vector<std::string> names(t.header.begin() + 2, t.header.end());
    std::vector<std::vector<double>> counts;
    for (std::size_t j = 2; j < t.header.size(); ++j) counts.push_back(t.column(j));
    return svg_histogram(edges, names, counts, title, "bin");
  }
  std::vector<Series> series;
  const auto x = t.column(0);
  for (std::size_t j = 1; j < t.header.size(); ++j) series.push_back({t.header[j], x, t.column(j)});
  return svg_line_chart(series, title, t.header[0], "value");
}

}  // namespace invlmp
