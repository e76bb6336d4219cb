#include "bxent/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "bxent/error.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace {

namespace fs = std::filesystem;

constexpr double kWidth = 720;
constexpr double kHeight = 520;
constexpr double kLeft = 70;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 60;

constexpr std::array<std::string_view, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                      "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
  bool inside(double y) const { return y >= y0 && y <= y1; }
};

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write report file", path.string());
  out << text;
}

}  // namespace

std::string facet_slug(std::string_view facet) {
  std::string out;
  bool dash = false;
  for (char c : facet) {
    const bool keep = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (keep) {
      if (dash && !out.empty()) out += '-';
      out += c;
      dash = false;
    } else {
      dash = true;
    }
  }
  return out.empty() ? "facet" : out;
}

std::string render_svg(const std::string& title, const std::vector<const CurveSeries*>& series) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto* s : series) {
    for (const auto& p : s->points) {
      if (!any) {
        x0 = x1 = p.x;
        y0 = y1 = p.y;
        any = true;
      }
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
    }
    for (const auto& b : s->bins) {
      y0 = std::min(y0, b.mean);
      y1 = std::max(y1, b.mean);
    }
    if (!s->fitted) {
      for (const auto& p : s->points) {
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
    }
  }
  y0 = std::min(y0, x0);
  y1 = std::max(y1, x1);
  if (x1 - x0 < 1e-9) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-9) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double ypad = 0.05 * (y1 - y0);
  const Frame f{x0, x1, y0 - ypad, y1 + ypad};

  std::ostringstream svg;
  svg << fmt::format(R"svg(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">)svg",
                     kWidth, kHeight, kWidth, kHeight)
      << '\n';
  svg << fmt::format(R"svg(<rect x="0" y="0" width="{}" height="{}" fill="white"/>)svg", kWidth, kHeight) << '\n';
  svg << fmt::format(R"svg(<text x="{:.1f}" y="22" font-size="15" text-anchor="middle">{}</text>)svg",
                     (kLeft + kWidth - kRight) / 2, xml_escape(title))
      << '\n';

  const double plot_right = kWidth - kRight;
  const double plot_bottom = kHeight - kBottom;
  svg << fmt::format(R"svg(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="none" stroke="#444"/>)svg", kLeft,
                     kTop, plot_right - kLeft, plot_bottom - kTop)
      << '\n';
  const double xs = nice_step(f.x1 - f.x0);
  for (double t = std::ceil(f.x0 / xs) * xs; t <= f.x1 + 1e-12; t += xs) {
    svg << fmt::format(R"svg(<line x1="{0:.1f}" y1="{1:.1f}" x2="{0:.1f}" y2="{2:.1f}" stroke="#444"/>)svg", f.px(t),
                       plot_bottom, plot_bottom + 5)
        << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}" text-anchor="middle">{:.2g}</text>)svg", f.px(t), plot_bottom + 18, t)
        << '\n';
  }
  const double ys = nice_step(f.y1 - f.y0);
  for (double t = std::ceil(f.y0 / ys) * ys; t <= f.y1 + 1e-12; t += ys) {
    svg << fmt::format(R"svg(<line x1="{0:.1f}" y1="{1:.1f}" x2="{2:.1f}" y2="{1:.1f}" stroke="#444"/>)svg", kLeft - 5,
                       f.py(t), kLeft)
        << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}" text-anchor="end">{:.2g}</text>)svg", kLeft - 8, f.py(t) + 4, t)
        << '\n';
  }
  svg << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}" text-anchor="middle">target entropy H (nats)</text>)svg",
                     (kLeft + plot_right) / 2, kHeight - 18)
      << '\n';
  svg << fmt::format(R"svg(<text transform="translate(18 {:.1f}) rotate(-90)" text-anchor="middle">cross-entropy CE (nats)</text>)svg",
                     (kTop + plot_bottom) / 2)
      << '\n';

  // X=Y reference, clipped to the frame.
  const double lo = std::max(f.x0, f.y0);
  const double hi = std::min(f.x1, f.y1);
  if (hi > lo) {
    svg << fmt::format(R"svg(<line x1="{:.1f}" y1="{:.1f}" x2="{:.1f}" y2="{:.1f}" stroke="#888" stroke-dasharray="6 4"/>)svg",
                       f.px(lo), f.py(lo), f.px(hi), f.py(hi))
        << '\n';
  }

  double legend_y = kTop + 10;
  svg << fmt::format(R"svg(<line x1="{0:.1f}" y1="{1:.1f}" x2="{2:.1f}" y2="{1:.1f}" stroke="#888" stroke-dasharray="6 4"/>)svg",
                     plot_right + 15, legend_y, plot_right + 40)
      << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}">X=Y</text>)svg", plot_right + 46, legend_y + 4) << '\n';

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = *series[i];
    const auto color = kPalette[i % kPalette.size()];
    if (s.fitted) {
      for (const auto& b : s.bins) {
        svg << fmt::format(R"svg(<circle cx="{:.1f}" cy="{:.1f}" r="1.8" fill="{}" fill-opacity="0.35"/>)svg", f.px(b.center),
                           f.py(b.mean), color);
      }
      svg << '\n' << fmt::format(R"svg(<polyline fill="none" stroke="{}" stroke-width="2" points=")svg", color);
      constexpr int kSamples = 120;
      for (int k = 0; k <= kSamples; ++k) {
        const double x = s.x_min + (s.x_max - s.x_min) * k / kSamples;
        const double y = std::clamp(s.fitted_at(x), f.y0, f.y1);
        svg << fmt::format("{:.1f},{:.1f} ", f.px(x), f.py(y));
      }
      svg << "\"/>\n";
      svg << fmt::format(R"svg(<line x1="{0:.1f}" y1="{1:.1f}" x2="{0:.1f}" y2="{2:.1f}" stroke="{3}" stroke-dasharray="2 3"/>)svg",
                         f.px(s.inflection.x), kTop, plot_bottom, color)
          << '\n';
    } else {
      for (const auto& p : s.points) {
        svg << fmt::format(R"svg(<circle cx="{:.1f}" cy="{:.1f}" r="2.5" fill="{}"/>)svg", f.px(p.x), f.py(p.y), color);
      }
      svg << '\n'
          << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}" fill="{}">{}: fit skipped</text>)svg", kLeft + 8,
                         kTop + 16 + 14.0 * static_cast<double>(i), color, xml_escape(s.model))
          << '\n';
    }
    legend_y += 20;
    svg << fmt::format(R"svg(<line x1="{0:.1f}" y1="{1:.1f}" x2="{2:.1f}" y2="{1:.1f}" stroke="{3}" stroke-width="2"/>)svg",
                       plot_right + 15, legend_y, plot_right + 40, color)
        << fmt::format(R"svg(<text x="{:.1f}" y="{:.1f}">{}{}</text>)svg", plot_right + 46, legend_y + 4, xml_escape(s.model),
                       s.fitted ? "" : " (fit skipped)")
        << '\n';
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<fs::path> emit_report(const FitReport& report, const fs::path& out) {
  std::vector<fs::path> written;
  auto put = [&](const fs::path& rel, const std::string& text) {
    write_file(out / rel, text);
    written.push_back(rel);
  };

  std::set<std::string> facets;
  for (const auto& [model, by_facet] : report.models) {
    for (const auto& [facet, s] : by_facet) facets.insert(facet);
  }

  std::ostringstream table_csv;
  std::ostringstream table_text;
  table_csv << "facet,rank,model,x_star,flag,mean_gap,n_points\n";
  for (const auto& facet : facets) {
    std::vector<const CurveSeries*> series;
    for (const auto& [model, by_facet] : report.models) {
      auto it = by_facet.find(facet);
      if (it != by_facet.end()) series.push_back(&it->second);
    }
    const std::string title = facet == "overall" ? "All cases" : facet;
    const auto svg = render_svg(title, series);
    put(fs::path("report") / (facet_slug(facet) + ".svg"), svg);
    if (facet == "overall") put("report.svg", svg);
    for (const auto* s : series) {
      std::ostringstream csv;
      write_curve_csv(csv, *s);
      put(fs::path("curves") / facet_slug(s->model) / (facet_slug(facet) + ".csv"), csv.str());
    }

    std::vector<ComparisonRow> rows;
    if (series.size() >= 2) {
      try {
        rows = compare_models(series);
      } catch (const ComparisonError& e) {
        table_text << facet << "\n  not compared: " << e.what() << "\n\n";
        continue;
      }
    } else {
      const auto& s = *series.front();
      double gap = 0.0;
      for (const auto& p : s.points) gap += p.y - p.x;
      rows.push_back({1, s.model, s.inflection, s.points.empty() ? 0.0 : gap / static_cast<double>(s.points.size()),
                      s.points.size()});
    }
    std::ostringstream rows_csv;
    write_comparison_csv(rows_csv, rows);
    std::string body = rows_csv.str();
    body.erase(0, body.find('\n') + 1);
    std::istringstream lines(body);
    std::string line;
    while (std::getline(lines, line)) table_csv << csv_field(facet) << ',' << line << '\n';
    write_comparison_text(table_text, facet, rows);
    table_text << '\n';
  }
  put("comparison.csv", table_csv.str());
  put("comparison.txt", table_text.str());
  return written;
}

}  // namespace bxent
