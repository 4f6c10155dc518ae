#pragma once

// CSV tables and a minimal deterministic SVG line renderer for summaries.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "erw/error.hpp"
#include "erw/observables.hpp"
#include "erw/summary.hpp"

namespace erw {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool step = false;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    char buf[32];
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g", r[i]);
        out += (i ? "," : "") + std::string(buf);
      }
      out += "\n";
    }
    return out;
  }
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  Table table;
};

inline const CheckpointSummary& checkpoint_at(const EnsembleSummary& s, double t) {
  ERW_REQUIRE(ConfigError, !s.per_checkpoint.empty(), "summary has no checkpoints");
  const auto it = std::min_element(s.per_checkpoint.begin(), s.per_checkpoint.end(),
                                   [t](const auto& a, const auto& b) {
                                     return std::fabs(a.t - t) < std::fabs(b.t - t);
                                   });
  return *it;
}

/// ECDF of log G(n^t)/log n_base against t * arcsine, one row per sample.
inline Plot arcsine_plot(const EnsembleSummary& s, const std::filesystem::path& dir, double t,
                         bool zeros = false) {
  const auto& c = checkpoint_at(s, t);
  const auto& ref = zeros ? c.z_ecdf_ref : c.g_ecdf_ref;
  ERW_REQUIRE(ConfigError, ref.has_value(), "summary carries no sidecar columns");
  ERW_REQUIRE(ConfigError, c.t > 0.0, "reference law is degenerate at t = 0");
  const auto v = load_column(dir, *ref);
  Plot p;
  p.title = std::string(zeros ? "log Z" : "log G") + "(n^t) / log n, t = " + std::to_string(c.t);
  p.x_label = "x";
  p.y_label = "F(x)";
  p.table.header = {"x", "ecdf", "reference"};
  Series emp{"empirical", {}, {}, true};
  Series th{"reference", {}, {}, false};
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    const double f = zeros ? arcsine_cdf_half(v[i] / c.t) : arcsine_cdf(v[i] / c.t);
    p.table.rows.push_back({v[i], static_cast<double>(i + 1) / n, f});
    emp.x.push_back(v[i]);
    emp.y.push_back(static_cast<double>(i + 1) / n);
  }
  for (int k = 0; k <= 200; ++k) {
    const double x = c.t * k / 200.0 * (zeros ? 0.5 : 1.0);
    th.x.push_back(x);
    th.y.push_back(zeros ? arcsine_cdf_half(x / c.t) : arcsine_cdf(x / c.t));
  }
  p.series = {emp, th};
  return p;
}

inline Plot tail_plot(const EnsembleSummary& s) {
  Plot p;
  p.title = "P(R > n)";
  p.x_label = "log10 n";
  p.y_label = "probability";
  p.table.header = {"n", "p_hat", "ci_low", "ci_high", "theory"};
  Series est{"p_hat", {}, {}, false}, lo{"ci_low", {}, {}, false}, hi{"ci_high", {}, {}, false},
      th{"theory", {}, {}, false};
  for (const auto& c : s.per_checkpoint) {
    if (!c.tail) continue;
    const auto& t = *c.tail;
    p.table.rows.push_back({static_cast<double>(t.n), t.p_hat, t.ci_low, t.ci_high, t.theory});
    const double x = std::log10(static_cast<double>(t.n));
    for (auto* sr : {&est, &lo, &hi, &th}) sr->x.push_back(x);
    est.y.push_back(t.p_hat);
    lo.y.push_back(t.ci_low);
    hi.y.push_back(t.ci_high);
    th.y.push_back(t.theory);
  }
  ERW_REQUIRE(ConfigError, !p.table.rows.empty(), "summary has no tail estimates");
  p.series = {est, lo, hi, th};
  return p;
}

inline Plot t_minus_a_plot(const EnsembleSummary& s, const std::filesystem::path& dir, int bins = 40) {
  ERW_REQUIRE(ConfigError, s.embedding && s.embedding->t_minus_a_ref,
              "summary carries no T_n - A_n column");
  const auto v = load_column(dir, *s.embedding->t_minus_a_ref);
  ERW_REQUIRE(ConfigError, !v.empty(), "empty T_n - A_n column");
  const double lo = v.front();
  const double hi = v.back() > lo ? v.back() : lo + 1.0;
  const double w = (hi - lo) / bins;
  std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
  for (double x : v)
    ++count[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>((x - lo) / w)))];
  Plot p;
  p.title = "T_n - A_n, n = " + std::to_string(s.embedding->n);
  p.x_label = "T_n - A_n";
  p.y_label = "count";
  p.table.header = {"bin_low", "bin_high", "count"};
  Series h{"histogram", {}, {}, true};
  for (int b = 0; b < bins; ++b) {
    p.table.rows.push_back({lo + b * w, lo + (b + 1) * w, count[static_cast<std::size_t>(b)]});
    h.x.push_back(lo + b * w);
    h.y.push_back(count[static_cast<std::size_t>(b)]);
  }
  h.x.push_back(hi);
  h.y.push_back(count.back());
  p.series = {h};
  return p;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string render_svg(const Plot& p) {
  constexpr double W = 640, H = 420, L = 60, R = 20, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  char buf[256];
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\">\n";
  out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n",
                svg_escape(p.title).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n"
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n",
                L, H - B, W - R, H - B, L, H - B, L, T);
  out += buf;
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-size=\"10\">%.3g</text>\n"
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\" font-size=\"10\">%.3g</text>\n",
                  px(xv), H - B + 14, xv, L - 4, py(yv) + 3, yv);
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-size=\"12\">%s</text>\n"
                "<text x=\"14\" y=\"%.2f\" font-size=\"12\" transform=\"rotate(-90 14 %.2f)\" "
                "text-anchor=\"middle\">%s</text>\n",
                (L + W - R) / 2, H - 12, svg_escape(p.x_label).c_str(), (T + H - B) / 2,
                (T + H - B) / 2, svg_escape(p.y_label).c_str());
  out += buf;
  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.step && i > 0) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i - 1]));
        pts += buf;
      }
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
      pts += buf;
    }
    if (!pts.empty()) pts.pop_back();
    out += "<polyline fill=\"none\" stroke=\"" + std::string(colors[k % 5]) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" fill=\"%s\">%s</text>\n", W - R - 120,
                  T + 14.0 * static_cast<double>(k + 1), colors[k % 5], svg_escape(s.label).c_str());
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace erw
