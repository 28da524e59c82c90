#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "btvalid/error.hpp"
#include "btvalid/report.hpp"

namespace btvalid::report {

namespace fs = std::filesystem;

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
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

// Reference to the table cell a mark depicts.
struct CellRef {
  std::string table, row, col, value;
};

class Svg {
 public:
  Svg(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, std::string_view fill, const CellRef* ref = nullptr) {
    body_ << fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}"{}/>)", x, y,
                         std::max(0.0, w), std::max(0.0, h), fill, attrs(ref))
          << '\n';
  }
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            const CellRef* ref = nullptr, std::string_view dash = {}) {
    body_ << fmt::format(R"(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="{}" stroke-width="{:.1f}"{}{}/>)",
                         x1, y1, x2, y2, stroke, width,
                         dash.empty() ? std::string() : fmt::format(R"( stroke-dasharray="{}")", dash), attrs(ref))
          << '\n';
  }
  void circle(double cx, double cy, double r, std::string_view fill, const CellRef* ref = nullptr) {
    body_ << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="{:.1f}" fill="{}"{}/>)", cx, cy, r, fill, attrs(ref))
          << '\n';
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke,
                std::string_view dash = {}) {
    std::string p;
    for (const auto& [x, y] : pts) p += fmt::format("{:.2f},{:.2f} ", x, y);
    body_ << fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{}/>)", p, stroke,
                         dash.empty() ? std::string() : fmt::format(R"( stroke-dasharray="{}")", dash))
          << '\n';
  }
  void text(double x, double y, std::string_view s, std::string_view anchor = "middle", double size = 11,
            std::string_view fill = "#222", const CellRef* ref = nullptr) {
    body_ << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-size="{:.0f}" text-anchor="{}" fill="{}"{}>{}</text>)", x,
                         y, size, anchor, fill, attrs(ref), xml_escape(s))
          << '\n';
  }

  std::string str() const {
    return fmt::format(
               R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}" viewBox="0 0 {:.0f} {:.0f}" font-family="sans-serif">)",
               width_, height_, width_, height_) +
           "\n" + fmt::format(R"(<rect width="100%" height="100%" fill="white"/>)") + "\n" + body_.str() +
           "</svg>\n";
  }

 private:
  static std::string attrs(const CellRef* ref) {
    if (!ref) return {};
    return fmt::format(R"( data-table="{}" data-row="{}" data-col="{}" data-value="{}")", xml_escape(ref->table),
                       xml_escape(ref->row), xml_escape(ref->col), xml_escape(ref->value));
  }

  double width_, height_;
  std::ostringstream body_;
};

bool is_null(const std::optional<std::string>& v) { return !v || *v == kNull; }
double num(const std::string& s) { return std::stod(s); }

constexpr const char* kVariantColors[] = {"#4c72b0", "#dd8452", "#55a868"};
constexpr const char* kVariantNames[] = {"original", "pivot", "back"};

struct Frame {
  double left = 70, right = 20, top = 40, bottom = 70, width = 640, height = 400;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y(double v, double vmax) const { return top + plot_h() * (1.0 - v / vmax); }
};

void axes(Svg& svg, const Frame& f, double vmax, std::string_view title, std::string_view ylabel, int ticks = 5) {
  svg.text(f.width / 2, 22, title, "middle", 14);
  svg.line(f.left, f.top, f.left, f.top + f.plot_h(), "#333");
  svg.line(f.left, f.top + f.plot_h(), f.left + f.plot_w(), f.top + f.plot_h(), "#333");
  for (int i = 0; i <= ticks; ++i) {
    const double v = vmax * i / ticks;
    const double y = f.y(v, vmax);
    svg.line(f.left - 4, y, f.left, y, "#333");
    svg.text(f.left - 8, y + 4, fmt::format("{:.2f}", v), "end", 10);
  }
  svg.text(16, f.top + f.plot_h() / 2, ylabel, "middle", 11);
}

std::vector<std::string> sentiment_langs(const Table& t) {
  std::vector<std::string> out;
  for (const auto& row : t.rows)
    if (row[0] != "pooled") out.push_back(row[0]);
  return out;
}

void bar_with_interval(Svg& svg, const Frame& f, const Table& t, const std::string& row, int variant, double x,
                       double w) {
  const std::string v = kVariantNames[variant];
  auto med = t.cell(row, v + "_median");
  if (is_null(med)) return;
  CellRef ref{"sentiment", row, v + "_median", *med};
  const double y = f.y(num(*med), 1.0);
  svg.rect(x, y, w, f.top + f.plot_h() - y, kVariantColors[variant], &ref);
  auto lo = t.cell(row, v + "_hci99_low"), hi = t.cell(row, v + "_hci99_high");
  if (!is_null(lo) && !is_null(hi)) {
    CellRef rl{"sentiment", row, v + "_hci99_low", *lo}, rh{"sentiment", row, v + "_hci99_high", *hi};
    const double cx = x + w / 2;
    svg.line(cx, f.y(num(*lo), 1.0), cx, f.y(num(*hi), 1.0), "#111", 1.5);
    svg.line(cx - w / 4, f.y(num(*lo), 1.0), cx + w / 4, f.y(num(*lo), 1.0), "#111", 1.5, &rl);
    svg.line(cx - w / 4, f.y(num(*hi), 1.0), cx + w / 4, f.y(num(*hi), 1.0), "#111", 1.5, &rh);
  }
}

void legend(Svg& svg, double x, double y) {
  for (int v = 0; v < 3; ++v) {
    svg.rect(x, y + v * 16, 10, 10, kVariantColors[v]);
    svg.text(x + 14, y + v * 16 + 9, kVariantNames[v], "start", 10);
  }
}

std::string pooled_sentiment_svg(const Table& t) {
  Frame f;
  Svg svg(f.width, f.height);
  axes(svg, f, 1.0, "Median sentiment accuracy, all languages pooled", "accuracy");
  const double slot = f.plot_w() / 3;
  for (int v = 0; v < 3; ++v) {
    const double x = f.left + slot * v + slot * 0.2;
    bar_with_interval(svg, f, t, "pooled", v, x, slot * 0.6);
    svg.text(f.left + slot * v + slot / 2, f.top + f.plot_h() + 18, kVariantNames[v]);
  }
  return svg.str();
}

std::string language_sentiment_svg(const Table& t) {
  const auto langs = sentiment_langs(t);
  Frame f;
  f.width = std::max(640.0, 90.0 + 60.0 * static_cast<double>(langs.size()));
  Svg svg(f.width, f.height);
  axes(svg, f, 1.0, "Sentiment accuracy by language: original, pivot, backtranslated", "accuracy");
  const double slot = f.plot_w() / std::max<std::size_t>(1, langs.size());
  for (std::size_t i = 0; i < langs.size(); ++i) {
    const double x0 = f.left + slot * static_cast<double>(i) + slot * 0.1;
    const double w = slot * 0.8 / 3;
    for (int v = 0; v < 3; ++v) bar_with_interval(svg, f, t, langs[i], v, x0 + w * v, w);
    svg.text(f.left + slot * (static_cast<double>(i) + 0.5), f.top + f.plot_h() + 18, langs[i]);
  }
  legend(svg, f.width - f.right - 80, f.top);
  return svg.str();
}

std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(247 - v * (247 - 8));
  const int g = static_cast<int>(251 - v * (251 - 48));
  const int b = static_cast<int>(255 - v * (255 - 107));
  return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
}

std::string topics_heatmap_svg(const Table& t) {
  std::vector<std::string> langs;
  std::vector<std::string> ks;
  for (const auto& row : t.rows) {
    if (row[1] == "all" || row[2] == kNull) continue;
    if (std::find(langs.begin(), langs.end(), row[1]) == langs.end()) langs.push_back(row[1]);
    if (std::find(ks.begin(), ks.end(), row[2]) == ks.end()) ks.push_back(row[2]);
  }
  const double cell_w = 64, cell_h = 34, left = 60, top = 50;
  Svg svg(left + cell_w * static_cast<double>(ks.size()) + 20, top + cell_h * static_cast<double>(langs.size()) + 40);
  svg.text(left + cell_w * static_cast<double>(ks.size()) / 2, 22,
           "Backtranslated texts kept in their original cluster (null in white)", "middle", 13);
  for (std::size_t c = 0; c < ks.size(); ++c)
    svg.text(left + cell_w * (static_cast<double>(c) + 0.5), top - 8, "K=" + ks[c], "middle", 10);
  for (std::size_t r = 0; r < langs.size(); ++r) {
    const double y = top + cell_h * static_cast<double>(r);
    svg.text(left - 8, y + cell_h / 2 + 4, langs[r], "end", 11);
    for (std::size_t c = 0; c < ks.size(); ++c) {
      const std::string key = langs[r] + "@" + ks[c];
      auto rate = t.cell(key, "match_rate");
      auto null = t.cell(key, "null_mean");
      const double x = left + cell_w * static_cast<double>(c);
      if (is_null(rate)) {
        svg.rect(x, y, cell_w - 2, cell_h - 2, "#dddddd");
        continue;
      }
      CellRef rr{"topics", key, "match_rate", *rate};
      svg.rect(x, y, cell_w - 2, cell_h - 2, heat_color(num(*rate)), &rr);
      svg.text(x + cell_w / 2, y + 14, *rate, "middle", 10, num(*rate) > 0.55 ? "#ffffff" : "#111111");
      if (!is_null(null)) {
        CellRef rn{"topics", key, "null_mean", *null};
        svg.text(x + cell_w / 2, y + 27, *null, "middle", 9, "#ffffff", &rn);
      }
    }
  }
  return svg.str();
}

std::string topics_by_k_svg(const Table& t) {
  std::vector<std::string> ks;
  for (const auto& row : t.rows)
    if (row[1] == "all") ks.push_back(row[2]);
  Frame f;
  Svg svg(f.width, f.height);
  axes(svg, f, 1.0, "Cluster match rate by number of clusters (dashed: permutation null)", "match rate");
  const double slot = f.plot_w() / std::max<std::size_t>(1, ks.size());
  std::vector<std::pair<double, double>> match_pts, null_pts;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const std::string key = "all@" + ks[i];
    const double x = f.left + slot * (static_cast<double>(i) + 0.5);
    auto rate = t.cell(key, "match_rate");
    auto null = t.cell(key, "null_mean");
    if (!is_null(rate)) {
      CellRef r{"topics", key, "match_rate", *rate};
      match_pts.emplace_back(x, f.y(num(*rate), 1.0));
      svg.circle(x, f.y(num(*rate), 1.0), 4, "#4c72b0", &r);
    }
    if (!is_null(null)) {
      CellRef r{"topics", key, "null_mean", *null};
      null_pts.emplace_back(x, f.y(num(*null), 1.0));
      svg.circle(x, f.y(num(*null), 1.0), 3, "#888888", &r);
    }
    svg.text(x, f.top + f.plot_h() + 18, ks[i]);
  }
  svg.polyline(match_pts, "#4c72b0");
  svg.polyline(null_pts, "#888888", "6,4");
  svg.text(f.left + f.plot_w() / 2, f.height - 20, "clusters (K)");
  return svg.str();
}

std::string embedding_svg(const Table& t) {
  std::vector<std::string> langs;
  double vmax = 0.0;
  for (const auto& row : t.rows) {
    if (row[1] == kNull) continue;
    langs.push_back(row[0]);
    for (std::size_t c = 1; c <= 3; ++c) vmax = std::max(vmax, num(row[c]));
  }
  vmax = vmax > 0.0 ? vmax * 1.15 : 1.0;
  Frame f;
  f.width = std::max(640.0, 90.0 + 50.0 * static_cast<double>(langs.size()));
  Svg svg(f.width, f.height);
  axes(svg, f, vmax, "Original-to-backtranslation distance (black: mean baseline, blue: minimum baseline)",
       "cosine distance");
  const double slot = f.plot_w() / std::max<std::size_t>(1, langs.size());
  for (std::size_t i = 0; i < langs.size(); ++i) {
    const auto& lang = langs[i];
    const double x = f.left + slot * static_cast<double>(i);
    const std::string d = *t.cell(lang, "mean_back_distance");
    const std::string mn = *t.cell(lang, "min_baseline");
    const std::string me = *t.cell(lang, "mean_baseline");
    CellRef rd{"embedding", lang, "mean_back_distance", d}, rmin{"embedding", lang, "min_baseline", mn},
        rmean{"embedding", lang, "mean_baseline", me};
    const double y = f.y(num(d), vmax);
    svg.rect(x + slot * 0.2, y, slot * 0.6, f.top + f.plot_h() - y, "#8172b3", &rd);
    svg.line(x + slot * 0.1, f.y(num(me), vmax), x + slot * 0.9, f.y(num(me), vmax), "#000000", 2.5, &rmean);
    svg.line(x + slot * 0.1, f.y(num(mn), vmax), x + slot * 0.9, f.y(num(mn), vmax), "#1f77b4", 2.5, &rmin);
    svg.text(x + slot / 2, f.top + f.plot_h() + 18, lang);
  }
  return svg.str();
}

}  // namespace

std::vector<fs::path> emit_plots(const ValidationReport& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto write = [&](const std::string& name, const std::string& svg) {
    const fs::path p = out_dir / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    out << svg;
    written.push_back(p);
  };
  if (r.sentiment) {
    const Table t = sentiment_table(r);
    write("sentiment_pooled.svg", pooled_sentiment_svg(t));
    write("sentiment_by_language.svg", language_sentiment_svg(t));
  } else {
    spdlog::info("no sentiment section: sentiment plots skipped");
  }
  if (r.topics) {
    const Table t = topics_table(r);
    write("topics_heatmap.svg", topics_heatmap_svg(t));
    write("topics_by_k.svg", topics_by_k_svg(t));
  } else {
    spdlog::info("no topics section: topic plots skipped");
  }
  if (r.embedding) {
    write("embedding_distances.svg", embedding_svg(embedding_table(r)));
  } else {
    spdlog::info("no embedding section: embedding plot skipped");
  }
  return written;
}

}  // namespace btvalid::report
