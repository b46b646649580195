#include "mimicgait/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace mimicgait {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMargin = 60;

const char* colour(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return palette[i % 8];
}

std::string label_of(const EvalReport& r) {
  const std::string method = r.model_ids.empty() ? "model" : r.model_ids.front();
  return method + " / " + r.scenario.name;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// Plot frame with a [0, 1] y axis; x mapping is left to the caller.
struct Canvas {
  std::ostringstream svg;

  explicit Canvas(const std::string& title, const std::string& x_label, const std::string& y_label) {
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">" << escape(x_label)
        << "</text>\n"
        << "<text x=\"14\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 14 " << kHeight / 2
        << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = i / 4.0;
      svg << "<line x1=\"" << kMargin << "\" x2=\"" << kWidth - kMargin << "\" y1=\"" << y(v) << "\" y2=\"" << y(v)
          << "\" stroke=\"#ddd\"/>\n"
          << "<text x=\"" << kMargin - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    }
  }

  static double y(double v) { return kHeight - kMargin - std::clamp(v, 0.0, 1.0) * (kHeight - 2 * kMargin); }
  static double x(double t) { return kMargin + t * (kWidth - 2 * kMargin); }

  void legend(std::size_t i, const std::string& text) {
    svg << "<rect x=\"" << kWidth - kMargin - 150 << "\" y=\"" << 30 + 14 * i << "\" width=\"10\" height=\"10\" fill=\""
        << colour(i) << "\"/><text x=\"" << kWidth - kMargin - 136 << "\" y=\"" << 39 + 14 * i << "\">" << escape(text)
        << "</text>\n";
  }

  std::string finish() {
    svg << "</svg>\n";
    return svg.str();
  }
};

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw ValidationError("cannot write " + file.string());
  os << text;
}

}  // namespace

std::string rank_curve_svg(const std::vector<EvalReport>& reports) {
  Canvas c("Rank-K accuracy", "K", "accuracy");
  int k_max = 1;
  for (const auto& r : reports) {
    if (!r.rank_k.empty()) k_max = std::max(k_max, r.rank_k.rbegin()->first);
  }
  auto xk = [&](int k) { return Canvas::x(k_max == 1 ? 0.0 : (k - 1.0) / (k_max - 1.0)); };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    c.svg << "<polyline fill=\"none\" stroke=\"" << colour(i) << "\" stroke-width=\"2\" points=\"";
    for (const auto& [k, v] : reports[i].rank_k) c.svg << xk(k) << ',' << Canvas::y(v) << ' ';
    c.svg << "\"/>\n";
    c.legend(i, label_of(reports[i]));
  }
  for (const auto& [k, v] : reports.empty() ? std::map<int, double>{} : reports.front().rank_k) {
    c.svg << "<text x=\"" << xk(k) << "\" y=\"" << kHeight - kMargin + 14 << "\" text-anchor=\"middle\">" << k
          << "</text>\n";
  }
  return c.finish();
}

std::string rp_bar_svg(const std::vector<EvalReport>& reports) {
  Canvas c("Relative performance (Rank-1)", "method / scenario", "RP");
  std::vector<const EvalReport*> with_rp;
  for (const auto& r : reports) {
    if (r.rp.count("rank1")) with_rp.push_back(&r);
  }
  const double slot = with_rp.empty() ? 1.0 : 1.0 / static_cast<double>(with_rp.size());
  for (std::size_t i = 0; i < with_rp.size(); ++i) {
    const double v = with_rp[i]->rp.at("rank1");
    const double x0 = Canvas::x(slot * (static_cast<double>(i) + 0.15));
    const double w = Canvas::x(slot * 0.7) - Canvas::x(0.0);
    c.svg << "<rect x=\"" << x0 << "\" y=\"" << Canvas::y(v) << "\" width=\"" << w << "\" height=\""
          << Canvas::y(0.0) - Canvas::y(v) << "\" fill=\"" << colour(i) << "\"/>\n";
    c.legend(i, label_of(*with_rp[i]));
  }
  return c.finish();
}

std::string range_sweep_svg(const std::vector<EvalReport>& reports) {
  std::map<std::string, std::vector<std::pair<double, double>>> lines;
  for (const auto& r : reports) {
    if (!r.scenario.amount_range_override || !r.rank_k.count(1)) continue;
    const auto& a = *r.scenario.amount_range_override;
    lines[r.model_ids.empty() ? "model" : r.model_ids.front()].emplace_back(0.5 * (a.lo + a.hi), r.rank_k.at(1));
  }
  if (lines.empty()) return {};
  Canvas c("Rank-1 against occlusion amount", "amount range midpoint", "Rank-1");
  std::size_t i = 0;
  for (auto& [method, points] : lines) {
    std::sort(points.begin(), points.end());
    c.svg << "<polyline fill=\"none\" stroke=\"" << colour(i) << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, v] : points) c.svg << Canvas::x(x) << ',' << Canvas::y(v) << ' ';
    c.svg << "\"/>\n";
    for (const auto& [x, v] : points) {
      c.svg << "<text x=\"" << Canvas::x(x) << "\" y=\"" << kHeight - kMargin + 14 << "\" text-anchor=\"middle\">"
            << x << "</text>\n";
    }
    c.legend(i++, method);
  }
  return c.finish();
}

std::vector<std::filesystem::path> render_report(const std::vector<EvalReport>& reports,
                                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    if (text.empty()) return;
    write_text(out_dir / name, text);
    written.push_back(out_dir / name);
  };
  emit("comparison.csv", comparison_csv(reports));
  emit("rank_k.svg", rank_curve_svg(reports));
  emit("rp.svg", rp_bar_svg(reports));
  emit("range_sweep.svg", range_sweep_svg(reports));
  return written;
}

std::vector<EvalReport> load_reports(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidationError("cannot open report " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("report " + file.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("reports")) j = j.at("reports");
  if (j.is_array()) return j.get<std::vector<EvalReport>>();
  return {j.get<EvalReport>()};
}

}  // namespace mimicgait
