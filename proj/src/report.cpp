#include "histsem/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "histsem/error.hpp"

namespace histsem {
namespace {

std::string xml_escape(std::string_view s) {
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

// "--" may not appear inside an XML comment.
std::string comment_safe(std::string s) {
  for (std::size_t p = s.find("--"); p != std::string::npos; p = s.find("--", p)) s.replace(p, 2, "- -");
  return s;
}

constexpr std::array<const char*, 4> kSeriesColors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

}  // namespace

nlohmann::json RunMeta::to_json() const {
  nlohmann::json in = nlohmann::json::object();
  for (const auto& [name, digest] : inputs) in[name] = digest;
  return {{"command", command}, {"seed", seed}, {"config_digest", config_digest}, {"inputs", in}};
}

std::string RunMeta::comment_block(std::string_view prefix) const {
  std::ostringstream out;
  out << prefix << "command: " << command << '\n';
  out << prefix << "seed: " << seed << '\n';
  out << prefix << "config_digest: " << config_digest << '\n';
  for (const auto& [name, digest] : inputs) out << prefix << "input " << name << ": " << digest << '\n';
  return out.str();
}

std::string format_fixed(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  std::string s(buf);
  if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string format_correlation_row(std::string_view word, double rho, double p) {
  return std::string(word) + '\t' + format_fixed(rho, 4) + '\t' + format_fixed(p, 4);
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string render_scatter_svg(const std::vector<ScatterPoint>& points, std::string_view title,
                               const std::vector<std::string>& series_names, const RunMeta& meta) {
  constexpr double kWidth = 640, kHeight = 480, kMargin = 48;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points.front().x;
    ymin = ymax = points.front().y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
  auto sx = [&](double x) { return kMargin + (x - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin); };
  auto sy = [&](double y) { return kHeight - kMargin - (y - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<!--\n" << comment_safe(meta.comment_block("")) << "-->\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n";
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"#888\"/>\n";
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\"" << kHeight - kMargin
      << "\" stroke=\"#888\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">PC1</text>\n";
  svg << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\""
      << " transform=\"rotate(-90 14 " << kHeight / 2 << ")\">PC2</text>\n";
  for (std::size_t s = 0; s < series_names.size(); ++s) {
    const char* color = kSeriesColors[s % kSeriesColors.size()];
    const double ly = kMargin + 14.0 * static_cast<double>(s);
    svg << "<circle cx=\"" << format_fixed(kWidth - kMargin - 90, 2) << "\" cy=\"" << format_fixed(ly, 2)
        << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << format_fixed(kWidth - kMargin - 80, 2) << "\" y=\"" << format_fixed(ly + 4, 2)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(series_names[s]) << "</text>\n";
  }
  for (const auto& p : points) {
    const char* color = kSeriesColors[static_cast<std::size_t>(std::max(0, p.series)) % kSeriesColors.size()];
    const std::string cx = format_fixed(sx(p.x), 2);
    const std::string cy = format_fixed(sy(p.y), 2);
    svg << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << format_fixed(sx(p.x) + 6, 2) << "\" y=\"" << format_fixed(sy(p.y) - 6, 2)
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(p.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace histsem
