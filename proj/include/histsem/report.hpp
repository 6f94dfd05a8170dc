#ifndef HISTSEM_REPORT_HPP_
#define HISTSEM_REPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace histsem {

// Reproducibility stamp written into every output file.
struct RunMeta {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<std::pair<std::string, std::string>> inputs;  // (name, sha256)

  nlohmann::json to_json() const;
  // "# key: value" lines.
  std::string comment_block(std::string_view prefix = "# ") const;
};

// Fixed-point with `precision` decimals; negative zero prints as zero.
std::string format_fixed(double value, int precision);

// One row of the per-word correlation table: "word\trho\tp".
std::string format_correlation_row(std::string_view word, double rho, double p);

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;
  int series = 0;
};

// Static SVG scatter plot with text labels. The output depends only on the
// arguments.
std::string render_scatter_svg(const std::vector<ScatterPoint>& points, std::string_view title,
                               const std::vector<std::string>& series_names, const RunMeta& meta);

}  // namespace histsem

#endif  // HISTSEM_REPORT_HPP_
