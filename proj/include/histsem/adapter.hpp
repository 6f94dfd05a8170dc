#ifndef HISTSEM_ADAPTER_HPP_
#define HISTSEM_ADAPTER_HPP_

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histsem/types.hpp"

namespace histsem {

// Slot for an external pre-trained encoder run as a subprocess.
//
// The command reads JSON Lines from stdin, one request per usage:
//   {"usage_id": "...", "tokens": ["..."], "focus_index": 3}
// and writes JSON Lines to stdout, one response per usage (any order):
//   {"usage_id": "...", "layers": [[...], [...], ...]}
// where layers[l] is the focus word's vector in hidden layer l (bottom to
// top, already pooled over its subwords).
class ExternalAdapter {
 public:
  explicit ExternalAdapter(std::string command, std::string encoder_id = {});

  const std::string& command() const { return command_; }
  const std::string& id() const { return id_; }

  // Sums the top last_k layers of each response. Throws IoError when the
  // command fails and MismatchError when a usage is missing from the output.
  std::vector<EmbeddingRecord> extract(std::span<const Usage> usages, std::size_t last_k = 4) const;

  static std::string request_line(const Usage& usage);
  static std::pair<std::string, std::vector<Eigen::VectorXd>> parse_response_line(std::string_view line);

 private:
  std::string command_;
  std::string id_;
};

}  // namespace histsem

#endif  // HISTSEM_ADAPTER_HPP_
