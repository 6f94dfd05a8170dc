#include "histsem/adapter.hpp"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "histsem/digest.hpp"
#include "histsem/encoder.hpp"
#include "histsem/error.hpp"
#include "json.hpp"

namespace histsem {
namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "histsem-adapter-XXXXXX").string();
    if (mkdtemp(pattern.data()) == nullptr) throw IoError("cannot create a temporary directory");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace

ExternalAdapter::ExternalAdapter(std::string command, std::string encoder_id)
    : command_(std::move(command)), id_(std::move(encoder_id)) {
  if (command_.empty()) throw InputError("adapter command must not be empty");
  if (id_.empty()) id_ = "external:" + sha256_hex(command_).substr(0, 16);
}

std::string ExternalAdapter::request_line(const Usage& usage) {
  const nlohmann::json j = {{"usage_id", usage.usage_id}, {"tokens", usage.tokens}, {"focus_index", usage.focus_index}};
  return j.dump();
}

std::pair<std::string, std::vector<Eigen::VectorXd>> ExternalAdapter::parse_response_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    std::vector<Eigen::VectorXd> layers;
    for (const auto& layer : j.at("layers")) {
      const auto values = layer.get<std::vector<double>>();
      layers.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    if (layers.empty()) throw InputError("adapter response without layers");
    return {j.at("usage_id").get<std::string>(), std::move(layers)};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed adapter response: ") + e.what());
  }
}

std::vector<EmbeddingRecord> ExternalAdapter::extract(std::span<const Usage> usages, std::size_t last_k) const {
  std::set<std::string_view> ids;
  for (const auto& u : usages) {
    if (!ids.insert(u.usage_id).second) throw InputError("duplicate usage id: " + u.usage_id);
  }
  if (usages.empty()) return {};

  TempDir dir;
  const auto request = dir.path() / "request.jsonl";
  const auto response = dir.path() / "response.jsonl";
  {
    std::ofstream out(request, std::ios::binary);
    for (const auto& u : usages) out << request_line(u) << '\n';
    if (!out) throw IoError("cannot write adapter request");
  }
  const std::string cmd = "(" + command_ + ") < " + shell_quote(request.string()) + " > " + shell_quote(response.string());
  const int status = std::system(cmd.c_str());
  if (status != 0) throw IoError("adapter command failed with status " + std::to_string(status));

  std::map<std::string, std::vector<Eigen::VectorXd>> layers_by_id;
  std::ifstream in(response, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto [id, layers] = parse_response_line(line);
    layers_by_id[id] = std::move(layers);
  }

  std::vector<EmbeddingRecord> records;
  records.reserve(usages.size());
  for (const auto& u : usages) {
    const auto it = layers_by_id.find(u.usage_id);
    if (it == layers_by_id.end()) throw MismatchError("adapter returned no vectors for usage " + u.usage_id);
    const Eigen::VectorXd v = sum_last_layers(it->second, last_k);
    if (!v.allFinite()) throw InputError("usage " + u.usage_id + ": non-finite adapter vector");
    records.push_back(EmbeddingRecord{u.word, u.usage_id, u.decade, std::vector<double>(v.data(), v.data() + v.size()), id_});
  }
  return records;
}

}  // namespace histsem
