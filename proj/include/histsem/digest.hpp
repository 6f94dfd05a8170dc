#ifndef HISTSEM_DIGEST_HPP_
#define HISTSEM_DIGEST_HPP_

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace histsem {

// Incremental SHA-256, hex output.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace histsem

#endif  // HISTSEM_DIGEST_HPP_
