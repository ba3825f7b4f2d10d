#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harbench {

/// Incremental SHA-256.
class Sha256 {
public:
  Sha256();
  ~Sha256();
  Sha256(Sha256&&) noexcept;
  Sha256& operator=(Sha256&&) noexcept;

  Sha256& update(std::span<const std::byte> bytes);
  template <typename T>
  Sha256& update_values(std::span<const T> values) {
    return update(std::as_bytes(values));
  }
  /// Lower-case hex digest; the object must not be updated afterwards.
  std::string hex();

private:
  struct Context;
  std::unique_ptr<Context> ctx_;
};

/// Lower-case hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);
/// Streams the file; throws Error{IoError} when it cannot be read.
std::string sha256_file(const std::filesystem::path& path);

template <typename T>
std::string sha256_of_values(std::span<const T> values) {
  return sha256_hex(std::as_bytes(values));
}

std::string base64_encode(std::span<const std::byte> bytes);
/// Throws Error{FormatError} on malformed input.
std::vector<std::byte> base64_decode(std::string_view text);

}  // namespace harbench
