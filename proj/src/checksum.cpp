#include "harbench/checksum.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "harbench/error.hpp"

namespace harbench {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::CorpusNotFound: return "corpus-not-found";
    case ErrorKind::EmptyCorpus: return "empty-corpus";
    case ErrorKind::DecodeError: return "decode-error";
    case ErrorKind::InvalidRatios: return "invalid-ratios";
    case ErrorKind::FrameLoadError: return "frame-load-error";
    case ErrorKind::EmptySplit: return "empty-split";
    case ErrorKind::UnknownBackbone: return "unknown-backbone";
    case ErrorKind::WeightsUnavailable: return "weights-unavailable";
    case ErrorKind::InputShapeError: return "input-shape-error";
    case ErrorKind::NumericError: return "numeric-error";
    case ErrorKind::TrainingDiverged: return "training-diverged";
    case ErrorKind::ShapeError: return "shape-error";
    case ErrorKind::LabelError: return "label-error";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::DegenerateRoc: return "degenerate-roc";
    case ErrorKind::ClassMismatch: return "class-mismatch";
    case ErrorKind::ReportLoadError: return "report-load-error";
    case ErrorKind::FormatError: return "format-error";
    case ErrorKind::IoError: return "io-error";
    case ErrorKind::InvalidArgument: return "invalid-argument";
  }
  return "error";
}

namespace {

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using DigestPtr = std::unique_ptr<EVP_MD_CTX, DigestDeleter>;

DigestPtr new_sha256() {
  DigestPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "cannot initialise SHA-256 context");
  }
  return ctx;
}

std::string finish_hex(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

}  // namespace

struct Sha256::Context {
  DigestPtr digest = new_sha256();
};

Sha256::Sha256() : ctx_(std::make_unique<Context>()) {}
Sha256::~Sha256() = default;
Sha256::Sha256(Sha256&&) noexcept = default;
Sha256& Sha256::operator=(Sha256&&) noexcept = default;

Sha256& Sha256::update(std::span<const std::byte> bytes) {
  EVP_DigestUpdate(ctx_->digest.get(), bytes.data(), bytes.size());
  return *this;
}

std::string Sha256::hex() { return finish_hex(ctx_->digest.get()); }

std::string sha256_hex(std::span<const std::byte> bytes) {
  auto ctx = new_sha256();
  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  return finish_hex(ctx.get());
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::as_bytes(std::span(text.data(), text.size())));
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  auto ctx = new_sha256();
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(in.gcount()));
  }
  return finish_hex(ctx.get());
}

std::string base64_encode(std::span<const std::byte> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

std::vector<std::byte> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorKind::FormatError, "base64 length not a multiple of 4");
  std::vector<std::byte> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorKind::FormatError, "malformed base64 payload");
  // EVP_DecodeBlock keeps the padding bytes; strip them.
  size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

}  // namespace harbench
