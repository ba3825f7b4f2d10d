#pragma once

// Corpus ingestion: folder-per-class scanning, frame extraction and the
// clip-level stratified train/val/test manifest.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harbench {

enum class Split { Train = 0, Val = 1, Test = 2 };

inline constexpr std::array<Split, 3> kAllSplits{Split::Train, Split::Val, Split::Test};

std::string_view to_string(Split split) noexcept;
/// Accepts "train", "val" and "test"; throws Error{InvalidArgument} otherwise.
Split parse_split(std::string_view name);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  double operator[](Split s) const noexcept {
    return s == Split::Train ? train : s == Split::Val ? val : test;
  }
  double sum() const noexcept { return train + val + test; }
  /// Throws Error{InvalidRatios} unless all are >= 0 and they sum to 1 within 1e-9.
  void validate() const;

  bool operator==(const SplitRatios&) const = default;
};

/// One source media file. Still images are single-frame clips with fps = 0 and
/// duration = 0.
struct ClipRecord {
  std::string clip_id;
  std::string path;  // relative to the corpus root, generic format
  std::string label;
  double duration = 0.0;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  std::int64_t frame_count = 0;
  bool still_image = false;
  std::optional<Split> split;

  bool operator==(const ClipRecord&) const = default;
};

struct FrameRecord {
  std::string frame_id;
  std::string clip_id;
  std::int64_t frame_index = 0;
  std::string label;
  Split split = Split::Train;
  std::string path;  // relative to the manifest directory

  bool operator==(const FrameRecord&) const = default;
};

struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<ClipRecord> clips;
  std::vector<FrameRecord> frames;
  SplitRatios split_ratios;
  std::uint64_t seed = 0;
  std::int64_t frame_stride = 1;
  std::string created_at;
  std::string source_root;

  bool operator==(const DatasetManifest&) const = default;

  /// Index of `label` in the canonical class order; throws Error{LabelError}.
  std::size_t class_index(std::string_view label) const;
  std::vector<const FrameRecord*> frames_in(Split split) const;
};

struct CorpusScan {
  std::vector<std::string> classes;
  std::vector<ClipRecord> clips;
  std::vector<std::string> warnings;
};

/// Lists `<root>/<class>/<media>`; classes and clips come back sorted.
CorpusScan scan_corpus(const std::filesystem::path& root);

/// Source frame indices kept by uniform stride sampling.
std::vector<std::int64_t> sampled_frame_indices(std::int64_t frame_count, std::int64_t stride,
                                                std::optional<std::int64_t> limit = std::nullopt);

/// Decodes `clip` and writes every stride-th frame to
/// `<out_dir>/frames/<label>/<clip_id>_<index>.png`. Returned records carry
/// paths relative to `out_dir` and the clip's split (Train when unassigned).
std::vector<FrameRecord> extract_frames(const ClipRecord& clip, const std::filesystem::path& corpus_root,
                                        const std::filesystem::path& out_dir, std::int64_t stride,
                                        std::optional<std::int64_t> limit = std::nullopt);

/// Largest-remainder apportionment of `count` items; remainder ties go to the
/// earlier split in (train, val, test) order.
std::array<std::size_t, 3> apportion(std::size_t count, const SplitRatios& ratios);

struct SplitAssignment {
  std::map<std::string, Split> by_clip;
  std::vector<std::string> warnings;
};

/// Per-class seeded shuffle followed by apportionment. Deterministic for fixed
/// (clips, ratios, seed).
SplitAssignment stratified_split(std::span<const ClipRecord> clips, const SplitRatios& ratios,
                                 std::uint64_t seed);

struct ManifestOptions {
  std::int64_t stride = 15;
  std::optional<std::int64_t> frame_limit;
  SplitRatios ratios;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  // Defaults to the newest modification time among the corpus media files, so
  // the manifest stays a pure function of the corpus and the options.
  std::optional<std::string> created_at;
};

struct ManifestBuild {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
  std::filesystem::path manifest_path;
};

/// scan_corpus -> stratified_split -> extract_frames, then writes
/// `<out_dir>/manifest.json`.
ManifestBuild build_manifest(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                             const ManifestOptions& options = {});

std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view json_text);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

enum class CheckStatus { Pass, Warn, Fail };
std::string_view to_string(CheckStatus status) noexcept;

struct ValidationItem {
  std::string check;
  CheckStatus status = CheckStatus::Pass;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  // label -> frames per split (train, val, test)
  std::map<std::string, std::array<std::size_t, 3>> frame_counts;

  bool ok() const noexcept;
  std::size_t count(CheckStatus status) const noexcept;
};

/// Never throws on malformed content; every problem becomes a Fail or Warn item.
ValidationReport validate_manifest(const DatasetManifest& manifest) noexcept;

}  // namespace harbench
