#include "harbench/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include "harbench/error.hpp"
#include "harbench/parallel.hpp"
#include "harbench/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace harbench {

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw Error(ErrorKind::InvalidArgument, "unknown split '" + std::string(name) + "' (expected train, val or test)");
}

void SplitRatios::validate() const {
  for (double r : {train, val, test}) {
    if (!std::isfinite(r) || r < 0.0) {
      throw Error(ErrorKind::InvalidRatios, "split ratios must be finite and non-negative");
    }
  }
  if (std::abs(sum() - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "split ratios " << train << "," << val << "," << test << " sum to " << sum() << ", expected 1";
    throw Error(ErrorKind::InvalidRatios, msg.str());
  }
}

std::size_t DatasetManifest::class_index(std::string_view label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) throw Error(ErrorKind::LabelError, "label '" + std::string(label) + "' not in class set");
  return static_cast<std::size_t>(it - classes.begin());
}

std::vector<const FrameRecord*> DatasetManifest::frames_in(Split split) const {
  std::vector<const FrameRecord*> out;
  for (const auto& f : frames) {
    if (f.split == split) out.push_back(&f);
  }
  return out;
}

namespace {

const std::set<std::string> kVideoExtensions{".mp4", ".avi", ".mov", ".mkv"};
const std::set<std::string> kImageExtensions{".jpg", ".jpeg", ".png", ".bmp"};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string sanitize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    out.push_back(std::isalnum(c) || c == '-' ? static_cast<char>(c) : '_');
  }
  return out;
}

std::string iso_utc(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool probe_video(const fs::path& path, ClipRecord& clip) {
  cv::VideoCapture cap(path.string());
  if (!cap.isOpened()) return false;
  clip.fps = cap.get(cv::CAP_PROP_FPS);
  clip.frame_count = static_cast<std::int64_t>(cap.get(cv::CAP_PROP_FRAME_COUNT));
  clip.width = static_cast<int>(cap.get(cv::CAP_PROP_FRAME_WIDTH));
  clip.height = static_cast<int>(cap.get(cv::CAP_PROP_FRAME_HEIGHT));
  if (!(clip.fps > 0.0) || clip.frame_count <= 0 || clip.width <= 0 || clip.height <= 0) return false;
  clip.duration = static_cast<double>(clip.frame_count) / clip.fps;
  return true;
}

bool probe_image(const fs::path& path, ClipRecord& clip) {
  const cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) return false;
  clip.width = img.cols;
  clip.height = img.rows;
  clip.frame_count = 1;
  clip.still_image = true;
  return true;
}

void write_frame(const cv::Mat& frame, const fs::path& path, const std::string& clip_id) {
  if (!cv::imwrite(path.string(), frame)) {
    throw Error(ErrorKind::IoError, "cannot write frame of clip " + clip_id + " to " + path.string());
  }
}

}  // namespace

CorpusScan scan_corpus(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorKind::CorpusNotFound, "corpus root not found: " + root.string());
  }

  CorpusScan scan;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name.front() != '.') class_dirs.push_back(entry.path());
  }
  if (class_dirs.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "no class folders under " + root.string());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  std::set<std::string> used_ids;
  for (const auto& dir : class_dirs) {
    const auto label = dir.filename().string();
    scan.classes.push_back(label);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
      const auto ext = lower(file.extension().string());
      const bool video = kVideoExtensions.contains(ext);
      if (!video && !kImageExtensions.contains(ext)) continue;

      ClipRecord clip;
      clip.label = label;
      clip.path = fs::relative(file, root).generic_string();
      const bool readable = video ? probe_video(file, clip) : probe_image(file, clip);
      if (!readable) {
        scan.warnings.push_back("skipped unreadable media file: " + file.string());
        continue;
      }

      std::string id = sanitize(label) + "-" + sanitize(file.filename().string());
      for (int n = 2; used_ids.contains(id); ++n) {
        id = sanitize(label) + "-" + sanitize(file.filename().string()) + "-" + std::to_string(n);
      }
      used_ids.insert(id);
      clip.clip_id = std::move(id);
      scan.clips.push_back(std::move(clip));
    }
  }
  return scan;
}

std::vector<std::int64_t> sampled_frame_indices(std::int64_t frame_count, std::int64_t stride,
                                                std::optional<std::int64_t> limit) {
  if (stride < 1) throw Error(ErrorKind::InvalidArgument, "frame stride must be >= 1");
  std::vector<std::int64_t> out;
  for (std::int64_t i = 0; i < frame_count; i += stride) {
    if (limit && static_cast<std::int64_t>(out.size()) >= *limit) break;
    out.push_back(i);
  }
  return out;
}

std::vector<FrameRecord> extract_frames(const ClipRecord& clip, const fs::path& corpus_root,
                                        const fs::path& out_dir, std::int64_t stride,
                                        std::optional<std::int64_t> limit) {
  if (stride < 1) throw Error(ErrorKind::InvalidArgument, "frame stride must be >= 1");
  if (limit && *limit < 0) throw Error(ErrorKind::InvalidArgument, "frame limit must be >= 0");

  const fs::path rel_dir = fs::path("frames") / clip.label;
  fs::create_directories(out_dir / rel_dir);
  const fs::path source = corpus_root / clip.path;

  std::vector<FrameRecord> frames;
  auto emit = [&](const cv::Mat& image, std::int64_t index) {
    FrameRecord rec;
    rec.clip_id = clip.clip_id;
    rec.frame_index = index;
    rec.frame_id = clip.clip_id + "_" + std::to_string(index);
    rec.label = clip.label;
    rec.split = clip.split.value_or(Split::Train);
    rec.path = (rel_dir / (rec.frame_id + ".png")).generic_string();
    write_frame(image, out_dir / rec.path, clip.clip_id);
    frames.push_back(std::move(rec));
  };

  if (clip.still_image) {
    const cv::Mat img = cv::imread(source.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw Error(ErrorKind::DecodeError, "cannot decode clip " + clip.clip_id);
    if (!limit || *limit >= 1) emit(img, 0);
    return frames;
  }

  cv::VideoCapture cap(source.string());
  if (!cap.isOpened()) throw Error(ErrorKind::DecodeError, "cannot open clip " + clip.clip_id);
  cv::Mat frame;
  std::int64_t index = 0;
  bool decoded_any = false;
  while (!(limit && static_cast<std::int64_t>(frames.size()) >= *limit)) {
    if (!cap.read(frame) || frame.empty()) break;
    decoded_any = true;
    if (index % stride == 0) emit(frame, index);
    ++index;
  }
  if (!decoded_any && !(limit && *limit == 0)) {
    throw Error(ErrorKind::DecodeError, "no decodable frames in clip " + clip.clip_id);
  }
  return frames;
}

std::array<std::size_t, 3> apportion(std::size_t count, const SplitRatios& ratios) {
  ratios.validate();
  constexpr double kTieTolerance = 1e-9;
  std::array<std::size_t, 3> out{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double quota = ratios[kAllSplits[s]] * static_cast<double>(count);
    const double floor_q = std::floor(quota + kTieTolerance);
    out[s] = static_cast<std::size_t>(floor_q);
    remainder[s] = std::max(0.0, quota - floor_q);
    assigned += out[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b] + kTieTolerance;
  });
  for (std::size_t k = 0; assigned < count; k = (k + 1) % 3) {
    const std::size_t s = order[k];
    if (ratios[kAllSplits[s]] <= 0.0) continue;
    ++out[s];
    ++assigned;
  }
  return out;
}

SplitAssignment stratified_split(std::span<const ClipRecord> clips, const SplitRatios& ratios,
                                 std::uint64_t seed) {
  ratios.validate();

  std::map<std::string, std::vector<const ClipRecord*>> by_class;
  for (const auto& clip : clips) by_class[clip.label].push_back(&clip);

  const auto nonzero = static_cast<std::size_t>(std::count_if(
      kAllSplits.begin(), kAllSplits.end(), [&](Split s) { return ratios[s] > 0.0; }));

  SplitAssignment result;
  std::uint64_t stream = 0;
  for (auto& [label, members] : by_class) {
    std::sort(members.begin(), members.end(),
              [](const ClipRecord* a, const ClipRecord* b) { return a->path < b->path; });
    Rng rng(mix_seed(seed, stream++));
    rng.shuffle(std::span(members));

    const auto counts = apportion(members.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < counts[s]; ++k) result.by_clip[members[pos++]->clip_id] = kAllSplits[s];
    }
    if (members.size() < nonzero) {
      std::ostringstream msg;
      msg << "class '" << label << "' has " << members.size() << " clip(s) for " << nonzero
          << " non-empty splits; some splits get no clips of this class";
      result.warnings.push_back(msg.str());
    }
  }
  return result;
}

ManifestBuild build_manifest(const fs::path& root, const fs::path& out_dir, const ManifestOptions& options) {
  options.ratios.validate();
  if (options.stride < 1) throw Error(ErrorKind::InvalidArgument, "frame stride must be >= 1");

  auto scan = scan_corpus(root);
  if (scan.clips.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "no readable clips under " + root.string());
  }

  ManifestBuild build;
  build.warnings = scan.warnings;
  for (const auto& label : scan.classes) {
    const bool present = std::any_of(scan.clips.begin(), scan.clips.end(),
                                     [&](const ClipRecord& c) { return c.label == label; });
    if (!present) build.warnings.push_back("class '" + label + "' has no clips");
  }

  auto assignment = stratified_split(scan.clips, options.ratios, options.seed);
  build.warnings.insert(build.warnings.end(), assignment.warnings.begin(), assignment.warnings.end());
  for (auto& clip : scan.clips) clip.split = assignment.by_clip.at(clip.clip_id);

  fs::create_directories(out_dir);
  std::vector<std::vector<FrameRecord>> per_clip(scan.clips.size());
  parallel_for(scan.clips.size(), options.threads, [&](std::size_t i) {
    per_clip[i] = extract_frames(scan.clips[i], root, out_dir, options.stride, options.frame_limit);
  });

  DatasetManifest& m = build.manifest;
  m.classes = scan.classes;
  m.clips = std::move(scan.clips);
  for (auto& frames : per_clip) {
    for (auto& f : frames) m.frames.push_back(std::move(f));
  }
  m.split_ratios = options.ratios;
  m.seed = options.seed;
  m.frame_stride = options.stride;
  m.source_root = fs::weakly_canonical(fs::absolute(root)).generic_string();
  if (options.created_at) {
    m.created_at = *options.created_at;
  } else {
    fs::file_time_type newest{};
    for (const auto& clip : m.clips) newest = std::max(newest, fs::last_write_time(root / clip.path));
    const auto sys = std::chrono::file_clock::to_sys(newest);
    m.created_at = iso_utc(std::chrono::system_clock::to_time_t(
        std::chrono::time_point_cast<std::chrono::system_clock::duration>(sys)));
  }

  build.manifest_path = out_dir / "manifest.json";
  save_manifest(m, build.manifest_path);
  return build;
}

// --- serialization ---------------------------------------------------------

namespace {

json clip_to_json(const ClipRecord& c) {
  json j{{"clip_id", c.clip_id},         {"path", c.path},   {"class", c.label},
         {"duration", c.duration},       {"fps", c.fps},     {"width", c.width},
         {"height", c.height},           {"frame_count", c.frame_count},
         {"still_image", c.still_image}};
  j["split"] = c.split ? json(to_string(*c.split)) : json(nullptr);
  return j;
}

ClipRecord clip_from_json(const json& j) {
  ClipRecord c;
  c.clip_id = j.at("clip_id").get<std::string>();
  c.path = j.at("path").get<std::string>();
  c.label = j.at("class").get<std::string>();
  c.duration = j.at("duration").get<double>();
  c.fps = j.at("fps").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.frame_count = j.at("frame_count").get<std::int64_t>();
  c.still_image = j.at("still_image").get<bool>();
  if (!j.at("split").is_null()) c.split = parse_split(j.at("split").get<std::string>());
  return c;
}

json frame_to_json(const FrameRecord& f) {
  return json{{"frame_id", f.frame_id}, {"clip_id", f.clip_id}, {"frame_index", f.frame_index},
              {"class", f.label},       {"split", to_string(f.split)}, {"path", f.path}};
}

FrameRecord frame_from_json(const json& j) {
  FrameRecord f;
  f.frame_id = j.at("frame_id").get<std::string>();
  f.clip_id = j.at("clip_id").get<std::string>();
  f.frame_index = j.at("frame_index").get<std::int64_t>();
  f.label = j.at("class").get<std::string>();
  f.split = parse_split(j.at("split").get<std::string>());
  f.path = j.at("path").get<std::string>();
  return f;
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& m) {
  json clips = json::array();
  for (const auto& c : m.clips) clips.push_back(clip_to_json(c));
  json frames = json::array();
  for (const auto& f : m.frames) frames.push_back(frame_to_json(f));
  json j{{"classes", m.classes},
         {"clips", std::move(clips)},
         {"frames", std::move(frames)},
         {"split_ratios", {m.split_ratios.train, m.split_ratios.val, m.split_ratios.test}},
         {"seed", m.seed},
         {"frame_stride", m.frame_stride},
         {"source_root", m.source_root},
         {"created_at", m.created_at}};
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(std::string_view text) {
  try {
    const json j = json::parse(text);
    DatasetManifest m;
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& c : j.at("clips")) m.clips.push_back(clip_from_json(c));
    for (const auto& f : j.at("frames")) m.frames.push_back(frame_from_json(f));
    const auto& r = j.at("split_ratios");
    if (!r.is_array() || r.size() != 3) throw Error(ErrorKind::FormatError, "split_ratios must have 3 entries");
    m.split_ratios = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
    m.seed = j.at("seed").get<std::uint64_t>();
    m.frame_stride = j.value("frame_stride", std::int64_t{1});
    m.source_root = j.at("source_root").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write manifest " + path.string());
  out << serialize_manifest(manifest);
  if (!out) throw Error(ErrorKind::IoError, "failed writing manifest " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

// --- validation ------------------------------------------------------------

std::string_view to_string(CheckStatus status) noexcept {
  switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Warn: return "warn";
    case CheckStatus::Fail: return "fail";
  }
  return "fail";
}

bool ValidationReport::ok() const noexcept { return count(CheckStatus::Fail) == 0; }

std::size_t ValidationReport::count(CheckStatus status) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [&](const ValidationItem& i) { return i.status == status; }));
}

ValidationReport validate_manifest(const DatasetManifest& m) noexcept {
  ValidationReport report;
  auto add = [&](std::string check, CheckStatus status, std::string message) {
    report.items.push_back({std::move(check), status, std::move(message)});
  };

  try {
    // class set
    {
      std::set<std::string> unique(m.classes.begin(), m.classes.end());
      if (m.classes.empty()) {
        add("classes", CheckStatus::Fail, "class set is empty");
      } else if (unique.size() != m.classes.size()) {
        add("classes", CheckStatus::Fail, "class set contains duplicates");
      } else if (!std::is_sorted(m.classes.begin(), m.classes.end())) {
        add("classes", CheckStatus::Fail, "class set is not in lexicographic order");
      } else {
        add("classes", CheckStatus::Pass, std::to_string(m.classes.size()) + " classes");
      }
    }
    const std::set<std::string> class_set(m.classes.begin(), m.classes.end());

    // ratios
    {
      const auto& r = m.split_ratios;
      const bool non_negative = r.train >= 0 && r.val >= 0 && r.test >= 0;
      if (!non_negative || !(std::abs(r.sum() - 1.0) <= 1e-9)) {
        std::ostringstream msg;
        msg << "split ratios sum to " << r.sum() << " (must be non-negative and sum to 1 within 1e-9)";
        add("ratio-sum", CheckStatus::Fail, msg.str());
      } else {
        add("ratio-sum", CheckStatus::Pass, "split ratios sum to 1");
      }
    }

    // clips
    std::map<std::string, const ClipRecord*> clips_by_id;
    {
      std::size_t bad = 0;
      for (const auto& c : m.clips) {
        if (!clips_by_id.emplace(c.clip_id, &c).second) {
          add("clip-id-unique", CheckStatus::Fail, "duplicate clip_id " + c.clip_id);
          ++bad;
        }
        if (!class_set.contains(c.label)) {
          add("clip-class", CheckStatus::Fail, "clip " + c.clip_id + " has unknown class '" + c.label + "'");
          ++bad;
        }
        if (!c.still_image && !(c.fps > 0 && c.duration > 0)) {
          add("clip-media", CheckStatus::Fail, "video clip " + c.clip_id + " has non-positive fps or duration");
          ++bad;
        }
      }
      if (bad == 0) add("clips", CheckStatus::Pass, std::to_string(m.clips.size()) + " clips");
    }

    // frames: parentage, class consistency and split exclusivity
    std::map<std::string, std::set<Split>> splits_per_clip;
    {
      std::set<std::string> frame_ids;
      std::size_t bad = 0;
      for (const auto& f : m.frames) {
        if (!frame_ids.insert(f.frame_id).second) {
          add("frame-id-unique", CheckStatus::Fail, "duplicate frame_id " + f.frame_id);
          ++bad;
        }
        auto it = clips_by_id.find(f.clip_id);
        if (it == clips_by_id.end()) {
          add("frame-parent", CheckStatus::Fail, "frame " + f.frame_id + " references unknown clip " + f.clip_id);
          ++bad;
          continue;
        }
        if (f.label != it->second->label) {
          add("frame-class", CheckStatus::Fail, "frame " + f.frame_id + " class differs from its clip");
          ++bad;
        }
        if (f.frame_index < 0) {
          add("frame-index", CheckStatus::Fail, "frame " + f.frame_id + " has negative index");
          ++bad;
        }
        splits_per_clip[f.clip_id].insert(f.split);
        if (it->second->split && *it->second->split != f.split) splits_per_clip[f.clip_id].insert(*it->second->split);
      }
      if (bad == 0) add("frames", CheckStatus::Pass, std::to_string(m.frames.size()) + " frames");
    }

    {
      std::size_t leaks = 0;
      for (const auto& [clip_id, splits] : splits_per_clip) {
        if (splits.size() > 1) {
          std::string names;
          for (Split s : splits) names += (names.empty() ? "" : ",") + std::string(to_string(s));
          add("split-leakage", CheckStatus::Fail, "clip " + clip_id + " spans splits {" + names + "}");
          ++leaks;
        }
      }
      if (leaks == 0) add("split-leakage", CheckStatus::Pass, "every clip belongs to exactly one split");
    }

    // apportionment per class, on clip-level splits
    {
      std::map<std::string, std::array<std::size_t, 3>> clip_counts;
      for (const auto& label : m.classes) clip_counts[label] = {};
      for (const auto& c : m.clips) {
        std::optional<Split> s = c.split;
        if (!s) {
          auto it = splits_per_clip.find(c.clip_id);
          if (it != splits_per_clip.end() && it->second.size() == 1) s = *it->second.begin();
        }
        if (s) clip_counts[c.label][static_cast<std::size_t>(*s)]++;
      }
      std::size_t bad = 0;
      for (const auto& [label, counts] : clip_counts) {
        const std::size_t total = counts[0] + counts[1] + counts[2];
        if (total == 0) {
          add("class-empty", CheckStatus::Warn, "class '" + label + "' has no clips");
          continue;
        }
        for (std::size_t s = 0; s < 3; ++s) {
          const double expected = m.split_ratios[kAllSplits[s]] * static_cast<double>(total);
          if (std::abs(static_cast<double>(counts[s]) - expected) > 1.0 + 1e-9) {
            std::ostringstream msg;
            msg << "class '" << label << "' has " << counts[s] << " " << to_string(kAllSplits[s])
                << " clips, expected " << expected << " +/- 1";
            add("apportionment", CheckStatus::Fail, msg.str());
            ++bad;
          } else if (counts[s] == 0 && m.split_ratios[kAllSplits[s]] > 0) {
            add("split-empty", CheckStatus::Warn,
                "class '" + label + "' has no " + std::string(to_string(kAllSplits[s])) + " clips");
          }
        }
      }
      if (bad == 0) add("apportionment", CheckStatus::Pass, "per-class split counts within 1 of ratio quota");
    }

    // per-class frame counts
    for (const auto& label : m.classes) report.frame_counts[label] = {};
    for (const auto& f : m.frames) report.frame_counts[f.label][static_cast<std::size_t>(f.split)]++;
    for (const auto& [label, counts] : report.frame_counts) {
      std::ostringstream msg;
      msg << label << ": train=" << counts[0] << " val=" << counts[1] << " test=" << counts[2];
      add("frame-counts", CheckStatus::Pass, msg.str());
    }
  } catch (const std::exception& e) {
    report.items.push_back({"internal", CheckStatus::Fail, e.what()});
  }
  return report;
}

}  // namespace harbench
