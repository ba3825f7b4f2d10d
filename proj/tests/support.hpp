#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("harbench-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
  std::filesystem::path path_;
};

inline void write_solid_png(const std::filesystem::path& path, cv::Scalar bgr, int w = 64, int h = 48) {
  std::filesystem::create_directories(path.parent_path());
  cv::Mat img(h, w, CV_8UC3, bgr);
  cv::imwrite(path.string(), img);
}

// MJPG avi with `frames` frames at `fps`.
inline bool write_video(const std::filesystem::path& path, int frames, double fps = 30.0, int w = 64, int h = 48) {
  std::filesystem::create_directories(path.parent_path());
  cv::VideoWriter writer(path.string(), cv::VideoWriter::fourcc('M', 'J', 'P', 'G'), fps, cv::Size(w, h));
  if (!writer.isOpened()) return false;
  for (int i = 0; i < frames; ++i) writer.write(cv::Mat(h, w, CV_8UC3, cv::Scalar(i % 256, 80, 160)));
  return true;
}

// `per_class[k]` solid images for class "c<k>" with slightly varied shades.
inline void make_image_corpus(const std::filesystem::path& root, const std::vector<int>& per_class) {
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    for (int i = 0; i < per_class[k]; ++i) {
      const double shade = 40.0 + 20.0 * static_cast<double>(k) + (i % 5);
      write_solid_png(root / ("c" + std::to_string(k)) / ("img" + std::to_string(i) + ".png"),
                      cv::Scalar(shade, 255 - shade, (37 * k) % 256), 16, 16);
    }
  }
}

}  // namespace testing
