#include <doctest.h>

#include <numeric>
#include <set>

#include "harbench/error.hpp"
#include "harbench/io.hpp"
#include "harbench/preprocess.hpp"
#include "support.hpp"

using namespace harbench;
namespace fs = std::filesystem;

TEST_CASE("a 160x160 frame is loaded without resampling, RGB order") {
  testing::TempDir dir("pre");
  cv::Mat img(160, 160, CV_8UC3);
  cv::randu(img, 0, 256);
  cv::imwrite((dir / "a.png").string(), img);
  const auto t = load_and_resize(dir / "a.png");
  REQUIRE(t.height == 160);
  REQUIRE(t.width == 160);
  REQUIRE(t.channels == 3);
  for (int y : {0, 17, 159}) {
    for (int x : {0, 88, 159}) {
      const auto px = img.at<cv::Vec3b>(y, x);
      CHECK(t.at(y, x, 0) == px[2]);
      CHECK(t.at(y, x, 1) == px[1]);
      CHECK(t.at(y, x, 2) == px[0]);
    }
  }
}

TEST_CASE("640x480 and grayscale inputs become 160x160x3") {
  testing::TempDir dir("pre2");
  testing::write_solid_png(dir / "big.png", cv::Scalar(10, 20, 30), 640, 480);
  const auto t = load_and_resize(dir / "big.png");
  CHECK(t.height == 160);
  CHECK(t.width == 160);
  CHECK(t.values.size() == 160u * 160u * 3u);
  CHECK(t.at(80, 80, 0) == doctest::Approx(30));
  CHECK(t.at(80, 80, 2) == doctest::Approx(10));

  cv::Mat grey(50, 70, CV_8UC1, cv::Scalar(99));
  cv::imwrite((dir / "grey.png").string(), grey);
  const auto g = load_and_resize(dir / "grey.png");
  CHECK(g.channels == 3);
  CHECK(g.at(10, 10, 0) == doctest::Approx(99));
  CHECK(g.at(10, 10, 1) == doctest::Approx(99));
  CHECK(g.at(10, 10, 2) == doctest::Approx(99));
}

TEST_CASE("unreadable frame raises frame-load-error naming the path") {
  testing::TempDir dir("pre3");
  write_text_file(dir / "x.png", "nope");
  try {
    load_and_resize(dir / "x.png");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FrameLoadError);
    CHECK(std::string(e.what()).find("x.png") != std::string::npos);
  }
  CHECK_THROWS_AS(load_and_resize(dir / "missing.png"), Error);
}

TEST_CASE("symmetric unit normalization maps 0, 127.5, 255 to -1, 0, 1") {
  ImageTensor raw{1, 3, 3, {0, 0, 0, 127.5f, 127.5f, 127.5f, 255, 255, 255}};
  const auto n = symmetric_unit_normalization().apply(raw);
  for (int c = 0; c < 3; ++c) {
    CHECK(n.at(0, 0, c) == doctest::Approx(-1.0));
    CHECK(n.at(0, 1, c) == doctest::Approx(0.0));
    CHECK(n.at(0, 2, c) == doctest::Approx(1.0));
  }
  const auto lo = symmetric_unit_normalization().range_low();
  const auto hi = symmetric_unit_normalization().range_high();
  CHECK(lo[0] == doctest::Approx(-1.0));
  CHECK(hi[2] == doctest::Approx(1.0));
}

TEST_CASE("imagenet mean normalization reverses channels then subtracts means") {
  ImageTensor raw{1, 1, 3, {10, 20, 30}};
  const auto n = imagenet_mean_bgr_normalization().apply(raw);
  CHECK(n.at(0, 0, 0) == doctest::Approx(30 - 103.939));
  CHECK(n.at(0, 0, 1) == doctest::Approx(20 - 116.779));
  CHECK(n.at(0, 0, 2) == doctest::Approx(10 - 123.68));
}

TEST_CASE("normalization inverts") {
  ImageTensor raw{2, 2, 3, {}};
  raw.values = {0, 1, 2, 50, 60, 70, 128, 129, 130, 253, 254, 255};
  for (const auto& norm : {symmetric_unit_normalization(), imagenet_mean_bgr_normalization()}) {
    const auto back = norm.invert(norm.apply(raw));
    for (std::size_t i = 0; i < raw.values.size(); ++i) CHECK(back.values[i] == doctest::Approx(raw.values[i]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(normalize_for_backbone(raw, "alexnet"), Error);
}

TEST_CASE("batch plans") {
  auto sizes = [](const std::vector<std::vector<std::size_t>>& plan) {
    std::vector<std::size_t> s;
    for (const auto& b : plan) s.push_back(b.size());
    return s;
  };
  CHECK(sizes(plan_batches(20, 8)) == std::vector<std::size_t>{8, 8, 4});
  CHECK(plan_batches(4372, 8).size() == 547);
  CHECK(plan_batches(0, 8).empty());

  const auto a = plan_batches(100, 8, 5);
  CHECK(a == plan_batches(100, 8, 5));
  CHECK(a != plan_batches(100, 8));
  std::vector<std::size_t> flat;
  for (const auto& b : a) flat.insert(flat.end(), b.begin(), b.end());
  std::sort(flat.begin(), flat.end());
  std::vector<std::size_t> expect(100);
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  CHECK(flat == expect);
}

TEST_CASE("make_batches loads, labels and keeps manifest order without a seed") {
  testing::TempDir dir("batches");
  std::vector<FrameRecord> frames;
  for (int i = 0; i < 10; ++i) {
    FrameRecord f;
    f.frame_id = "f" + std::to_string(i);
    f.label = i % 2 ? "b" : "a";
    f.path = "img" + std::to_string(i) + ".png";
    testing::write_solid_png(dir / f.path, cv::Scalar(i * 10, i * 10, i * 10), 16, 16);
    frames.push_back(f);
  }
  std::vector<const FrameRecord*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  FrameSource src;
  src.base_dir = dir.path();
  src.classes = {"a", "b"};
  src.normalization = symmetric_unit_normalization();
  const auto batches = make_batches(ptrs, src, 4);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].n == 4);
  CHECK(batches[2].n == 2);
  CHECK(batches[0].height == 160);
  CHECK(batches[0].label(1) == 1);
  CHECK(batches[0].label(2) == 0);
  CHECK(batches[0].image(0)[0] == doctest::Approx(-1.0));
  CHECK(batches[1].image(1)[0] == doctest::Approx(50 / 127.5 - 1.0));

  CHECK_THROWS_AS(make_batches(std::span<const FrameRecord* const>{}, src, 4), Error);
}
