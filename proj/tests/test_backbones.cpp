#include <doctest.h>

#include <cstdlib>
#include <map>

#include "harbench/backbones.hpp"
#include "harbench/error.hpp"

using namespace harbench;
namespace fs = std::filesystem;

namespace {

// Final feature grids at 160x160, recorded from the Keras application
// models (include_top=False).
const std::map<std::string, std::array<int, 3>> kGolden160{
    {"vgg16", {5, 5, 512}},
    {"resnet50", {5, 5, 2048}},
    {"inceptionv3", {3, 3, 2048}},
    {"xception", {5, 5, 2048}},
};

BatchTensor zeros(std::size_t n, int side) {
  BatchTensor b;
  b.n = n;
  b.height = side;
  b.width = side;
  b.values.assign(n * b.image_size(), 0.0f);
  return b;
}

}  // namespace

TEST_CASE("registry holds the four backbones") {
  const auto ids = BackboneRegistry::global().ids();
  CHECK(ids == std::vector<std::string>{"vgg16", "resnet50", "inceptionv3", "xception"});
  try {
    BackboneRegistry::global().get("alexnet");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownBackbone);
    CHECK(std::string(e.what()).find("xception") != std::string::npos);
  }
}

TEST_CASE("output grids follow the architectures at other input sizes") {
  const auto& r = BackboneRegistry::global();
  CHECK(r.get("vgg16").output_side(224) == 7);
  CHECK(r.get("resnet50").output_side(224) == 7);
  CHECK(r.get("inceptionv3").output_side(299) == 8);
  CHECK(r.get("xception").output_side(299) == 10);
  CHECK(r.get("inceptionv3").output_side(75) == 1);
}

TEST_CASE("stub feature maps match the golden 160x160 shapes") {
  for (const auto& [id, shape] : kGolden160) {
    CAPTURE(id);
    const auto bb = load_backbone(id, {.mode = WeightsMode::Stub, .weights_dir = {}, .registry = nullptr});
    const auto maps = bb->extract(zeros(2, 160));
    CHECK(maps.n == 2);
    CHECK(maps.height == shape[0]);
    CHECK(maps.width == shape[1]);
    CHECK(maps.channels == shape[2]);
    CHECK(maps.values.size() == 2u * shape[0] * shape[1] * shape[2]);
    CHECK(bb->spec().output_side(160) == shape[0]);
    CHECK(bb->frozen());
    CHECK(bb->kind() == "stub");
  }
}

TEST_CASE("pretrained feature maps match the golden shapes when weights are cached") {
  const char* env = std::getenv("HARBENCH_WEIGHTS_DIR");
  const fs::path dir = env ? fs::path(env) : default_weights_dir();
  for (const auto& [id, shape] : kGolden160) {
    if (!fs::exists(weights_path(dir, id))) {
      MESSAGE("skipping " << id << ": no weights at " << weights_path(dir, id).string());
      continue;
    }
    const auto bb = load_backbone(id, {.mode = WeightsMode::Pretrained, .weights_dir = dir, .registry = nullptr});
    const auto maps = bb->extract(zeros(1, 160));
    CHECK(maps.height == shape[0]);
    CHECK(maps.width == shape[1]);
    CHECK(maps.channels == shape[2]);
    CHECK(bb->kind() == "pretrained");
  }
}

TEST_CASE("missing pretrained weights name the export script") {
  try {
    load_backbone("xception", {.mode = WeightsMode::Pretrained, .weights_dir = "/nonexistent/weights", .registry = nullptr});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::WeightsUnavailable);
    CHECK(std::string(e.what()).find("export_backbones.py") != std::string::npos);
  }
}

TEST_CASE("stub checksums are stable, distinct and unchanged by inference") {
  const LoadOptions stub{.mode = WeightsMode::Stub, .weights_dir = {}, .registry = nullptr};
  const auto a = load_backbone("xception", stub);
  const auto b = load_backbone("vgg16", stub);
  CHECK(a->weights_checksum() != b->weights_checksum());
  CHECK(a->weights_checksum() == load_backbone("xception", stub)->weights_checksum());
  const auto before = a->parameter_checksum();
  BatchTensor batch = zeros(3, 160);
  for (std::size_t i = 0; i < batch.values.size(); ++i) batch.values[i] = static_cast<float>(i % 7) / 7.0f;
  const auto first = a->extract(batch);
  CHECK(a->parameter_checksum() == before);
  CHECK(a->extract(batch).values == first.values);
}

TEST_CASE("input shape errors") {
  const auto bb = load_backbone("inceptionv3", {.mode = WeightsMode::Stub, .weights_dir = {}, .registry = nullptr});
  auto check_kind = [&](const BatchTensor& batch) {
    try {
      bb->extract(batch);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InputShapeError);
    }
  };
  check_kind(zeros(0, 160));
  check_kind(zeros(1, 32));
  BatchTensor wrong = zeros(1, 160);
  wrong.channels = 1;
  check_kind(wrong);
  wrong = zeros(1, 160);
  wrong.values.pop_back();
  check_kind(wrong);
}

TEST_CASE("registry rejects invalid specs and accepts new ones") {
  auto r = BackboneRegistry::with_defaults();
  BackboneSpec bad;
  bad.id = "tiny";
  CHECK_THROWS_AS(r.add(bad), Error);
  BackboneSpec ok = r.get("vgg16");
  ok.id = "vgg16-copy";
  r.add(ok);
  CHECK(r.contains("vgg16-copy"));
  CHECK_FALSE(BackboneRegistry::global().contains("vgg16-copy"));
}
