#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "maskseed/io.hpp"
#include "maskseed/runconfig.hpp"
#include "maskseed/weights_io.hpp"

using namespace maskseed;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("maskseed_test_" + name)).string();
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.patch_size = 32;
  cfg.trunk = "C4,P,C6,P,C8,P,C8,P";
  cfg.rank = 12;
  cfg.mask_out = 8;
  cfg.score_hidden1 = 10;
  cfg.score_hidden2 = 12;
  return cfg;
}

}  // namespace

TEST_CASE("base64 round trip") {
  Rng rng(1);
  for (std::size_t n : {std::size_t(0), std::size_t(1), std::size_t(2), std::size_t(3),
                        std::size_t(100), std::size_t(257)}) {
    std::vector<std::uint8_t> data(n);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng.uniform_below(256));
    CHECK(base64_decode(base64_encode(data.data(), n)) == data);
  }
  CHECK_THROWS_AS(base64_decode("ab|c"), DataError);
}

TEST_CASE("ppm round trip") {
  const std::string path = tmp_path("img.ppm");
  std::vector<std::uint8_t> rgb(6 * 4 * 3);
  Rng rng(2);
  for (auto& b : rgb) b = static_cast<std::uint8_t>(rng.uniform_below(256));
  write_ppm(path, rgb.data(), 6, 4);
  int w = 0, h = 0;
  CHECK(read_ppm(path, w, h) == rgb);
  CHECK(w == 6);
  CHECK(h == 4);
  std::filesystem::remove(path);
}

TEST_CASE("weights save/load round-trips bit-exactly") {
  const ModelConfig cfg = tiny_config();
  Rng rng(3);
  ModelParams<float> params = build_model<float>(cfg, rng);
  const std::string path = tmp_path("weights.dmsk");
  save_weights(path, cfg, params, {{"state.step", "17"}});

  LoadedWeights lw = load_weights(path);
  CHECK(lw.config == cfg);
  CHECK(lw.extra.at("state.step") == "17");
  bool equal = true;
  for_each_param(params, cfg.full_rank, [&](const std::string& name, Tensor<float>& t, Tensor<float>&) {
    for_each_param(lw.params, cfg.full_rank,
                   [&](const std::string& n2, Tensor<float>& t2, Tensor<float>&) {
                     if (n2 == name && t.data != t2.data) equal = false;
                   });
  });
  CHECK(equal);
  std::filesystem::remove(path);
}

TEST_CASE("momentum buffers round-trip through checkpoints") {
  const ModelConfig cfg = tiny_config();
  Rng rng(4);
  ModelParams<float> params = build_model<float>(cfg, rng);
  for (auto& v : params.trunk[0].weight_momentum.data) v = 0.25f;
  const std::string path = tmp_path("ckpt.dmsk");
  save_weights(path, cfg, params, {}, true);
  LoadedWeights lw = load_weights(path, true);
  CHECK(lw.params.trunk[0].weight_momentum.data == params.trunk[0].weight_momentum.data);
  std::filesystem::remove(path);
}

TEST_CASE("truncated weights file is a load error, not a crash") {
  const ModelConfig cfg = tiny_config();
  Rng rng(5);
  ModelParams<float> params = build_model<float>(cfg, rng);
  const std::string path = tmp_path("trunc.dmsk");
  save_weights(path, cfg, params);
  std::string contents = read_file(path);
  atomic_write_file(path, contents.substr(0, contents.size() / 2));
  CHECK_THROWS_AS(load_weights(path), DataError);
  atomic_write_file(path, "DMSKgarbage");
  CHECK_THROWS_AS(load_weights(path), DataError);
  atomic_write_file(path, "NOPE");
  CHECK_THROWS_AS(load_weights(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("loading into a mismatched geometry reports both geometries") {
  const ModelConfig cfg = tiny_config();
  Rng rng(6);
  ModelParams<float> params = build_model<float>(cfg, rng);
  const std::string path = tmp_path("geom.dmsk");
  save_weights(path, cfg, params);
  ModelConfig other = tiny_config();
  other.rank = 20;
  try {
    load_weights_expect(path, other);
    FAIL("expected a geometry error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("rank=12") != std::string::npos);
    CHECK(msg.find("rank=20") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("annotation files round-trip scenes bitwise") {
  SyntheticSpec spec;
  spec.image_size = 64;
  std::vector<Scene> scenes;
  for (std::uint64_t i = 0; i < 3; ++i) {
    Rng rng(i + 7);
    scenes.push_back(generate_scene(spec, rng));
  }
  const std::string path = tmp_path("dataset.json");
  save_annotations(scenes, path);
  std::vector<Scene> loaded = load_annotations(path);
  REQUIRE(loaded.size() == scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(loaded[i].image.data == scenes[i].image.data);
    REQUIRE(loaded[i].annotations.size() == scenes[i].annotations.size());
    for (std::size_t a = 0; a < scenes[i].annotations.size(); ++a) {
      CHECK(loaded[i].annotations[a].mask == scenes[i].annotations[a].mask);
      CHECK(loaded[i].annotations[a].area == scenes[i].annotations[a].area);
      CHECK(loaded[i].annotations[a].bbox.x == scenes[i].annotations[a].bbox.x);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("annotation files round-trip via PPM image paths") {
  SyntheticSpec spec;
  spec.image_size = 64;
  Rng rng(11);
  std::vector<Scene> scenes = {generate_scene(spec, rng)};
  const std::string path = tmp_path("dataset_ppm.json");
  save_annotations(scenes, path, false);
  std::vector<Scene> loaded = load_annotations(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].image.data == scenes[0].image.data);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".0.ppm");
}

TEST_CASE("annotation schema violations carry scene context") {
  const std::string path = tmp_path("bad.json");
  atomic_write_file(path, "[{\"width\": 4, \"height\": 4}]");
  CHECK_THROWS_WITH_AS(load_annotations(path), doctest::Contains("scene 0"), DataError);

  atomic_write_file(path, "{\"not\": \"a list\"}");
  CHECK_THROWS_AS(load_annotations(path), DataError);

  atomic_write_file(path, "[{\"width\": 2, \"height\": 1, \"pixels\": \"AAAAAAAA\", "
                          "\"annotations\": [{\"id\": 1, \"bbox\": [0,0,1,1], \"area\": 5, "
                          "\"rle\": [1, 1]}]}]");
  CHECK_THROWS_WITH_AS(load_annotations(path), doctest::Contains("area"), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("the category allow-list filters annotations on load") {
  SyntheticSpec spec;
  spec.image_size = 96;
  spec.min_shapes = 4;
  spec.max_shapes = 4;
  Rng rng(12);
  std::vector<Scene> scenes = {generate_scene(spec, rng)};
  const std::string path = tmp_path("cats.json");
  save_annotations(scenes, path);
  std::vector<Scene> all = load_annotations(path);
  std::vector<Scene> only_disks = load_annotations(path, {0});
  std::size_t disk_count = 0;
  for (const auto& ann : all[0].annotations) disk_count += ann.category_id == 0;
  CHECK(only_disks[0].annotations.size() == disk_count);
  for (const auto& ann : only_disks[0].annotations) CHECK(ann.category_id == 0);
  std::filesystem::remove(path);
}

TEST_CASE("proposal files round-trip") {
  std::vector<std::vector<Proposal>> per_image(2);
  Rng rng(13);
  for (int img = 0; img < 2; ++img) {
    for (int i = 0; i < 3; ++i) {
      std::vector<std::uint8_t> mask(16 * 16, 0);
      for (auto& v : mask) v = rng.bernoulli(0.3);
      mask[0] = 1;
      Proposal p;
      p.rle = rle_encode(mask.data(), mask.size());
      p.image_w = 16;
      p.image_h = 16;
      p.box = bbox_of_mask(mask, 16, 16);
      p.score = rng.uniform(-2, 2);
      p.scale = 1.0;
      p.cell_y = i;
      p.cell_x = img;
      per_image[static_cast<std::size_t>(img)].push_back(std::move(p));
    }
  }
  const std::string path = tmp_path("proposals.json");
  save_proposals(per_image, path);
  auto loaded = load_proposals(path);
  REQUIRE(loaded.size() == 2);
  for (int img = 0; img < 2; ++img) {
    REQUIRE(loaded[img].size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(loaded[img][i].rle == per_image[img][i].rle);
      CHECK(loaded[img][i].score == per_image[img][i].score);
      CHECK(loaded[img][i].cell_y == per_image[img][i].cell_y);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("run config: preset, file, and overrides") {
  RunConfig cfg = RunConfig::desk();
  CHECK(cfg.model.patch_size == 64);
  CHECK(cfg.sampler.canonical_max_dim == 37);
  RunConfig paper = RunConfig::paper();
  CHECK(paper.model.patch_size == 224);
  CHECK(paper.model.rank == 512);
  CHECK(paper.sampler.canonical_max_dim == 128);
  CHECK(paper.train.optimizer.learning_rate == 0.001);
  CHECK_THROWS_AS(RunConfig::preset("huge"), UsageError);

  const std::string path = tmp_path("run.cfg");
  atomic_write_file(path, "# comment\nmodel.rank=24\ntrain.steps=9\n\npyramid.zoom=1\n");
  cfg.apply_file(path);
  CHECK(cfg.model.rank == 24);
  CHECK(cfg.train.steps == 9);
  CHECK(cfg.pyramid.zoom);

  cfg.apply_overrides({"model.rank=48", "seed=123"});
  CHECK(cfg.model.rank == 48);
  CHECK(cfg.seed == 123);

  CHECK_THROWS_AS(cfg.apply_overrides({"model.bogus=1"}), DataError);
  CHECK_THROWS_AS(cfg.apply_overrides({"no_equals"}), UsageError);

  atomic_write_file(path, "model.rank\n");
  CHECK_THROWS_WITH_AS(cfg.apply_file(path), doctest::Contains(":1"), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("run config text round-trips through the parser") {
  RunConfig cfg = RunConfig::desk();
  cfg.model.rank = 17;
  cfg.pyramid.zoom = true;
  cfg.seed = 99;
  const std::string text = cfg.to_text();
  const std::string path = tmp_path("echo.cfg");
  atomic_write_file(path, text);
  RunConfig reparsed = RunConfig::desk();
  reparsed.apply_file(path);
  CHECK(reparsed.to_text() == text);
  std::filesystem::remove(path);
}

TEST_CASE("atomic write leaves no partial file behind") {
  const std::string path = tmp_path("atomic.txt");
  atomic_write_file(path, "hello");
  CHECK(read_file(path) == "hello");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  std::filesystem::remove(path);
}
