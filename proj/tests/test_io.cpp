#include <doctest.h>

#include "fgnic/checkpoint.hpp"
#include "fgnic/dataset.hpp"
#include "fgnic/experiment.hpp"
#include "fgnic/hash.hpp"

#include <filesystem>
#include <fstream>

using namespace fgnic;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fgnic_io_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

Image<float> gradient_image(int h, int w, int c) {
  Image<float> im(h, w, c);
  for (Index p = 0; p < im.data.cols(); ++p)
    for (int k = 0; k < c; ++k) im.data(k, p) = static_cast<float>((p * 7 + k * 31) % 256) / 255.0f;
  return im;
}

}  // namespace

TEST_CASE("sha256 matches the published test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("checkpoint serialization round-trips and rejects damage") {
  Checkpoint ck;
  ck.meta = {{"kind", "test"}, {"n", 3}};
  ck.dtype = "f64";
  Matrix<double> a(2, 3);
  a << 1, 2, 3, 4, 5, 6.5;
  ck.add_tensor("a", a);
  ck.add_tensor("b", Matrix<double>::Constant(1, 1, -0.25));
  const std::string bytes = ck.serialize();
  auto back = Checkpoint::deserialize(bytes);
  CHECK(back.meta == ck.meta);
  CHECK(back.tensor("a") == a);
  CHECK(back.tensor("b")(0, 0) == -0.25);
  CHECK(back.has_tensor("a"));
  CHECK_FALSE(back.has_tensor("c"));
  CHECK(back.serialize() == bytes);

  CHECK_THROWS_AS(Checkpoint::deserialize("not a checkpoint"), IoError);
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 4)), IoError);
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes + "x"), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(bad), IoError);
  CHECK_THROWS_AS(Checkpoint::load("/nonexistent/fgnic.ckpt"), IoError);
}

TEST_CASE("checkpoint files and parameter loading") {
  const auto dir = scratch("ckpt");
  nn::Parameter<float> p("w", 2, 2);
  p.value.setConstant(0.5f);
  Checkpoint ck;
  ck.add_params<float>(nn::ConstParamList<float>{&p});
  ck.save(dir / "w.ckpt");
  CHECK(file_sha256(dir / "w.ckpt") == sha256_hex(ck.serialize()));

  nn::Parameter<float> q("w", 2, 2);
  Checkpoint::load(dir / "w.ckpt").load_params<float>(nn::ParamList<float>{&q});
  CHECK(q.value == p.value);
  nn::Parameter<float> wrong("w", 3, 2);
  CHECK_THROWS_AS(ck.load_params<float>(nn::ParamList<float>{&wrong}), IoError);
  nn::Parameter<float> missing("v", 2, 2);
  CHECK_THROWS_AS(ck.load_params<float>(nn::ParamList<float>{&missing}), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("png and ppm round-trip within 8-bit quantization") {
  const auto dir = scratch("png");
  for (const char* ext : {".png", ".ppm"}) {
    const auto im = gradient_image(5, 7, 3);
    const auto path = dir / (std::string("im") + ext);
    write_image(path, im);
    const auto back = read_image(path);
    REQUIRE(back.h == 5);
    REQUIRE(back.w == 7);
    REQUIRE(back.c() == 3);
    CHECK((back.data - im.data).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
  }
  const auto gray = gradient_image(4, 4, 1);
  write_image(dir / "g.pgm", gray);
  // Grayscale files decode to three equal channels.
  const auto g = read_image(dir / "g.pgm");
  REQUIRE(g.c() == 3);
  CHECK(g.data.row(0) == g.data.row(2));
  CHECK((g.data.row(1) - gray.data.row(0)).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
  CHECK_THROWS_AS(write_image(dir / "bad.png", gradient_image(2, 2, 2)), ShapeError);
  CHECK_THROWS_AS(read_image(dir / "missing.png"), IoError);
  std::ofstream(dir / "x.bmp") << "BM";
  CHECK_THROWS_AS(read_image(dir / "x.bmp"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("image trees reload with the same labels and pixels") {
  const auto dir = scratch("tree");
  const Dataset d = make_synthetic_dataset({3, 4, 8, 5});
  write_image_tree(dir, d);
  const Dataset back = load_image_tree(dir);
  REQUIRE(back.size() == d.size());
  CHECK(back.class_names == d.class_names);
  CHECK(back.labels == d.labels);
  // PNG quantizes, so compare after one write/read cycle.
  CHECK(load_image_tree(dir).content_hash() == back.content_hash());
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK((back.images[i].data - d.images[i].data).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
  CHECK_THROWS_AS(load_image_tree(dir / "nope"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic datasets are deterministic per seed") {
  const auto a = make_synthetic_dataset({4, 5, 8, 1});
  const auto b = make_synthetic_dataset({4, 5, 8, 1});
  const auto c = make_synthetic_dataset({4, 5, 8, 2});
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
  CHECK(a.size() == 20);
  CHECK(a.num_classes() == 4);
  CHECK_THROWS_AS(make_synthetic_dataset({4, 5, 4, 1}), ConfigError);
}

TEST_CASE("experiment config json round-trip") {
  auto cfg = ExperimentConfig::defaults();
  cfg.set_seed(42);
  const auto j = cfg.to_json();
  CHECK(ExperimentConfig::from_json(j).to_json() == j);
  const auto dir = scratch("cfg");
  std::ofstream(dir / "c.json") << j.dump(2);
  CHECK(ExperimentConfig::load(dir / "c.json").to_json() == j);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "broken.json"), ConfigError);
  std::filesystem::remove_all(dir);
}
