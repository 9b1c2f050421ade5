#include <doctest.h>

#include "fgnic/imaging.hpp"

#include <cmath>
#include <limits>

using namespace fgnic;

namespace {

Image<double> random_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> im(h, w, c);
  for (Index i = 0; i < im.data.size(); ++i) im.data(i) = u(rng);
  return im;
}

}  // namespace

TEST_CASE("uniform noise field is constant") {
  auto f = make_noise_field(DegradationSpec::uniform(0.3), 2, 2);
  REQUIRE(f.sigma.size() == 4);
  for (Index i = 0; i < 4; ++i) CHECK(f.sigma(i) == doctest::Approx(0.3));
}

TEST_CASE("linear1d over rows interpolates inclusive endpoints") {
  auto f = make_noise_field(DegradationSpec::linear(0.0, 0.5), 3, 1);
  CHECK(f(0, 0) == doctest::Approx(0.0));
  CHECK(f(1, 0) == doctest::Approx(0.25));
  CHECK(f(2, 0) == doctest::Approx(0.5));

  auto g = make_noise_field(DegradationSpec::linear(0.1, 0.4, Axis::cols), 5, 7);
  for (int i = 0; i < 5; ++i)
    for (int j = 1; j < 7; ++j) {
      CHECK(g(i, j) >= g(i, j - 1));
      CHECK(g(i, j) == g(0, j));
    }
}

TEST_CASE("linear1d with a single row is constant sigma_lo") {
  auto f = make_noise_field(DegradationSpec::linear(0.2, 0.5), 1, 4);
  for (int j = 0; j < 4; ++j) CHECK(f(0, j) == 0.2);
}

TEST_CASE("radial2d attains its endpoints at center and farthest corner") {
  auto f = make_noise_field(DegradationSpec::radial(0.0, 0.5, std::pair{0, 0}), 3, 3);
  CHECK(f(0, 0) == 0.0);
  CHECK(f(2, 2) == doctest::Approx(0.5));
  // d((0,0),(1,1)) = sqrt(2) over d_max = 2 sqrt(2)
  CHECK(f(1, 1) == doctest::Approx(0.25));
  CHECK(f(0, 2) == doctest::Approx(0.5 * 2.0 / (2.0 * std::sqrt(2.0))));
}

TEST_CASE("radial2d with a random center is seeded and non-negative") {
  auto a = make_noise_field(DegradationSpec::radial(0.1, 0.5, std::nullopt, 7), 16, 20);
  auto b = make_noise_field(DegradationSpec::radial(0.1, 0.5, std::nullopt, 7), 16, 20);
  CHECK(a.sigma == b.sigma);
  CHECK(a.sigma.minCoeff() == doctest::Approx(0.1));
  CHECK(a.sigma.maxCoeff() == doctest::Approx(0.5));
}

TEST_CASE("invalid degradation specs are configuration errors") {
  CHECK_THROWS_AS(make_noise_field(DegradationSpec::uniform(-0.1), 4, 4), ConfigError);
  CHECK_THROWS_AS(make_noise_field(DegradationSpec::linear(0.5, 0.1), 4, 4), ConfigError);
  CHECK_THROWS_AS(make_noise_field(DegradationSpec::uniform(std::nan("")), 4, 4), ConfigError);
  CHECK_THROWS_AS(make_noise_field(DegradationSpec::radial(0, 0.5, std::pair{9, 0}), 4, 4), ConfigError);
  CHECK_THROWS_AS(axis_from_string("diagonal"), ConfigError);
  CHECK_THROWS_AS(degradation_kind_from_string("haze"), ConfigError);
  CHECK_THROWS_AS(DegradationSpec::parse("uniform"), ConfigError);
}

TEST_CASE("degradation labels round-trip") {
  for (const auto& s : {DegradationSpec::uniform(0.3), DegradationSpec::linear(0, 0.5, Axis::cols),
                        DegradationSpec::radial(0, 0.5), DegradationSpec::radial(0.1, 0.4, std::pair{3, 5})}) {
    auto p = DegradationSpec::parse(s.label());
    CHECK(p.label() == s.label());
    CHECK(p.kind == s.kind);
  }
}

TEST_CASE("zero noise leaves the image unchanged") {
  auto im = random_image(8, 9, 3, 1);
  auto out = degrade(im, make_noise_field(DegradationSpec::uniform(0.0), 8, 9), 42);
  CHECK(out.data == im.data);
}

TEST_CASE("uniform noise has the requested pre-clamp standard deviation") {
  auto field = make_noise_field(DegradationSpec::uniform(0.2), 64, 64);
  Matrix<double> n = draw_noise<double>(field, 3, 5);
  for (int c = 0; c < 3; ++c) {
    const double mean = n.row(c).mean();
    const double sd = std::sqrt((n.row(c).array() - mean).square().sum() / double(n.cols() - 1));
    CHECK(sd >= 0.18);
    CHECK(sd <= 0.22);
  }
  auto im = Image<double>::constant(64, 64, 3, 0.5);
  auto out = degrade(im, field, 5);
  // Unclamped entries carry exactly the drawn noise.
  for (Index i = 0; i < out.data.size(); ++i)
    if (out.data(i) > 0.0 && out.data(i) < 1.0) REQUIRE(out.data(i) == doctest::Approx(0.5 + n(i)));
}

TEST_CASE("degrade is deterministic, seed-sensitive and stays in range") {
  auto im = random_image(64, 64, 3, 2);
  auto field = make_noise_field(DegradationSpec::uniform(0.3), 64, 64);
  auto a = degrade(im, field, 11);
  auto b = degrade(im, field, 11);
  auto c = degrade(im, field, 12);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  CHECK(a.in_unit_range());
}

TEST_CASE("degrade rejects a mismatched field") {
  auto im = random_image(4, 4, 3, 3);
  CHECK_THROWS_AS(degrade(im, make_noise_field(DegradationSpec::uniform(0.1), 4, 5), 0), ShapeError);
  CHECK_THROWS_AS(Image<double>(0, 3, 3), ShapeError);
}

TEST_CASE("psnr reference values") {
  auto zero = Image<double>::constant(4, 4, 3, 0.0);
  auto one = Image<double>::constant(4, 4, 3, 1.0);
  CHECK(psnr(zero, zero) == std::numeric_limits<double>::infinity());
  CHECK(psnr(zero, one) == doctest::Approx(0.0));
  CHECK(psnr(Image<double>::constant(4, 4, 3, 0.5), Image<double>::constant(4, 4, 3, 0.6)) ==
        doctest::Approx(20.0));
  CHECK_THROWS_AS(psnr(zero, Image<double>::constant(4, 5, 3, 0.0)), ShapeError);
}

TEST_CASE("gamma correction") {
  Matrix<double> m(1, 4);
  m << 0.0, 0.25, 1.0, 0.7;
  CHECK(gamma_correct(m, 1.0) == m);
  auto g = gamma_correct(m, 0.5);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == doctest::Approx(0.5));
  CHECK(g(0, 2) == 1.0);
  CHECK(gamma_correct(m, 3.0)(0, 2) == 1.0);
  CHECK_THROWS_AS(gamma_correct(m, 0.0), ConfigError);
  CHECK_THROWS_AS(gamma_correct(m, -1.0), ConfigError);
}
