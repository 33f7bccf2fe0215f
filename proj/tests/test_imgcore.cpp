#include <cmath>
#include <random>

#include "abair/image.hpp"
#include "abair/image_io.hpp"
#include "abair/tensorio.hpp"
#include "doctest.h"
#include "oracles.hpp"

namespace img = abair::img;
using img::Image;
using img::Kernel2D;

TEST_CASE("derive_seed follows the splitmix64 reference sequence") {
  // Reference splitmix64 from state 0: outputs 1, 2, 3 are the mixes of
  // gamma, 2*gamma, 3*gamma.
  oracle::SplitMix64 ref{0};
  const auto first = ref.next();
  const auto second = ref.next();
  const auto third = ref.next();
  CHECK(first == 0xE220A8397B1DCDAFULL);
  CHECK(second == 0x6E789E6AA1B965F4ULL);
  CHECK(third == 0x06C45D188009454FULL);

  CHECK(img::splitmix64(0) == first);
  CHECK(img::derive_seed(0, 0) == img::splitmix64(0x9E3779B97F4A7C15ULL));
  CHECK(img::derive_seed(0, 0) == second);
  // index 1 -> master ^ 2*gamma, which is the third output
  CHECK(img::derive_seed(0, 1) == third);
  CHECK(img::derive_seed(0, 0) != img::derive_seed(0, 1));
  CHECK(img::derive_seed(12345, 9) == img::derive_seed(12345, 9));

  img::Rng rng(0);
  CHECK(rng.next() == first);
  CHECK(rng.next() == second);
}

TEST_CASE("uniform sampling") {
  img::Rng rng(3);
  CHECK(img::sample_uniform(rng, 5.0, 5.0) == 5.0);
  for (int i = 0; i < 10000; ++i) {
    const double v = img::sample_uniform(rng, -2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
  for (int i = 0; i < 1000; ++i) CHECK(img::sample_index(rng, 7) < 7);
}

TEST_CASE("gaussian sampling: sigma 0, pair caching, law of large numbers") {
  img::Rng rng(11);
  CHECK(img::sample_gaussian(rng, 0.0, 0.0) == 0.0);

  // Two normals per two uniforms: after an even number of gaussian draws the
  // stream has advanced by the same number of raw draws.
  img::Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) img::sample_gaussian(a, 0.0, 1.0);
  for (int i = 0; i < 10; ++i) b.next();
  CHECK(a.state() == b.state());

  img::Rng big(2024);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = img::sample_gaussian(big, 0.0, 1.0);
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.01);
}

TEST_CASE("convolve2d basics") {
  std::mt19937_64 gen(5);
  const auto im = oracle::random_image(gen, 7, 9, 3);
  CHECK(img::convolve2d(im, Kernel2D::identity(), img::Padding::kZero) == im);
  CHECK(img::convolve2d(im, Kernel2D::identity(), img::Padding::kReflect) == im);

  const Image flat(3, 3, 1, 0.37);
  const Kernel2D box(3, std::vector<double>(9, 1.0 / 9.0));
  const auto out = img::convolve2d(flat, box, img::Padding::kReflect);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

  CHECK_THROWS_AS(Kernel2D(4, std::vector<double>(16, 0.0)), std::invalid_argument);
}

TEST_CASE("convolve2d matches the direct quadruple-loop oracle") {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> side(1, 12), half(0, 3), chans(0, 1);
  std::normal_distribution<double> wdist(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const auto im = oracle::random_image(gen, side(gen), side(gen), chans(gen) ? 3 : 1);
    const int k = 2 * half(gen) + 1;
    std::vector<double> w(k * k);
    for (auto& v : w) v = wdist(gen);
    for (bool reflect : {false, true}) {
      const auto got = img::convolve2d(im, Kernel2D(k, w),
                                       reflect ? img::Padding::kReflect : img::Padding::kZero);
      const auto want = oracle::convolve(im, w, k, reflect);
      CHECK(oracle::max_abs_diff(got.data(), want.data()) <= 1e-12);
    }
  }
}

TEST_CASE("reflect_index mirrors without repeating the edge") {
  CHECK(img::reflect_index(-1, 5) == 1);
  CHECK(img::reflect_index(5, 5) == 3);
  CHECK(img::reflect_index(-6, 5) == 2);
  CHECK(img::reflect_index(3, 1) == 0);
  for (int n = 1; n < 6; ++n)
    for (int i = -20; i < 20; ++i) CHECK(img::reflect_index(i, n) == oracle::mirror(i, n));
}

TEST_CASE("convolution with a normalized kernel preserves constant images exactly") {
  // Holds for any padding that only replicates interior values.
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Image flat(9, 11, 3, 0.25);
    const auto k = img::motion_kernel(1 + 2 * (trial % 5), 17.0 * trial);
    const auto out = img::convolve2d(flat, k, img::Padding::kReflect);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("motion kernel rasterization") {
  const auto one = img::motion_kernel(1, 33.0);
  CHECK(one == Kernel2D::identity());

  // Hand rasterization: nine cells of the middle row.
  const auto horiz = img::motion_kernel(9, 0.0);
  REQUIRE(horiz.size() == 9);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) CHECK(horiz.at(r, c) == (r == 4 ? 1.0 / 9.0 : 0.0));

  CHECK(img::motion_kernel(9, 90.0) == horiz.transposed());
  CHECK(img::motion_kernel(10, 0.0).size() == 11);
  CHECK_THROWS_AS(img::motion_kernel(0, 0.0), std::invalid_argument);
}

TEST_CASE("property: motion kernels are normalized and symmetric under +180 degrees") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> len(1, 35);
  std::uniform_real_distribution<double> ang(0.0, 360.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = len(gen);
    const double theta = trial < 8 ? 45.0 * trial : ang(gen);
    const auto k = img::motion_kernel(d, theta);
    CHECK(k.size() % 2 == 1);
    CHECK(std::abs(k.sum() - 1.0) <= 1e-9);
    CHECK(k == img::motion_kernel(d, theta + 180.0));
    // Point symmetry about the center follows from the same geometry.
    for (int r = 0; r < k.size(); ++r)
      for (int c = 0; c < k.size(); ++c)
        CHECK(k.at(r, c) == k.at(k.size() - 1 - r, k.size() - 1 - c));
  }
}

TEST_CASE("PNG round trip at 8 and 16 bits") {
  const auto dir = oracle::scratch_dir("png_io");
  Image rgb(5, 4, 3);
  Image gray(3, 6, 1);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb.data()[i] = static_cast<double>(i * 997 % 65536) / 65535.0;
  for (std::size_t i = 0; i < gray.size(); ++i) gray.data()[i] = static_cast<double>(i * 13) / 255.0;

  img::write_png(dir / "rgb16.png", rgb, 16);
  CHECK(img::read_png(dir / "rgb16.png") == rgb);
  img::write_png(dir / "gray8.png", gray, 8);
  CHECK(img::read_png(dir / "gray8.png") == gray);

  const auto info = img::read_png_info(dir / "rgb16.png");
  CHECK(info.height == 5);
  CHECK(info.width == 4);

  // Quantization rounds halves away from zero: 0.5/65535 -> 1.
  Image half(1, 1, 1, 0.5 / 65535.0);
  img::write_png(dir / "half.png", half, 16);
  CHECK(img::read_png(dir / "half.png").data()[0] == 1.0 / 65535.0);

  CHECK_THROWS_AS(img::read_png(dir / "missing.png"), img::ImageIoError);
}

TEST_CASE("depth maps load from grayscale PNG and single-channel ABWT") {
  const auto dir = oracle::scratch_dir("depth_io");
  Image d(4, 3, 1);
  for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] = i / 11.0;
  const std::vector<abair::tensorio::NamedTensor> ts{
      abair::tensorio::NamedTensor::f64("depth", {4, 3}, {d.data().begin(), d.data().end()})};
  abair::tensorio::write_tensors(dir / "d.abwt", ts);
  CHECK(img::read_depth(dir / "d.abwt") == d);

  img::write_png(dir / "d.png", d, 16);
  CHECK(img::read_depth(dir / "d.png").height() == 4);

  img::write_png(dir / "rgb.png", Image(2, 2, 3), 8);
  CHECK_THROWS_AS(img::read_depth(dir / "rgb.png"), img::ImageIoError);
}
