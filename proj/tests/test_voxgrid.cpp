#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "test_support.hpp"
#include "voxdiff/voxgrid.hpp"

using namespace voxdiff;

namespace {

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<std::uint8_t> header(const char* magic, std::uint8_t dtype, std::uint32_t d, std::uint32_t h,
                                 std::uint32_t w) {
  std::vector<std::uint8_t> b(magic, magic + 4);
  b.push_back(dtype);
  b.insert(b.end(), 3, 0);
  for (std::uint32_t v : {d, h, w})
    for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  return b;
}

}  // namespace

TEST_CASE("u8 file of ones decodes to ones") {
  testing::TempDir dir("vox_ones");
  auto b = header("VOX3", 0, 2, 2, 2);
  b.insert(b.end(), 8, 1);
  write_bytes(dir / "a.vox", b);
  const VoxelGrid g = read_voxel_file(dir / "a.vox");
  CHECK(g.dims() == Dims3{2, 2, 2});
  for (double v : g.values()) CHECK(v == 1.0);
}

TEST_CASE("header errors") {
  testing::TempDir dir("vox_errors");
  auto bad = header("XXXX", 0, 1, 1, 1);
  bad.push_back(0);
  write_bytes(dir / "magic.vox", bad);
  try {
    read_voxel_file(dir / "magic.vox");
    FAIL("expected BadMagic");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadMagic);
  }

  auto shortp = header("VOX3", 0, 2, 2, 2);
  shortp.insert(shortp.end(), 7, 0);
  write_bytes(dir / "short.vox", shortp);
  try {
    read_voxel_file(dir / "short.vox");
    FAIL("expected TruncatedFile");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TruncatedFile);
  }

  write_bytes(dir / "huge.vox", header("VOX3", 0, 1025, 1, 1));
  try {
    read_voxel_file(dir / "huge.vox");
    FAIL("expected DimOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimOverflow);
  }

  write_bytes(dir / "stub.vox", std::vector<std::uint8_t>{'V', 'O', 'X', '3', 0});
  CHECK_THROWS_AS(read_voxel_file(dir / "stub.vox"), Error);
}

TEST_CASE("byte layout of written files") {
  testing::TempDir dir("vox_layout");
  write_voxel_file(VoxelGrid(Dims3{2, 2, 2}), dir / "z.vox", VoxelDtype::U8);
  const auto z = file_bytes(dir / "z.vox");
  REQUIRE(z.size() == 20 + 8);
  CHECK(std::memcmp(z.data(), "VOX3", 4) == 0);
  for (std::size_t i = 20; i < z.size(); ++i) CHECK(z[i] == 0);

  write_voxel_file(VoxelGrid(Dims3{1, 1, 1}, 1.0), dir / "one.vox", VoxelDtype::F32);
  const auto one = file_bytes(dir / "one.vox");
  REQUIRE(one.size() == 24);
  CHECK(one[4] == 1);
  CHECK(one[20] == 0x00);
  CHECK(one[21] == 0x00);
  CHECK(one[22] == 0x80);
  CHECK(one[23] == 0x3F);

  write_voxel_file(VoxelGrid(Dims3{64, 64, 64}), dir / "big.vox", VoxelDtype::U8);
  CHECK(std::filesystem::file_size(dir / "big.vox") == kVoxHeaderBytes + 262144);
}

TEST_CASE("u8 round trip is lossless over random grids") {
  testing::TempDir dir("vox_rt");
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    const VoxelGrid g = testing::random_binary(Dims3{16, 16, 16}, 0.3, rng);
    write_voxel_file(g, dir / "g.vox", VoxelDtype::U8);
    CHECK(read_voxel_file(dir / "g.vox") == g);
  }
}

TEST_CASE("f32 round trip is exact to float precision across shapes") {
  testing::TempDir dir("vox_rt32");
  Rng rng(42);
  for (int i = 0; i < 20; ++i) {
    const Dims3 d{static_cast<int>(rng.uniform_int(2, 64)), static_cast<int>(rng.uniform_int(2, 64)),
                  static_cast<int>(rng.uniform_int(2, 64))};
    VoxelGrid g(d);
    for (double& v : g.values()) v = rng.normal();
    write_voxel_file(g, dir / "g.vox", VoxelDtype::F32);
    const VoxelGrid back = read_voxel_file(dir / "g.vox");
    REQUIRE(back.dims() == d);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(back.values()[k] == static_cast<double>(static_cast<float>(g.values()[k])));
  }
}

TEST_CASE("central slice prior") {
  VoxelGrid g(Dims3{3, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) g.at(1, y, x) = 1.0;
  const Prior2D p = extract_prior(g);
  CHECK(p.height() == 4);
  CHECK(p.width() == 4);
  for (double v : p.mask.values) CHECK(v == 1.0);
  CHECK(p.fluorescence == p.mask);

  VoxelGrid hollow(Dims3{3, 4, 4});
  hollow.at(0, 0, 0) = 1.0;
  try {
    extract_prior(hollow);
    FAIL("expected EmptySlice");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptySlice);
  }

  // Sphere of radius 6 centred in 16^3: the central plane is the r=6 disc at that height.
  const double c = 7.5;
  const VoxelGrid ball = testing::ball_grid(16, 6.0, 8.0, c, c);
  const Prior2D bp = extract_prior(ball);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const bool in = (y - c) * (y - c) + (x - c) * (x - c) <= 36.0;
      CHECK(bp.mask.at(y, x) == (in ? 1.0 : 0.0));
    }
}

TEST_CASE("fluorescence comes from the intensity grid when given") {
  VoxelGrid g(Dims3{4, 3, 3}, 1.0);
  VoxelGrid inten(Dims3{4, 3, 3});
  for (std::size_t k = 0; k < inten.size(); ++k) inten.values()[k] = 0.01 * static_cast<double>(k);
  const Prior2D p = extract_prior(g, &inten);
  CHECK(p.fluorescence.at(1, 2) == doctest::Approx(inten.at(2, 1, 2)));
}

TEST_CASE("prior file round trip") {
  testing::TempDir dir("prior_rt");
  Prior2D p;
  p.mask = testing::disc_mask(12, 4.0);
  p.fluorescence = Image2D(12, 12);
  for (std::size_t k = 0; k < p.fluorescence.values.size(); ++k) p.fluorescence.values[k] = (k % 7) / 8.0;
  write_prior_file(p, dir / "p.prior");
  CHECK(read_prior_file(dir / "p.prior") == p);
}

TEST_CASE("synthetic shapes") {
  SUBCASE("deterministic") {
    CHECK(synth_shape(ShapeClass::Ball, 32, 7).target == synth_shape(ShapeClass::Ball, 32, 7).target);
  }
  SUBCASE("ball volume tracks the analytic sphere") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const SynthResult r = synth_shape_detailed(ShapeClass::Ball, 32, s);
      const double rad = r.params.radius;
      CHECK(rad >= 0.2 * 32 - 1e-12);
      CHECK(rad <= 0.35 * 32 + 1e-12);
      const double analytic = 4.0 / 3.0 * std::numbers::pi * rad * rad * rad;
      CHECK(std::abs(r.sample.target->foreground_count() - analytic) / analytic < 0.05);
    }
  }
  SUBCASE("elongated shapes are elongated") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const VoxelGrid g = *synth_shape(ShapeClass::Elongated, 32, s).target;
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      std::vector<Eigen::Vector3d> pts;
      for (int z = 0; z < 32; ++z)
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x)
            if (g.at(z, y, x) > 0.5) pts.emplace_back(x, y, z);
      for (const auto& p : pts) mean += p;
      mean /= static_cast<double>(pts.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
      const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov).eigenvalues();
      CHECK(std::sqrt(ev[2] / ev[0]) >= 1.5);
    }
  }
  SUBCASE("one component and prior equals central slice") {
    for (ShapeClass c : {ShapeClass::Ball, ShapeClass::Biconcave, ShapeClass::Spiky, ShapeClass::Elongated}) {
      for (int size : {16, 24, 32}) {
        for (std::uint64_t s = 0; s < 5; ++s) {
          const Sample smp = synth_shape(c, size, s);
          const VoxelGrid& g = *smp.target;
          CHECK(g.is_binary());
          CHECK(count_components6(g) == 1);
          for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) CHECK(smp.prior.mask.at(y, x) == g.at(size / 2, y, x));
        }
      }
    }
  }
  SUBCASE("size range") {
    CHECK_THROWS_AS(synth_shape(ShapeClass::Ball, 15, 0), Error);
    CHECK_THROWS_AS(synth_shape(ShapeClass::Ball, 65, 0), Error);
    CHECK_THROWS_AS(parse_shape_class("cube"), Error);
    CHECK(parse_shape_class("spiky") == ShapeClass::Spiky);
  }
}

TEST_CASE("manifest round trip and validation") {
  testing::TempDir dir("manifest");
  Manifest m;
  for (int i = 0; i < 10; ++i) {
    m.records.push_back({"s" + std::to_string(i), "voxels/s.vox", "priors/s.prior", i % 2 ? "ball" : "spiky", i % 5});
  }
  write_manifest(m, dir / "m.csv");
  const Manifest back = read_manifest(dir / "m.csv");
  REQUIRE(back.records.size() == 10);
  CHECK(back.records[3].id == "s3");
  CHECK(back.records[3].fold == 3);
  CHECK(back.records[3].class_label == "ball");

  Manifest dup = m;
  dup.records[1].id = "s0";
  CHECK_THROWS_AS(dup.validate(), Error);
  Manifest badfold = m;
  badfold.records[0].fold = 5;
  CHECK_THROWS_AS(badfold.validate(), Error);
  Manifest missing = m;
  for (auto& r : missing.records) r.fold = r.fold == 4 ? 3 : r.fold;
  CHECK_THROWS_AS(missing.validate(), Error);
}

TEST_CASE("samples load relative to the manifest") {
  testing::TempDir dir("load");
  std::filesystem::create_directories(dir / "v");
  Manifest m;
  for (int i = 0; i < 5; ++i) {
    const Sample s = synth_shape(ShapeClass::Spiky, 16, static_cast<std::uint64_t>(i));
    const std::string id = "k" + std::to_string(i);
    write_voxel_file(*s.target, dir / ("v/" + id + ".vox"), VoxelDtype::U8);
    write_prior_file(s.prior, dir / ("v/" + id + ".prior"));
    m.records.push_back({id, "v/" + id + ".vox", "v/" + id + ".prior", "spiky", i});
  }
  write_manifest(m, dir / "manifest.csv");
  const auto samples = load_samples(read_manifest(dir / "manifest.csv"), dir / "manifest.csv");
  REQUIRE(samples.size() == 5);
  CHECK(samples[2].target == synth_shape(ShapeClass::Spiky, 16, 2).target);
  CHECK(samples[2].prior == synth_shape(ShapeClass::Spiky, 16, 2).prior);
  CHECK_FALSE(load_samples(m, dir / "manifest.csv", false)[0].target.has_value());
}
