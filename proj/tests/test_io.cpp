#include <doctest.h>

#include <cmath>
#include <fstream>

#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/image.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "testutil.hpp"

using namespace omniact;

TEST_CASE("pnm round trip") {
  testutil::TempDir tmp;
  Rng rng(3);

  SUBCASE("gray and rgb") {
    for (int channels : {1, 3}) {
      Image img(13, 7, channels);
      for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.below(256));
      const std::string path = tmp.file(channels == 1 ? "a.pgm" : "a.ppm");
      write_pnm(img, path);
      const Image back = read_pnm(path);
      CHECK(back.width == img.width);
      CHECK(back.height == img.height);
      CHECK(back.channels == channels);
      CHECK(back.pixels == img.pixels);
    }
  }

  SUBCASE("header comments are skipped") {
    const std::string path = tmp.file("c.pgm");
    std::ofstream out(path, std::ios::binary);
    out << "P5\n# a comment\n2 1\n# another\n255\n";
    out.put(char(7));
    out.put(char(250));
    out.close();
    const Image img = read_pnm(path);
    CHECK(img.width == 2);
    CHECK(img.pixels[1] == 250);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(read_pnm(tmp.file("missing.pgm")), Error);
    const std::string bad = tmp.file("bad.pgm");
    std::ofstream(bad) << "P2\n2 2\n255\n";
    CHECK_THROWS_AS(read_pnm(bad), Error);
    const std::string trunc = tmp.file("trunc.pgm");
    std::ofstream(trunc, std::ios::binary) << "P5\n4 4\n255\nxy";
    CHECK_THROWS_AS(read_pnm(trunc), Error);
    const std::string deep = tmp.file("deep.pgm");
    std::ofstream(deep, std::ios::binary) << "P5\n1 1\n65535\n";
    CHECK_THROWS_AS(read_pnm(deep), Error);
  }
}

TEST_CASE("tensor file round trip") {
  testutil::TempDir tmp;
  Rng rng(4);

  SUBCASE("payload survives modulo f32 quantization") {
    Tensor t({3, 4, 5});
    for (double& v : t.values) v = rng.normal();
    const std::string path = tmp.file("t.otsr");
    write_tensor(t, path);
    const Tensor back = read_tensor(path);
    REQUIRE(back.dims == t.dims);
    for (size_t i = 0; i < t.values.size(); ++i) {
      CHECK(back.values[i] ==
            doctest::Approx(t.values[i]).epsilon(1e-6));
      // Exactly the f32 value.
      CHECK(back.values[i] == static_cast<double>(static_cast<float>(t.values[i])));
    }
  }

  SUBCASE("write twice is byte identical") {
    Tensor t({2, 6});
    for (double& v : t.values) v = rng.normal();
    write_tensor(t, tmp.file("a.otsr"));
    write_tensor(t, tmp.file("b.otsr"));
    std::ifstream a(tmp.file("a.otsr"), std::ios::binary);
    std::ifstream b(tmp.file("b.otsr"), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
    CHECK(sa.size() == 4 + 4 + 4 + 2 * 4 + 12 * 4);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(read_tensor(tmp.file("none.otsr")), Error);
    const std::string bad = tmp.file("bad.otsr");
    std::ofstream(bad, std::ios::binary) << "NOPE";
    CHECK_THROWS_AS(read_tensor(bad), Error);
    const std::string trunc = tmp.file("trunc.otsr");
    {
      Tensor t({8, 8});
      write_tensor(t, trunc);
      std::error_code ec;
      std::filesystem::resize_file(trunc, 40, ec);
    }
    CHECK_THROWS_AS(read_tensor(trunc), Error);
  }
}

TEST_CASE("mapping table cache") {
  testutil::TempDir tmp;
  geometry::MappingParams params;
  params.center = {20, 22};
  params.radius_px = geometry::fisheye_radius({20, 22}, 48, 40);
  params.phi_deg = 77;
  const geometry::MappingTable table =
      geometry::build_mapping({96, 30}, params, 48, 40);

  SUBCASE("save/load round trip") {
    const std::string path = tmp.file("m.omap");
    geometry::save_mapping(table, path);
    const geometry::MappingTable back = geometry::load_mapping(path, 48, 40);
    CHECK(back.spec.width_px == 96);
    CHECK(back.spec.height_px == 30);
    REQUIRE(back.coords.size() == table.coords.size());
    for (size_t i = 0; i < table.coords.size(); ++i) {
      if (std::isnan(table.coords[i])) {
        CHECK(std::isnan(back.coords[i]));
      } else {
        CHECK(back.coords[i] == table.coords[i]);
      }
    }
  }

  SUBCASE("wrong fisheye size is rejected at load") {
    const std::string path = tmp.file("m2.omap");
    geometry::save_mapping(table, path);
    CHECK_THROWS_AS(geometry::load_mapping(path, 10, 10), Error);
  }

  SUBCASE("format header checks") {
    const std::string bad = tmp.file("bad.omap");
    std::ofstream(bad, std::ios::binary) << "JUNKJUNKJUNK";
    CHECK_THROWS_AS(geometry::load_mapping(bad, 48, 40), Error);
  }

  SUBCASE("magic and layout bytes") {
    const std::string path = tmp.file("m3.omap");
    geometry::save_mapping(table, path);
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "OMAP");
    unsigned char rest[12];
    in.read(reinterpret_cast<char*>(rest), 12);
    // version=1, w=96, h=30 little-endian.
    CHECK(rest[0] == 1);
    CHECK(rest[4] == 96);
    CHECK(rest[8] == 30);
  }
}
