#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "nvc/kernels.hpp"
#include "nvc/video_io.hpp"
#include "test_support.hpp"

using namespace nvc;
using namespace nvc::video;

namespace {

// Serializes a raw Y4M stream from YCbCr planes.
std::string make_y4m_bytes(const std::string& header,
                           const std::vector<Yuv420Frame>& frames) {
  std::ostringstream out;
  out << header << "\n";
  for (const auto& f : frames) {
    out << "FRAME\n";
    out.write(reinterpret_cast<const char*>(f.y.data()), std::streamsize(f.y.size()));
    out.write(reinterpret_cast<const char*>(f.cb.data()), std::streamsize(f.cb.size()));
    out.write(reinterpret_cast<const char*>(f.cr.data()), std::streamsize(f.cr.size()));
  }
  return out.str();
}

Yuv420Frame random_yuv_frame(std::mt19937_64& rng, int w, int h) {
  Yuv420Frame f;
  f.width = w;
  f.height = h;
  std::uniform_int_distribution<int> yd(16, 235), cd(16, 240);
  f.y.resize(size_t(w) * h);
  f.cb.resize(size_t(w / 2) * (h / 2));
  f.cr.resize(size_t(w / 2) * (h / 2));
  for (auto& v : f.y) v = uint8_t(yd(rng));
  for (auto& v : f.cb) v = uint8_t(cd(rng));
  for (auto& v : f.cr) v = uint8_t(cd(rng));
  return f;
}

}  // namespace

TEST_CASE("y4m: header parsing extracts extents and exact frame rate") {
  std::mt19937_64 rng(31);
  const auto bytes = make_y4m_bytes("YUV4MPEG2 W352 H288 F30000:1001 Ip A1:1 C420",
                                    {random_yuv_frame(rng, 352, 288)});
  std::istringstream in(bytes);
  const VideoSequence v = read_y4m(in);
  CHECK(v.width() == 352);
  CHECK(v.height() == 288);
  CHECK(v.fps.num == 30000);
  CHECK(v.fps.den == 1001);
  CHECK(v.frame_count() == 1);
  CHECK(v.source_color == SourceColor::kYuv420);
}

TEST_CASE("y4m: limited-range white maps to RGB (1,1,1)") {
  Yuv420Frame f;
  f.width = 4;
  f.height = 4;
  f.y.assign(16, 235);
  f.cb.assign(4, 128);
  f.cr.assign(4, 128);
  const Tensor rgb = yuv420_to_rgb(f);
  for (float v : rgb.vec()) CHECK(v == doctest::Approx(1.0f).epsilon(0.01));
}

TEST_CASE("y4m: bad magic raises a format error") {
  std::istringstream in("YUVINVALID W4 H4 F25:1\n");
  CHECK_THROWS_AS(read_y4m(in), FormatError);
}

TEST_CASE("y4m: unsupported subsampling names the tag") {
  std::mt19937_64 rng(32);
  const auto bytes =
      make_y4m_bytes("YUV4MPEG2 W8 H8 F25:1 C444", {random_yuv_frame(rng, 8, 8)});
  std::istringstream in(bytes);
  try {
    read_y4m(in);
    FAIL("expected UnsupportedError");
  } catch (const UnsupportedError& e) {
    CHECK(std::string(e.what()).find("C444") != std::string::npos);
  }
}

TEST_CASE("y4m: truncated frame payload is rejected without partial frames") {
  std::mt19937_64 rng(33);
  auto bytes = make_y4m_bytes("YUV4MPEG2 W16 H16 F25:1 C420",
                              {random_yuv_frame(rng, 16, 16)});
  bytes.resize(bytes.size() - 40);
  std::istringstream in(bytes);
  CHECK_THROWS_AS(read_y4m(in), FormatError);
}

TEST_CASE("y4m: fps 25/1 formats as F25:1") {
  VideoSequence v;
  v.fps = {25, 1};
  v.frames.push_back(Tensor({1, 3, 4, 4}, 0.5f));
  std::ostringstream out;
  write_y4m(v, out);
  CHECK(out.str().find("F25:1") != std::string::npos);
}

TEST_CASE("y4m: empty frame list is a format error") {
  VideoSequence v;
  std::ostringstream out;
  CHECK_THROWS_AS(write_y4m(v, out), FormatError);
}

TEST_CASE("y4m: odd extents violate the 4:2:0 contract") {
  VideoSequence v;
  v.frames.push_back(Tensor({1, 3, 5, 4}, 0.5f));
  std::ostringstream out;
  CHECK_THROWS_AS(write_y4m(v, out), ContractError);
}

TEST_CASE("y4m: write-read round trip within 2/255 on 4:2:0 content") {
  // Random smooth in-gamut frames, passed through the writer/reader once so
  // the sequence is 4:2:0-representable, then round-tripped. (Arbitrary
  // per-pixel chroma cannot survive 4:2:0 subsampling; the tolerance is
  // about color conversion, not about inventing information.)
  std::mt19937_64 rng(34);
  VideoSequence v0;
  v0.fps = {30, 1};
  for (int i = 0; i < 3; ++i) {
    const Tensor base = test::random_tensor(rng, {1, 3, 4, 4}, 0.15f, 0.85f);
    v0.frames.push_back(
        kernels::resize(base, 16, 16, kernels::ResizeMode::kBilinear));
  }
  std::ostringstream pre;
  write_y4m(v0, pre);
  std::istringstream pre_in(pre.str());
  const VideoSequence v = read_y4m(pre_in);

  std::ostringstream out;
  write_y4m(v, out);
  std::istringstream back_in(out.str());
  const VideoSequence v2 = read_y4m(back_in);

  REQUIRE(v2.frame_count() == 3);
  float max_err = 0.0f;
  for (int i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < v.frames[i].numel(); ++j) {
      max_err = std::max(max_err,
                         std::fabs(v.frames[i].data()[j] - v2.frames[i].data()[j]));
    }
  }
  CHECK(max_err <= 2.0f / 255.0f);
}

TEST_CASE("color conversion round trip within 2/255 for chroma-constant frames") {
  // Full-resolution luma detail survives exactly; constant chroma makes the
  // subsampling lossless, isolating the matrix + quantization error.
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<float> lum(0.0f, 1.0f);
  Tensor rgb({1, 3, 16, 16});
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const float g = lum(rng);
      rgb.at(0, 0, y, x) = g;
      rgb.at(0, 1, y, x) = g;
      rgb.at(0, 2, y, x) = g;
    }
  }
  const Tensor back = yuv420_to_rgb(rgb_to_yuv420(rgb));
  for (int64_t i = 0; i < rgb.numel(); ++i) {
    CHECK(std::fabs(back.data()[i] - rgb.data()[i]) <= 2.0f / 255.0f);
  }
}

TEST_CASE("reader never emits samples outside [0,1]") {
  std::mt19937_64 rng(36);
  // Adversarial planes: extreme code values, including out-of-range ones.
  Yuv420Frame f;
  f.width = 8;
  f.height = 8;
  std::uniform_int_distribution<int> full(0, 255);
  f.y.resize(64);
  f.cb.resize(16);
  f.cr.resize(16);
  for (auto& v : f.y) v = uint8_t(full(rng));
  for (auto& v : f.cb) v = uint8_t(full(rng));
  for (auto& v : f.cr) v = uint8_t(full(rng));
  const Tensor rgb = yuv420_to_rgb(f);
  for (float v : rgb.vec()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("nvcr fixture round trip is bit-exact") {
  std::mt19937_64 rng(37);
  VideoSequence v;
  v.fps = {30000, 1001};
  for (int i = 0; i < 3; ++i) {
    v.frames.push_back(test::random_tensor(rng, {1, 3, 6, 8}, 0.0f, 1.0f));
  }
  std::ostringstream out;
  write_nvcr(v, out);
  std::istringstream in(out.str());
  const VideoSequence v2 = read_nvcr(in);
  REQUIRE(v2.frame_count() == 3);
  CHECK(v2.fps == v.fps);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::memcmp(v2.frames[i].data(), v.frames[i].data(),
                      size_t(v.frames[i].numel()) * 4) == 0);
  }
}
