#include "nvc/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nvc/errors.hpp"

namespace nvc::video {

namespace {

// BT.601 limited range: Y in [16, 235], chroma in [16, 240].
constexpr float kYScale = 219.0f;
constexpr float kCScale = 224.0f;
constexpr float kCrToR = 1.402f;
constexpr float kCbToB = 1.772f;
constexpr float kCbToG = 0.344136f;  // 0.114 * 1.772 / 0.587
constexpr float kCrToG = 0.714136f;  // 0.299 * 1.402 / 0.587

uint8_t quantize(float v, float lo, float hi) {
  return uint8_t(std::clamp(std::nearbyint(v), lo, hi));
}

}  // namespace

void VideoSequence::validate() const {
  contract(fps.num > 0 && fps.den > 0, "video: fps must be positive");
  for (size_t i = 0; i < frames.size(); ++i) {
    const Shape s = frames[i].shape();
    contract(s.n == 1 && s.c == 3, "video: frames must be (1,3,H,W), got " + s.str());
    contract(s.h == height() && s.w == width(), "video: frame extents differ");
    for (float v : frames[i].vec()) {
      contract(v >= 0.0f && v <= 1.0f, "video: sample outside [0,1]");
    }
  }
}

Tensor yuv420_to_rgb(const Yuv420Frame& f) {
  const int w = f.width, h = f.height;
  const int cw = w / 2, ch = h / 2;
  contract(int(f.y.size()) == w * h && int(f.cb.size()) == cw * ch &&
               int(f.cr.size()) == cw * ch,
           "yuv420_to_rgb: plane sizes inconsistent");
  Tensor rgb({1, 3, h, w});

  // Bilinear 4:2:0 -> 4:4:4 with co-sited left-top alignment: chroma sample
  // (i, j) sits on luma pixel (2i, 2j); positions past the last anchor
  // replicate it.
  auto sample_chroma = [&](const std::vector<uint8_t>& plane, int y, int x) {
    const float sy = std::min(y * 0.5f, float(ch - 1));
    const float sx = std::min(x * 0.5f, float(cw - 1));
    const int y0 = int(sy), x0 = int(sx);
    const int y1 = std::min(y0 + 1, ch - 1), x1 = std::min(x0 + 1, cw - 1);
    const float ty = sy - y0, tx = sx - x0;
    const float a = plane[y0 * cw + x0], b = plane[y0 * cw + x1];
    const float c = plane[y1 * cw + x0], d = plane[y1 * cw + x1];
    return (a + tx * (b - a)) + ty * ((c + tx * (d - c)) - (a + tx * (b - a)));
  };

  float* rp = rgb.plane(0, 0);
  float* gp = rgb.plane(0, 1);
  float* bp = rgb.plane(0, 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float yy = (float(f.y[y * w + x]) - 16.0f) / kYScale;
      const float cb = (sample_chroma(f.cb, y, x) - 128.0f) / kCScale;
      const float cr = (sample_chroma(f.cr, y, x) - 128.0f) / kCScale;
      const int64_t i = int64_t(y) * w + x;
      rp[i] = std::clamp(yy + kCrToR * cr, 0.0f, 1.0f);
      gp[i] = std::clamp(yy - kCbToG * cb - kCrToG * cr, 0.0f, 1.0f);
      bp[i] = std::clamp(yy + kCbToB * cb, 0.0f, 1.0f);
    }
  }
  return rgb;
}

Yuv420Frame rgb_to_yuv420(const Tensor& rgb) {
  const Shape s = rgb.shape();
  contract(s.n == 1 && s.c == 3, "rgb_to_yuv420: expected (1,3,H,W), got " + s.str());
  contract(s.h % 2 == 0 && s.w % 2 == 0,
           "rgb_to_yuv420: extents must be even for 4:2:0, got " + s.str());
  Yuv420Frame f;
  f.width = s.w;
  f.height = s.h;
  f.y.resize(size_t(s.w) * s.h);
  const int cw = s.w / 2, ch = s.h / 2;
  f.cb.resize(size_t(cw) * ch);
  f.cr.resize(size_t(cw) * ch);

  const float* rp = rgb.plane(0, 0);
  const float* gp = rgb.plane(0, 1);
  const float* bp = rgb.plane(0, 2);
  std::vector<float> cb444(size_t(s.w) * s.h), cr444(size_t(s.w) * s.h);
  for (int64_t i = 0; i < int64_t(s.w) * s.h; ++i) {
    const float yy = 0.299f * rp[i] + 0.587f * gp[i] + 0.114f * bp[i];
    f.y[i] = quantize(16.0f + kYScale * yy, 16.0f, 235.0f);
    cb444[i] = (bp[i] - yy) / kCbToB;
    cr444[i] = (rp[i] - yy) / kCrToR;
  }
  // Co-sited decimation: keep the sample on the even-even luma position,
  // the exact inverse of the reader's interpolation on that grid.
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      const int64_t i = int64_t(2 * y) * s.w + 2 * x;
      f.cb[y * cw + x] = quantize(128.0f + kCScale * cb444[i], 16.0f, 240.0f);
      f.cr[y * cw + x] = quantize(128.0f + kCScale * cr444[i], 16.0f, 240.0f);
    }
  }
  return f;
}

namespace {

struct Y4mHeader {
  int width = 0, height = 0;
  Rational fps{25, 1};
};

Y4mHeader parse_y4m_header(const std::string& line) {
  std::istringstream ss(line);
  std::string tag;
  ss >> tag;
  if (tag != "YUV4MPEG2") {
    throw FormatError("y4m: bad magic '" + tag + "'");
  }
  Y4mHeader h;
  std::string tok;
  while (ss >> tok) {
    if (tok.empty()) continue;
    switch (tok[0]) {
      case 'W':
        h.width = std::stoi(tok.substr(1));
        break;
      case 'H':
        h.height = std::stoi(tok.substr(1));
        break;
      case 'F': {
        const auto colon = tok.find(':');
        if (colon == std::string::npos) {
          throw FormatError("y4m: malformed frame rate token '" + tok + "'");
        }
        h.fps.num = uint32_t(std::stoul(tok.substr(1, colon - 1)));
        h.fps.den = uint32_t(std::stoul(tok.substr(colon + 1)));
        break;
      }
      case 'C': {
        const std::string sub = tok.substr(1);
        if (sub.rfind("420", 0) != 0) {
          throw UnsupportedError("y4m: unsupported subsampling tag '" + tok + "'");
        }
        break;
      }
      default:
        break;  // interlacing, aspect, and X extensions are ignored
    }
  }
  if (h.width <= 0 || h.height <= 0) {
    throw FormatError("y4m: missing or invalid W/H in header");
  }
  if (h.fps.num == 0 || h.fps.den == 0) {
    throw FormatError("y4m: invalid frame rate");
  }
  if (h.width % 2 != 0 || h.height % 2 != 0) {
    throw FormatError("y4m: 4:2:0 requires even extents, got " +
                      std::to_string(h.width) + "x" + std::to_string(h.height));
  }
  return h;
}

}  // namespace

VideoSequence read_y4m(std::istream& in) {
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw FormatError("y4m: empty stream");
  }
  const Y4mHeader h = parse_y4m_header(header_line);

  VideoSequence video;
  video.fps = h.fps;
  video.source_color = SourceColor::kYuv420;
  const size_t ysize = size_t(h.width) * h.height;
  const size_t csize = size_t(h.width / 2) * (h.height / 2);

  std::string frame_line;
  while (std::getline(in, frame_line)) {
    if (frame_line.empty()) continue;
    if (frame_line.rfind("FRAME", 0) != 0) {
      throw FormatError("y4m: expected FRAME marker, got '" + frame_line + "'");
    }
    Yuv420Frame f;
    f.width = h.width;
    f.height = h.height;
    f.y.resize(ysize);
    f.cb.resize(csize);
    f.cr.resize(csize);
    in.read(reinterpret_cast<char*>(f.y.data()), std::streamsize(ysize));
    in.read(reinterpret_cast<char*>(f.cb.data()), std::streamsize(csize));
    in.read(reinterpret_cast<char*>(f.cr.data()), std::streamsize(csize));
    if (!in) {
      throw FormatError("y4m: truncated frame payload at frame " +
                        std::to_string(video.frames.size()));
    }
    video.frames.push_back(yuv420_to_rgb(f));
  }
  if (video.frames.empty()) {
    throw FormatError("y4m: stream contains no frames");
  }
  return video;
}

void write_y4m(const VideoSequence& video, std::ostream& out) {
  if (video.frames.empty()) {
    throw FormatError("y4m: refusing to write an empty frame list");
  }
  contract(video.width() % 2 == 0 && video.height() % 2 == 0,
           "y4m: 4:2:0 requires even extents");
  out << "YUV4MPEG2 W" << video.width() << " H" << video.height() << " F"
      << video.fps.num << ":" << video.fps.den << " Ip A1:1 C420\n";
  for (const Tensor& frame : video.frames) {
    const Yuv420Frame f = rgb_to_yuv420(frame);
    out << "FRAME\n";
    out.write(reinterpret_cast<const char*>(f.y.data()), std::streamsize(f.y.size()));
    out.write(reinterpret_cast<const char*>(f.cb.data()), std::streamsize(f.cb.size()));
    out.write(reinterpret_cast<const char*>(f.cr.data()), std::streamsize(f.cr.size()));
  }
  if (!out) throw FormatError("y4m: write failed");
}

VideoSequence read_y4m_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  return read_y4m(in);
}

void write_y4m_file(const VideoSequence& video, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create file: " + path);
  write_y4m(video, out);
}

namespace {

void put_u32_stream(std::ostream& out, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = uint8_t(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32_stream(std::istream& in, const char* what) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError(std::string("nvcr: truncated reading ") + what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_nvcr(const VideoSequence& video, std::ostream& out) {
  out.write("NVCR", 4);
  put_u32_stream(out, uint32_t(video.frames.size()));
  put_u32_stream(out, 3);
  put_u32_stream(out, uint32_t(video.height()));
  put_u32_stream(out, uint32_t(video.width()));
  put_u32_stream(out, video.fps.num);
  put_u32_stream(out, video.fps.den);
  for (const Tensor& f : video.frames) {
    out.write(reinterpret_cast<const char*>(f.data()),
              std::streamsize(f.numel() * 4));
  }
  if (!out) throw FormatError("nvcr: write failed");
}

VideoSequence read_nvcr(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NVCR", 4) != 0) {
    throw FormatError("nvcr: bad magic");
  }
  const uint32_t count = get_u32_stream(in, "frame count");
  const uint32_t channels = get_u32_stream(in, "channels");
  const uint32_t height = get_u32_stream(in, "height");
  const uint32_t width = get_u32_stream(in, "width");
  VideoSequence video;
  video.fps.num = get_u32_stream(in, "fps numerator");
  video.fps.den = get_u32_stream(in, "fps denominator");
  if (channels != 3) {
    throw FormatError("nvcr: expected 3 channels, got " + std::to_string(channels));
  }
  for (uint32_t i = 0; i < count; ++i) {
    Tensor f({1, 3, int(height), int(width)});
    in.read(reinterpret_cast<char*>(f.data()), std::streamsize(f.numel() * 4));
    if (!in) throw FormatError("nvcr: truncated frame " + std::to_string(i));
    video.frames.push_back(std::move(f));
  }
  return video;
}

void write_nvcr_file(const VideoSequence& video, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create file: " + path);
  write_nvcr(video, out);
}

VideoSequence read_nvcr_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  return read_nvcr(in);
}

}  // namespace nvc::video
