// SCIC container: the on-disk format for cubes, masks and measurements.
//
//   magic "SCIC" | u32 version=1 | u32 n1 | u32 n2 | u32 B | u8 dtype | payload
//
// dtype 0 = f32 cube data, dtype 1 = u8 mask bits; everything little-endian,
// frame-major. Measurements are stored as B=1 f32 cubes with one extra f32
// sigma field between header and payload.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "scibdvp/core.hpp"
#include "scibdvp/measurement.hpp"
#include "scibdvp/nn.hpp"

namespace scibdvp::io {

inline constexpr std::uint32_t kScicVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  std::string buf;
  std::size_t pos = 0;
  std::string path;

  explicit Reader(const std::string& p) : path(p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("SCIC: cannot open " + p);
    buf.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("SCIC: truncated file " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<std::uint8_t>(buf[pos + i]);
    pos += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void finish() const {
    if (pos != buf.size())
      throw std::runtime_error("SCIC: trailing bytes in " + path);
  }
};

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("SCIC: cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("SCIC: short write to " + path);
}

inline std::string header(std::uint32_t n1, std::uint32_t n2, std::uint32_t B,
                          std::uint8_t dtype) {
  std::string out = "SCIC";
  put_u32(out, kScicVersion);
  put_u32(out, n1);
  put_u32(out, n2);
  put_u32(out, B);
  out.push_back(static_cast<char>(dtype));
  return out;
}

inline void read_header(Reader& r, std::uint32_t& n1, std::uint32_t& n2,
                        std::uint32_t& B, std::uint8_t& dtype) {
  r.need(4);
  if (r.buf.compare(0, 4, "SCIC") != 0)
    throw std::runtime_error("SCIC: bad magic in " + r.path);
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kScicVersion)
    throw std::runtime_error("SCIC: unsupported version " +
                             std::to_string(version) + " in " + r.path);
  n1 = r.u32();
  n2 = r.u32();
  B = r.u32();
  dtype = r.u8();
  if (n1 < 1 || n2 < 1 || B < 1)
    throw std::runtime_error("SCIC: invalid dimensions in " + r.path);
}

}  // namespace detail

inline void save_cube(const std::string& path, const VideoCube& x) {
  std::string out = detail::header(x.n1, x.n2, x.frames, 0);
  out.reserve(out.size() + x.size() * 4);
  for (double v : x.data) detail::put_f32(out, static_cast<float>(v));
  detail::write_file(path, out);
}

inline VideoCube load_cube(const std::string& path) {
  detail::Reader r(path);
  std::uint32_t n1, n2, B;
  std::uint8_t dtype;
  detail::read_header(r, n1, n2, B, dtype);
  if (dtype != 0) throw std::runtime_error("SCIC: expected f32 cube in " + path);
  VideoCube x(static_cast<int>(n1), static_cast<int>(n2), static_cast<int>(B));
  for (double& v : x.data) v = r.f32();
  r.finish();
  return x;
}

inline void save_mask(const std::string& path, const MaskCube& m) {
  std::string out = detail::header(m.n1, m.n2, m.frames, 1);
  out.reserve(out.size() + m.size());
  for (std::uint8_t b : m.bits) out.push_back(static_cast<char>(b));
  detail::write_file(path, out);
}

inline MaskCube load_mask(const std::string& path) {
  detail::Reader r(path);
  std::uint32_t n1, n2, B;
  std::uint8_t dtype;
  detail::read_header(r, n1, n2, B, dtype);
  if (dtype != 1) throw std::runtime_error("SCIC: expected u8 mask in " + path);
  MaskCube m;
  m.n1 = static_cast<int>(n1);
  m.n2 = static_cast<int>(n2);
  m.frames = static_cast<int>(B);
  m.bits.resize(m.size());
  for (auto& b : m.bits) {
    b = r.u8();
    if (b > 1) throw std::runtime_error("SCIC: non-binary mask bit in " + path);
  }
  r.finish();
  return m;
}

inline void save_measurement(const std::string& path, const Measurement& y) {
  std::string out = detail::header(y.n1, y.n2, 1, 0);
  detail::put_f32(out, static_cast<float>(y.sigma));
  out.reserve(out.size() + y.size() * 4);
  for (double v : y.data) detail::put_f32(out, static_cast<float>(v));
  detail::write_file(path, out);
}

inline Measurement load_measurement(const std::string& path) {
  detail::Reader r(path);
  std::uint32_t n1, n2, B;
  std::uint8_t dtype;
  detail::read_header(r, n1, n2, B, dtype);
  if (dtype != 0 || B != 1)
    throw std::runtime_error("SCIC: expected B=1 f32 measurement in " + path);
  Measurement y(static_cast<int>(n1), static_cast<int>(n2));
  y.sigma = r.f32();
  for (double& v : y.data) v = r.f32();
  r.finish();
  return y;
}

// Debug checkpoint of model weights: one SCIC f32 section per tensor,
// concatenated. Not a stability-guaranteed format.
template <typename T>
void save_checkpoint(const std::string& path, const DVPModel<T>& m) {
  std::string out;
  auto dump = [&out](const std::vector<T>& v) {
    std::string sec =
        detail::header(static_cast<std::uint32_t>(v.size()), 1, 1, 0);
    for (T x : v) detail::put_f32(sec, static_cast<float>(x));
    out += sec;
  };
  for (const auto& blk : m.blocks) {
    dump(blk.w);
    dump(blk.b);
  }
  dump(m.head.w);
  dump(m.head.b);
  detail::write_file(path, out);
}

}  // namespace scibdvp::io
