#pragma once

// Little-endian binary encode/decode helpers shared by the container
// writers. Readers raise truncated_payload when the buffer runs out.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "wpool/error.hpp"

namespace wpool::detail {

struct ByteWriter {
  std::vector<uint8_t> buf;

  void u8(uint8_t v) { buf.push_back(v); }
  void u16(uint16_t v) { raw(&v, 2); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i8(int8_t v) { buf.push_back(uint8_t(v)); }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(std::span<const uint8_t> s) { buf.insert(buf.end(), s.begin(), s.end()); }

 private:
  void raw(const void* p, size_t n) {
    static_assert(std::endian::native == std::endian::little, "little-endian host expected");
    const auto* b = static_cast<const uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  }
};

struct ByteReader {
  std::span<const uint8_t> buf;
  size_t pos = 0;

  explicit ByteReader(std::span<const uint8_t> b) : buf(b) {}

  size_t remaining() const { return buf.size() - pos; }
  void demand(size_t n) const {
    if (remaining() < n) fail(Errc::truncated_payload, "payload truncated");
  }
  // guard count-driven allocations against corrupted headers
  void demand_elems(uint64_t count, size_t elem_bytes) const {
    if (count > remaining() / elem_bytes)
      fail(Errc::truncated_payload, "payload shorter than declared element count");
  }
  uint8_t u8() {
    demand(1);
    return buf[pos++];
  }
  uint16_t u16() { return uint16_t(take(2)); }
  uint32_t u32() { return uint32_t(take(4)); }
  uint64_t u64() { return take(8); }
  int8_t i8() { return int8_t(u8()); }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::span<const uint8_t> bytes(size_t n) {
    demand(n);
    auto s = buf.subspan(pos, n);
    pos += n;
    return s;
  }

 private:
  uint64_t take(size_t n) {
    demand(n);
    uint64_t v = 0;
    for (size_t i = 0; i < n; ++i) v |= uint64_t(buf[pos + i]) << (8 * i);
    pos += n;
    return v;
  }
};

inline void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) fail(Errc::io_error, "write failed: " + path.string());
}

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(Errc::io_error, "cannot open for reading: " + path.string());
  const std::streamsize n = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes;
  bytes.resize(size_t(n));
  in.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!in) fail(Errc::io_error, "read failed: " + path.string());
  return bytes;
}

}  // namespace wpool::detail
