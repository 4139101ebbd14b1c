#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace g2i::detail {

/// Little-endian field I/O for the binary trace and event formats.
inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes;
  for (int k = 0; k < 4; ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

/// Reader that tracks its byte offset so truncation errors can name it.
class ByteReader {
public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const noexcept { return offset_; }

  void read(char* buffer, std::size_t size, const char* what) {
    in_.read(buffer, static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) {
      throw std::runtime_error(std::string("truncated file: expected ") + what + " at byte offset " +
                               std::to_string(offset_));
    }
    offset_ += size;
  }

  std::uint32_t u32(const char* what) {
    std::array<unsigned char, 4> b;
    read(reinterpret_cast<char*>(b.data()), b.size(), what);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | b[k];
    return v;
  }

  std::uint64_t u64(const char* what) {
    std::array<unsigned char, 8> b;
    read(reinterpret_cast<char*>(b.data()), b.size(), what);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

} // namespace g2i::detail
