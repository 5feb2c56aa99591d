#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace posedp {

/// Little-endian primitive writer over an ostream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void bytes(std::string_view raw);
  /// u32 length followed by the UTF-8 bytes.
  void text(std::string_view s);
  /// u32 element count followed by little-endian float32 values.
  void floats(std::span<const float> values);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string bytes(std::size_t n);
  std::string text();
  std::vector<float> floats();
  /// Reads a float array and checks its length.
  std::vector<float> floats(std::size_t expected, const char* what);

 private:
  std::istream& in_;
};

}  // namespace posedp
