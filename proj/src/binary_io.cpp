#include "posedp/binary_io.hpp"

#include <array>
#include <bit>
#include <stdexcept>

namespace posedp {

namespace {

constexpr std::uint32_t kMaxArray = 1u << 28;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw std::runtime_error("unexpected end of binary stream");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(buf[i]) << (8 * i);
  }
  return value;
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f32(float v) { put_le(out_, std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::bytes(std::string_view raw) {
  out_.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

void BinaryWriter::text(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}

void BinaryWriter::floats(std::span<const float> values) {
  u32(static_cast<std::uint32_t>(values.size()));
  for (float v : values) f32(v);
}

std::uint32_t BinaryReader::u32() { return get_le<std::uint32_t>(in_); }
std::uint64_t BinaryReader::u64() { return get_le<std::uint64_t>(in_); }
float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

std::string BinaryReader::bytes(std::size_t n) {
  std::string s(n, '\0');
  in_.read(s.data(), static_cast<std::streamsize>(n));
  if (!in_) throw std::runtime_error("unexpected end of binary stream");
  return s;
}

std::string BinaryReader::text() {
  const auto n = u32();
  if (n > kMaxArray) throw std::runtime_error("binary text block too long");
  return bytes(n);
}

std::vector<float> BinaryReader::floats() {
  const auto n = u32();
  if (n > kMaxArray) throw std::runtime_error("binary float array too long");
  std::vector<float> out(n);
  for (auto& v : out) v = f32();
  return out;
}

std::vector<float> BinaryReader::floats(std::size_t expected, const char* what) {
  auto out = floats();
  if (out.size() != expected) {
    throw std::runtime_error(std::string("binary array '") + what + "' has " +
                             std::to_string(out.size()) + " values, expected " +
                             std::to_string(expected));
  }
  return out;
}

}  // namespace posedp
