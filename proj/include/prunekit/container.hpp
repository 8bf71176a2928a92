#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "prunekit/errors.hpp"

namespace prunekit {

// Single on-disk container used by checkpoints, datasets and statistics
// files: magic, format version, tagged sections, trailing CRC-32.
//
//   bytes 0..7   magic "PRUNEKIT"
//   u32          format version (currently 1)
//   u32          section count
//   per section: tag (8 bytes, space padded), u64 payload length, payload
//   u32          CRC-32 (IEEE) over everything before it
//
// All integers little-endian. Floats are stored as IEEE-754 32-bit values
// so a save/load round trip is bit exact.

inline constexpr char kContainerMagic[8] = {'P', 'R', 'U', 'N', 'E', 'K', 'I', 'T'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct Section {
  std::string tag;  // at most 8 bytes
  std::vector<std::uint8_t> payload;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> write_container(const std::vector<Section>& sections);
std::vector<Section> read_container(std::span<const std::uint8_t> bytes);

void save_container_file(const std::string& path, const std::vector<Section>& sections);
std::vector<Section> load_container_file(const std::string& path);

const Section& find_section(const std::vector<Section>& sections, const std::string& tag);
const Section* find_section_opt(const std::vector<Section>& sections, const std::string& tag);

// --------------------------------------------------------------------------
// Little-endian scalar encoding helpers.

class ByteWriter {
 public:
  std::vector<std::uint8_t> take() { return std::move(bytes_); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::span<const std::uint8_t> data) {
    bytes_.insert(bytes_.end(), data.begin(), data.end());
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    auto b = take(n);
    return std::string(b.begin(), b.end());
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      fail(ErrorCategory::format, "truncated payload: wanted " + std::to_string(n) +
                                      " bytes at offset " + std::to_string(pos_));
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace prunekit
