#include "prunekit/container.hpp"

#include <array>
#include <cstdio>
#include <memory>

namespace prunekit {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  static const std::array<std::uint32_t, 256> table = make_crc_table();
  std::uint32_t c = 0xffffffffu;
  for (std::uint8_t b : bytes) c = table[(c ^ b) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

std::vector<std::uint8_t> write_container(const std::vector<Section>& sections) {
  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kContainerMagic), 8));
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const Section& s : sections) {
    if (s.tag.size() > 8) fail(ErrorCategory::format, "section tag '" + s.tag + "' exceeds 8 bytes");
    char tag[8];
    std::memset(tag, ' ', 8);
    std::memcpy(tag, s.tag.data(), s.tag.size());
    w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(tag), 8));
    w.u64(s.payload.size());
    w.raw(s.payload);
  }
  std::uint32_t crc = crc32(w.bytes());
  w.u32(crc);
  return w.take();
}

std::vector<Section> read_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 + 4 + 4 + 4) {
    fail(ErrorCategory::format, "container truncated: only " + std::to_string(bytes.size()) +
                                    " bytes");
  }
  if (std::memcmp(bytes.data(), kContainerMagic, 8) != 0) {
    fail(ErrorCategory::format, "bad magic: not a prunekit container");
  }
  // CRC covers everything except the trailing checksum itself.
  const std::span<const std::uint8_t> body = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4));
  const std::uint32_t stored_crc = tail.u32();
  const std::uint32_t actual_crc = crc32(body);
  if (stored_crc != actual_crc) {
    fail(ErrorCategory::checksum, "container checksum mismatch");
  }
  ByteReader r(body.subspan(8));
  const std::uint32_t version = r.u32();
  if (version != kContainerVersion) {
    fail(ErrorCategory::version, "container version " + std::to_string(version) +
                                     " unsupported (expected " +
                                     std::to_string(kContainerVersion) + ")");
  }
  const std::uint32_t count = r.u32();
  std::vector<Section> sections;
  sections.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto tag_bytes = r.take(8);
    std::string tag(tag_bytes.begin(), tag_bytes.end());
    while (!tag.empty() && tag.back() == ' ') tag.pop_back();
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) {
      fail(ErrorCategory::format, "container truncated inside section '" + tag + "'");
    }
    auto payload = r.take(static_cast<std::size_t>(len));
    sections.push_back(Section{tag, std::vector<std::uint8_t>(payload.begin(), payload.end())});
  }
  if (!r.done()) {
    fail(ErrorCategory::format, "trailing bytes after final section");
  }
  return sections;
}

void save_container_file(const std::string& path, const std::vector<Section>& sections) {
  std::vector<std::uint8_t> bytes = write_container(sections);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) fail(ErrorCategory::io, "cannot open '" + path + "' for writing");
  if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
    fail(ErrorCategory::io, "short write to '" + path + "'");
  }
}

std::vector<Section> load_container_file(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) fail(ErrorCategory::io, "cannot open '" + path + "'");
  std::fseek(f.get(), 0, SEEK_END);
  const long size = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  if (size < 0) fail(ErrorCategory::io, "cannot stat '" + path + "'");
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size()) {
    fail(ErrorCategory::io, "short read from '" + path + "'");
  }
  return read_container(bytes);
}

const Section* find_section_opt(const std::vector<Section>& sections, const std::string& tag) {
  for (const Section& s : sections) {
    if (s.tag == tag) return &s;
  }
  return nullptr;
}

const Section& find_section(const std::vector<Section>& sections, const std::string& tag) {
  const Section* s = find_section_opt(sections, tag);
  if (!s) fail(ErrorCategory::format, "container has no '" + tag + "' section");
  return *s;
}

}  // namespace prunekit
