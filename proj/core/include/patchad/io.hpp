#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace patchad {

// Writes to a sibling temp file, then renames over `path`. Readers see either
// the old file or the complete new one.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// %.17g formatting, round-trips every finite double.
std::string format_double(double v);

// Little-endian byte buffer writer / reader.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::string_view bytes) { buf_.append(bytes); }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  // Each read throws the error produced by on_short(section) when the buffer
  // runs out.
  std::uint8_t u8(const char* section);
  std::uint32_t u32(const char* section);
  std::uint64_t u64(const char* section);
  double f64(const char* section);
  std::string_view raw(std::size_t n, const char* section);

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* section) const;

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

// Thrown by ByteReader on truncation; callers translate it into their own error.
struct TruncatedInput {
  std::string section;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace patchad
