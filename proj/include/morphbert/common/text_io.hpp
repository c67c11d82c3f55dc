#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>

namespace morphbert {

// Reads lines from a plain or gzip-compressed file (detected by content).
// Trailing "\r\n" / "\n" are stripped.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line);
  const std::filesystem::path& path() const { return path_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::filesystem::path path_;
};

// Whole-file read through the same gzip-transparent path.
std::string read_file(const std::filesystem::path& path);

// Provenance comment written atop text outputs. Contains no timestamp so
// that reruns with identical inputs produce byte-identical files.
struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_digest;

  std::string line() const;  // "# provenance: ..." without newline
};

inline constexpr std::string_view kProvenancePrefix = "# provenance:";

inline bool is_provenance_line(std::string_view line) {
  return line.substr(0, kProvenancePrefix.size()) == kProvenancePrefix;
}

std::string_view tool_version();

}  // namespace morphbert
