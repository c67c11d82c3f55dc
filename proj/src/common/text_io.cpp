#include "morphbert/common/text_io.hpp"

#include <stdexcept>

#include <zlib.h>

#include "morphbert/version.hpp"

namespace morphbert {

struct LineReader::Impl {
  gzFile file = nullptr;
  std::string pending;
  bool eof = false;
};

LineReader::LineReader(const std::filesystem::path& path)
    : impl_(std::make_unique<Impl>()), path_(path) {
  impl_->file = gzopen(path.c_str(), "rb");
  if (impl_->file == nullptr) {
    throw std::runtime_error("cannot open " + path.string());
  }
  gzbuffer(impl_->file, 1 << 17);
}

LineReader::~LineReader() {
  if (impl_ && impl_->file != nullptr) gzclose(impl_->file);
}

bool LineReader::next(std::string& line) {
  line.clear();
  if (impl_->eof) return false;
  char buf[1 << 14];
  bool got_any = false;
  while (true) {
    if (gzgets(impl_->file, buf, sizeof(buf)) == nullptr) {
      int err = 0;
      const char* msg = gzerror(impl_->file, &err);
      if (err != Z_OK && err != Z_STREAM_END) {
        throw std::runtime_error("read error in " + path_.string() + ": " + msg);
      }
      impl_->eof = true;
      break;
    }
    got_any = true;
    line.append(buf);
    if (!line.empty() && line.back() == '\n') break;
  }
  if (!got_any) return false;
  if (!line.empty() && line.back() == '\n') line.pop_back();
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string read_file(const std::filesystem::path& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw std::runtime_error("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(file, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(file);
  if (failed) throw std::runtime_error("read error in " + path.string());
  return out;
}

std::string Provenance::line() const {
  std::string out(kProvenancePrefix);
  out += " tool=morphbert/";
  out += tool_version();
  out += " command=" + command;
  out += " seed=" + std::to_string(seed);
  out += " config=" + (config_digest.empty() ? std::string("none") : config_digest);
  return out;
}

std::string_view tool_version() { return kVersion; }

}  // namespace morphbert
