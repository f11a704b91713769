#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include <unistd.h>

#include "countvqa/errors.hpp"
#include "json.hpp"

namespace countvqa {

using json = nlohmann::json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline json parse_json_text(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what(),
                     e.byte);
  }
}

/// Calls `fn(object, line_number)` for every non-blank line. Parse errors carry
/// the byte offset within the file.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      const std::size_t at = line_start + (e.byte > 0 ? e.byte - 1 : 0);
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON at byte " +
                           std::to_string(at),
                       at);
    }
    fn(obj, line_no);
  }
}

/// Throws SchemaError unless `obj["schema"] == expected`.
inline void require_schema(const json& obj, std::string_view expected, const std::string& where) {
  auto it = obj.find("schema");
  if (it == obj.end() || !it->is_string() || it->get<std::string>() != expected) {
    const std::string got = (it == obj.end()) ? "<missing>" : it->dump();
    throw SchemaError(where + ": expected schema \"" + std::string(expected) + "\", got " + got);
  }
}

/// Writes to a sibling temp file and renames it over the target on commit().
/// An uncommitted file is removed on destruction, so the final name never
/// holds partial output.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path target)
      : target_(std::move(target)),
        tmp_(target_.string() + ".tmp." + std::to_string(::getpid())) {
    if (target_.has_parent_path()) std::filesystem::create_directories(target_.parent_path());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError("cannot write " + tmp_.string());
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  std::ofstream& stream() { return out_; }

  void write_line(const json& obj) { out_ << obj.dump() << '\n'; }

  void commit() {
    out_.flush();
    if (!out_) throw DataError("write failed for " + tmp_.string());
    out_.close();
    std::filesystem::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  std::filesystem::path target_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  AtomicFile f(path);
  f.stream() << text;
  f.commit();
}

inline void write_json_atomic(const std::filesystem::path& path, const json& obj) {
  write_text_atomic(path, obj.dump(2) + "\n");
}

}  // namespace countvqa
