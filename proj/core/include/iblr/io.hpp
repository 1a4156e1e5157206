#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "iblr/linalg.hpp"

namespace iblr {

// 17 significant digits, locale-independent. Non-finite values print as
// nan, inf and -inf.
std::string format_double(double v);

// Minimal streaming JSON writer with two-space indentation. Non-finite
// numbers are written as null.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();
  // Row-major nested arrays; vectors are written flat.
  JsonWriter& value(const Mat& m);
  JsonWriter& value(const Vec& v);

  const std::string& str() const { return out_; }

 private:
  struct Frame {
    bool is_object;
    bool empty = true;
  };
  void before_value();
  void newline();

  std::string out_;
  std::vector<Frame> stack_;
  bool after_key_ = false;
};

std::string json_escape(std::string_view s);

// RFC 4180 quoting when needed.
std::string csv_field(std::string_view s);
std::string csv_line(const std::vector<std::string>& fields);

// Writes `content` to `path`, creating parent directories.
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Header plus one row per matrix row.
std::string matrix_csv(const Mat& m, const std::vector<std::string>& header);

}  // namespace iblr
