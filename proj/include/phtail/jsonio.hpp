// Deterministic JSON output. Keys keep insertion order and doubles print with
// 17 significant digits, so artifact files are byte-stable across reruns and
// round-trip through strtod without loss.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace phtail {

// Formats a finite double with %.17g. Non-finite values throw.
std::string format_double(double v);

class JsonWriter {
 public:
  explicit JsonWriter(int indent = 2) : indent_(indent) {}

  void begin_object();
  void end_object();
  void begin_array();
  void end_array();
  void key(std::string_view k);
  void number(double v);
  void integer(long long v);
  void string(std::string_view v);
  void boolean(bool v);
  void null();

  // Convenience for "key": value pairs.
  void field(std::string_view k, double v) { key(k); number(v); }
  void field(std::string_view k, long long v) { key(k); integer(v); }
  void field(std::string_view k, int v) { key(k); integer(v); }
  void field(std::string_view k, std::string_view v) { key(k); string(v); }
  // Keeps string literals away from the bool overload.
  void field(std::string_view k, const char* v) { key(k); string(v); }
  void field(std::string_view k, bool v) { key(k); boolean(v); }

  // Finalizes the document (trailing newline) and returns the buffer.
  std::string take();

 private:
  void value_prefix();
  void newline_indent(std::size_t depth);

  std::string out_;
  std::vector<bool> container_is_array_;
  std::vector<bool> container_has_items_;
  bool after_key_ = false;
  int indent_;
};

void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

}  // namespace phtail
