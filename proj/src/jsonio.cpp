#include "phtail/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phtail {

std::string format_double(double v) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument("format_double: value must be finite");
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void JsonWriter::newline_indent(std::size_t depth) {
  out_.push_back('\n');
  out_.append(depth * static_cast<std::size_t>(indent_), ' ');
}

void JsonWriter::value_prefix() {
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (container_is_array_.empty()) return;
  if (!container_is_array_.back()) {
    throw std::logic_error("JsonWriter: object member written without a key");
  }
  if (container_has_items_.back()) out_.push_back(',');
  container_has_items_.back() = true;
  newline_indent(container_is_array_.size());
}

void JsonWriter::begin_object() {
  value_prefix();
  out_.push_back('{');
  container_is_array_.push_back(false);
  container_has_items_.push_back(false);
}

void JsonWriter::end_object() {
  const bool had_items = container_has_items_.back();
  container_is_array_.pop_back();
  container_has_items_.pop_back();
  if (had_items) newline_indent(container_is_array_.size());
  out_.push_back('}');
}

void JsonWriter::begin_array() {
  value_prefix();
  out_.push_back('[');
  container_is_array_.push_back(true);
  container_has_items_.push_back(false);
}

void JsonWriter::end_array() {
  const bool had_items = container_has_items_.back();
  container_is_array_.pop_back();
  container_has_items_.pop_back();
  if (had_items) newline_indent(container_is_array_.size());
  out_.push_back(']');
}

void JsonWriter::key(std::string_view k) {
  if (container_is_array_.empty() || container_is_array_.back()) {
    throw std::logic_error("JsonWriter: key outside of an object");
  }
  if (container_has_items_.back()) out_.push_back(',');
  container_has_items_.back() = true;
  newline_indent(container_is_array_.size());
  out_.push_back('"');
  for (char c : k) out_.push_back(c);  // keys are plain identifiers here
  out_.append("\": ");
  after_key_ = true;
}

void JsonWriter::number(double v) {
  value_prefix();
  out_.append(format_double(v));
}

void JsonWriter::integer(long long v) {
  value_prefix();
  out_.append(std::to_string(v));
}

void JsonWriter::string(std::string_view v) {
  value_prefix();
  out_.push_back('"');
  for (char c : v) {
    switch (c) {
      case '"': out_.append("\\\""); break;
      case '\\': out_.append("\\\\"); break;
      case '\n': out_.append("\\n"); break;
      case '\t': out_.append("\\t"); break;
      case '\r': out_.append("\\r"); break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out_.append(buf);
        } else {
          out_.push_back(c);
        }
    }
  }
  out_.push_back('"');
}

void JsonWriter::boolean(bool v) {
  value_prefix();
  out_.append(v ? "true" : "false");
}

void JsonWriter::null() {
  value_prefix();
  out_.append("null");
}

std::string JsonWriter::take() {
  if (!container_is_array_.empty()) {
    throw std::logic_error("JsonWriter: unbalanced containers at take()");
  }
  out_.push_back('\n');
  return std::move(out_);
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace phtail
