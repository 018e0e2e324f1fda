#pragma once

// Minimal CSV reading/writing for the dataset and report schemas: comma
// separated, no quoting, LF line endings, header row required.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "wildflow/errors.hpp"

namespace wildflow::csv {

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()), in_(path, std::ios::binary) {
    if (!in_) throw MissingArtifact("cannot open " + path_);
  }

  /// Reads the next non-empty record into fields(); false at end of file.
  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      line_ = std::move(line);
      fields_.clear();
      std::size_t start = 0;
      for (;;) {
        const std::size_t comma = line_.find(',', start);
        fields_.emplace_back(std::string_view(line_).substr(start, comma == std::string::npos ? comma : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return true;
    }
    return false;
  }

  const std::vector<std::string_view>& fields() const noexcept { return fields_; }
  std::size_t line() const noexcept { return line_no_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const {
    throw ParseError(path_, line_no_, column + 1, what);
  }

  void require_width(std::size_t n) const {
    if (fields_.size() != n) {
      fail(std::min(fields_.size(), n), "expected " + std::to_string(n) + " fields, found " + std::to_string(fields_.size()));
    }
  }

  /// Checks that the header starts with `expected` and returns the remaining names.
  std::vector<std::string> header(const std::vector<std::string>& expected) {
    if (!next()) throw ParseError(path_, "missing header row");
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i >= fields_.size() || fields_[i] != expected[i]) fail(i, "header column must be '" + expected[i] + "'");
    }
    std::vector<std::string> rest;
    for (std::size_t i = expected.size(); i < fields_.size(); ++i) {
      if (fields_[i].empty()) fail(i, "empty column name");
      rest.emplace_back(fields_[i]);
    }
    return rest;
  }

  double real(std::size_t column) const {
    const std::string_view f = fields_.at(column);
    double v = 0.0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) fail(column, "invalid number '" + std::string(f) + "'");
    return v;
  }

  long integer(std::size_t column) const {
    const std::string_view f = fields_.at(column);
    long v = 0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) fail(column, "invalid integer '" + std::string(f) + "'");
    return v;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path.string()), out_(path, std::ios::binary) {
    if (!out_) throw MissingArtifact("cannot write " + path_);
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << text(fields), first = false), ...);
    out_ << '\n';
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) throw MissingArtifact("failed writing " + path_);
  }

 private:
  static std::string text(double v) { return format_double(v); }
  static std::string text(const std::string& s) { return s; }
  static std::string text(const char* s) { return s; }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string text(I v) {
    return std::to_string(v);
  }

  std::string path_;
  std::ofstream out_;
};

}  // namespace wildflow::csv
