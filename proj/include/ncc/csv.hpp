#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ncc/error.hpp"

namespace ncc {

// Minimal comma-separated reader. Fields in this engine never contain commas
// or newlines (note text travels via JSONL), so no quoting is supported.
class CsvReader {
 public:
  CsvReader(const std::string& path, const std::vector<std::string>& header)
      : path_(path), in_(path) {
    if (!in_) throw IngestError(path + ": cannot open");
    std::string line;
    if (!std::getline(in_, line)) throw IngestError(path + ": empty file");
    strip_cr(line);
    const auto cols = split(line);
    if (cols != header) {
      throw IngestError(path + ":1: header mismatch, expected '" +
                        join(header) + "' got '" + line + "'");
    }
    width_ = header.size();
  }

  // Returns false at end of file; skips blank lines.
  bool next(std::vector<std::string>& row) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      strip_cr(line);
      if (line.empty()) continue;
      row = split(line);
      if (row.size() != width_) {
        throw IngestError(context() + ": expected " + std::to_string(width_) +
                          " columns, got " + std::to_string(row.size()));
      }
      return true;
    }
    return false;
  }

  // "file:line" for error messages about the current row.
  std::string context() const { return path_ + ":" + std::to_string(line_no_); }

  size_t rows_read() const { return line_no_ - 1; }

  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        out.push_back(line.substr(start));
        break;
      }
      out.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    return out;
  }

 private:
  static void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
  }

  static std::string join(const std::vector<std::string>& cols) {
    std::string out;
    for (size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ',';
      out += cols[i];
    }
    return out;
  }

  std::string path_;
  std::ifstream in_;
  size_t width_ = 0;
  size_t line_no_ = 1;  // header was line 1
};

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(path + ": cannot open for writing");
    write_row(header);
  }

  void write_row(const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) {
      if (i) out_ << ',';
      out_ << cols[i];
    }
    out_ << '\n';
  }

  void flush() {
    out_.flush();
    if (!out_) throw Error(path_ + ": write failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace ncc
