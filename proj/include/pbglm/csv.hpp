#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace pbglm {

// Streaming reader for comma-separated files with optional double-quoted
// fields ("" escapes a quote; quoted fields may span lines).
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads the next record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  // 1-based line number where the last record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

// Trim, uppercase, and collapse interior whitespace runs to one space.
std::string normalize_name(std::string_view text);

}  // namespace pbglm
