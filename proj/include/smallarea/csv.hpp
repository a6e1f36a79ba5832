#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smallarea::csv {

/// Line-oriented reader for the comma-delimited files used throughout the
/// toolkit. Double-quoted fields are accepted; embedded newlines are not.
class Reader {
 public:
  Reader(std::istream& in, std::string source);

  /// Reads the header row and checks it equals `expected` column for column.
  void expect_header(const std::vector<std::string>& expected);

  /// Advances to the next non-empty record. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  /// 1-based line number of the record most recently returned.
  std::size_t line() const noexcept { return line_; }
  const std::string& source() const noexcept { return source_; }

  /// "<source> line <n>, column <name>: <message>"
  [[noreturn]] void fail_at(std::string_view column, const std::string& message) const;

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
  std::vector<std::string> header_;
};

std::vector<std::string> split_record(std::string_view line);
std::string join_record(const std::vector<std::string>& fields);

std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace smallarea::csv
