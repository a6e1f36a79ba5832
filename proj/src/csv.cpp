#include "smallarea/csv.hpp"

#include <charconv>
#include <istream>

#include "smallarea/error.hpp"

namespace smallarea::csv {

Reader::Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

void Reader::expect_header(const std::vector<std::string>& expected) {
  std::string raw;
  if (!std::getline(in_, raw)) {
    fail(ErrorKind::schema, source_ + ": missing header row");
  }
  line_ = 1;
  if (!raw.empty() && raw.back() == '\r') raw.pop_back();
  // Tolerate a UTF-8 byte-order mark.
  if (raw.size() >= 3 && raw.compare(0, 3, "\xEF\xBB\xBF") == 0) raw.erase(0, 3);
  header_ = split_record(raw);
  for (const auto& column : expected) {
    bool found = false;
    for (const auto& h : header_) found = found || h == column;
    if (!found) fail(ErrorKind::schema, source_ + ": missing required column '" + column + "'");
  }
  if (header_ != expected) {
    fail(ErrorKind::schema, source_ + ": header must be exactly '" + join_record(expected) + "'");
  }
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    fields = split_record(raw);
    if (fields.size() != header_.size()) {
      fail(ErrorKind::schema, source_ + " line " + std::to_string(line_) + ": expected " +
                                  std::to_string(header_.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    return true;
  }
  return false;
}

void Reader::fail_at(std::string_view column, const std::string& message) const {
  fail(ErrorKind::schema, source_ + " line " + std::to_string(line_) + ", column " +
                              std::string(column) + ": " + message);
}

std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string join_record(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") == std::string::npos) {
      out += f;
      continue;
    }
    out.push_back('"');
    for (char c : f) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    out.push_back('"');
  }
  return out;
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace smallarea::csv
