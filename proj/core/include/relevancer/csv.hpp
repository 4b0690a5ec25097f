#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace relevancer::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may contain the delimiter, doubled quotes
/// and line breaks. CRLF and LF line endings are both accepted.
class Reader {
 public:
  explicit Reader(std::istream& in, char delimiter = ',');

  // Returns nullopt at end of input. Throws Error(kMalformedRow) on an
  // unterminated quote or stray characters after a closing quote.
  std::optional<Row> next();
  // 1-based physical record number of the last row returned.
  std::size_t record() const noexcept { return record_; }

 private:
  std::istream& in_;
  char delim_;
  std::size_t record_ = 0;
};

std::string escape_field(std::string_view field, char delimiter = ',');
void write_row(std::ostream& out, const Row& row, char delimiter = ',');

}  // namespace relevancer::csv
