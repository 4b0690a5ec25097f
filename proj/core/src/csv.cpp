#include "relevancer/csv.hpp"

#include "relevancer/core.hpp"

namespace relevancer::csv {

Reader::Reader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

std::optional<Row> Reader::next() {
  int c = in_.get();
  if (c == std::char_traits<char>::eof()) return std::nullopt;
  ++record_;
  Row row;
  std::string field;
  bool quoted = false;
  bool after_quote = false;
  while (true) {
    if (c == std::char_traits<char>::eof()) {
      if (quoted) {
        throw Error(Errc::kMalformedRow, "record " + std::to_string(record_) + ": unterminated quote");
      }
      row.push_back(std::move(field));
      return row;
    }
    char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == delim_) {
      row.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && in_.peek() == '\n') in_.get();
      row.push_back(std::move(field));
      return row;
    } else if (after_quote) {
      throw Error(Errc::kMalformedRow,
                  "record " + std::to_string(record_) + ": text after closing quote");
    } else if (ch == '"' && field.empty()) {
      quoted = true;
    } else {
      field.push_back(ch);
    }
    c = in_.get();
  }
}

std::string escape_field(std::string_view field, char delimiter) {
  bool needs = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) out.put(delimiter);
    out << escape_field(row[i], delimiter);
  }
  out.put('\n');
}

}  // namespace relevancer::csv
