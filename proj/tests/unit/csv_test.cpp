#include <gtest/gtest.h>

#include <sstream>

#include "relevancer/core.hpp"
#include "relevancer/csv.hpp"

using namespace relevancer;

TEST(Csv, QuotedFieldsNewlinesAndCrlf) {
  std::istringstream in("a,b,c\r\n\"x, y\",\"say \"\"hi\"\"\",\"two\nlines\"\r\nlast,,\n");
  csv::Reader r(in);
  EXPECT_EQ(*r.next(), (csv::Row{"a", "b", "c"}));
  EXPECT_EQ(*r.next(), (csv::Row{"x, y", "say \"hi\"", "two\nlines"}));
  EXPECT_EQ(*r.next(), (csv::Row{"last", "", ""}));
  EXPECT_FALSE(r.next());
}

TEST(Csv, NoTrailingNewline) {
  std::istringstream in("a,b");
  csv::Reader r(in);
  EXPECT_EQ(*r.next(), (csv::Row{"a", "b"}));
  EXPECT_FALSE(r.next());
}

TEST(Csv, Malformed) {
  std::istringstream unterminated("\"abc,d\n");
  csv::Reader r1(unterminated);
  EXPECT_THROW(r1.next(), Error);
  std::istringstream stray("\"abc\"x,d\n");
  csv::Reader r2(stray);
  EXPECT_THROW(r2.next(), Error);
}

TEST(Csv, TabDelimiter) {
  std::istringstream in("a\tb,c\n");
  csv::Reader r(in, '\t');
  EXPECT_EQ(*r.next(), (csv::Row{"a", "b,c"}));
}

TEST(Csv, WriteRoundTrip) {
  csv::Row row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::ostringstream out;
  csv::write_row(out, row);
  std::istringstream in(out.str());
  csv::Reader r(in);
  EXPECT_EQ(*r.next(), row);
  EXPECT_EQ(csv::escape_field("x"), "x");
  EXPECT_EQ(csv::escape_field("a\"b"), "\"a\"\"b\"");
}
