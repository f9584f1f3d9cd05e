#pragma once

#include <string>
#include <vector>

namespace sessionlens::csv {

// Minimal RFC-4180-ish CSV support: comma separator, double-quote quoting,
// no embedded newlines. Enough for the lexicon / correlation / report files.

std::vector<std::string> split_line(const std::string& line);

std::string quote_field(const std::string& field);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, -1 when absent.
  int column(const std::string& name) const;
};

Table read_file(const std::string& path);
Table parse(const std::string& text);

void write_file(const std::string& path, const Table& table);

// Canonical numeric formatting for feature/report CSVs: 9 significant
// digits, integral values without a trailing ".0" noise beyond that.
std::string format_value(double v);

}  // namespace sessionlens::csv
