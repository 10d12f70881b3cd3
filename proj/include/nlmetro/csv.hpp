#pragma once
// Minimal CSV support for the datasets this project writes: comma
// separated, no quoting (fields never contain commas), '#' comment lines.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace nlmetro::csv {

//! Shortest decimal text that reads back to the same double.
std::string format(double value);

class Writer {
public:
  //! `schema` goes into a leading "# schema: ..." comment line.
  Writer(std::ostream &out, std::vector<std::string> columns,
         const std::string &schema = {});

  Writer &operator<<(double value);
  Writer &operator<<(const std::string &value);
  Writer &operator<<(long long value);
  //! Terminates the row; throws InvalidConfig if the column count is off.
  void end_row();

private:
  void separator();
  std::ostream &out_;
  std::size_t columns_ = 0;
  std::size_t filled_ = 0;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::string schema; // from the "# schema:" line, if any

  //! Index of a column; throws InvalidConfig when missing.
  std::size_t column(const std::string &name) const;
  double number(std::size_t row, const std::string &name) const;
  const std::string &text(std::size_t row, const std::string &name) const;
};

Table parse(std::istream &in, const std::string &source = "<stream>");
Table read(const std::filesystem::path &path);

} // namespace nlmetro::csv
