#include "nlmetro/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nlmetro/errors.hpp"

namespace nlmetro::csv {

std::string format(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

Writer::Writer(std::ostream &out, std::vector<std::string> columns,
               const std::string &schema)
    : out_(out), columns_(columns.size()) {
  if (!schema.empty())
    out_ << "# schema: " << schema << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i)
    out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void Writer::separator() {
  if (filled_ == columns_)
    throw InvalidConfig("csv: too many fields in row");
  if (filled_++ > 0)
    out_ << ',';
}

Writer &Writer::operator<<(double value) {
  separator();
  out_ << format(value);
  return *this;
}

Writer &Writer::operator<<(const std::string &value) {
  if (value.find_first_of(",\n") != std::string::npos)
    throw InvalidConfig("csv: field contains a separator: " + value);
  separator();
  out_ << value;
  return *this;
}

Writer &Writer::operator<<(long long value) {
  separator();
  out_ << value;
  return *this;
}

void Writer::end_row() {
  if (filled_ != columns_)
    throw InvalidConfig("csv: row has " + std::to_string(filled_) +
                        " fields, expected " + std::to_string(columns_));
  out_ << '\n';
  filled_ = 0;
}

namespace {

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ','))
    out.push_back(field);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

} // namespace

std::size_t Table::column(const std::string &name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name)
      return i;
  throw InvalidConfig("csv: missing column '" + name + "'");
}

const std::string &Table::text(std::size_t row, const std::string &name) const {
  return rows.at(row).at(column(name));
}

double Table::number(std::size_t row, const std::string &name) const {
  const std::string &s = text(row, name);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidConfig("csv: column '" + name + "' row " +
                        std::to_string(row) + ": not a number: '" + s + "'");
  return v;
}

Table parse(std::istream &in, const std::string &source) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (line[0] == '#') {
      const std::string tag = "# schema: ";
      if (line.rfind(tag, 0) == 0)
        t.schema = line.substr(tag.size());
      continue;
    }
    auto fields = split(line);
    if (t.columns.empty()) {
      t.columns = std::move(fields);
      continue;
    }
    if (fields.size() != t.columns.size())
      throw InvalidConfig(source + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.columns.size()) + " fields, got " +
                          std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (t.columns.empty())
    throw InvalidConfig(source + ": no header line");
  return t;
}

Table read(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidConfig("cannot open " + path.string());
  return parse(in, path.string());
}

} // namespace nlmetro::csv
