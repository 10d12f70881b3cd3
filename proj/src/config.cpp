#include "nlmetro/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nlmetro/errors.hpp"

namespace nlmetro {

namespace {

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  };
  while (!s.empty() && is_space(s.front()))
    s.remove_prefix(1);
  while (!s.empty() && is_space(s.back()))
    s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

double parse_double(std::string_view text, const std::string &context) {
  text = trim(text);
  // std::from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  const char *first = text.data();
  const char *last = text.data() + text.size();
  if (!text.empty() && *first == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw InvalidConfig("not a finite number: '" + std::string(text) + "' (" +
                        context + ")");
  return value;
}

struct UnitEntry {
  const char *suffix;
  Dimension dim;
  double scale;
};

constexpr UnitEntry kUnits[] = {
    {"m", Dimension::length, 1.0},       {"mm", Dimension::length, 1e-3},
    {"um", Dimension::length, 1e-6},     {"nm", Dimension::length, 1e-9},
    {"s", Dimension::time, 1.0},         {"ms", Dimension::time, 1e-3},
    {"us", Dimension::time, 1e-6},       {"ns", Dimension::time, 1e-9},
    {"ps", Dimension::time, 1e-12},      {"hz", Dimension::frequency, 1.0},
    {"khz", Dimension::frequency, 1e3},  {"mhz", Dimension::frequency, 1e6},
    {"ghz", Dimension::frequency, 1e9},
};

} // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static const char *digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

double parse_quantity(std::string_view text, Dimension dim) {
  std::string_view t = trim(text);
  std::size_t split = t.size();
  while (split > 0 && std::isalpha(static_cast<unsigned char>(t[split - 1])))
    --split;
  const std::string unit = lower(trim(t.substr(split)));
  const double number = parse_double(t.substr(0, split), std::string(text));
  if (unit.empty())
    return number;
  if (dim == Dimension::none)
    throw InvalidConfig("unexpected unit '" + unit + "' in '" +
                        std::string(text) + "'");
  for (const auto &u : kUnits) {
    if (unit == u.suffix) {
      if (u.dim != dim)
        throw InvalidConfig("unit '" + unit + "' has the wrong dimension in '" +
                            std::string(text) + "'");
      return number * u.scale;
    }
  }
  throw InvalidConfig("unknown unit '" + unit + "' in '" + std::string(text) +
                      "'");
}

KeyValueFile KeyValueFile::parse(std::string_view text, std::string source) {
  KeyValueFile file;
  file.source_ = std::move(source);
  file.checksum_ = fnv1a64(text);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidConfig(file.source_ + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty())
      throw InvalidConfig(file.source_ + ":" + std::to_string(line_no) +
                          ": empty key");
    if (!file.entries_.emplace(key, value).second)
      throw InvalidConfig(file.source_ + ":" + std::to_string(line_no) +
                          ": duplicate key '" + key + "'");
    if (end == text.size())
      break;
  }
  return file;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InvalidConfig("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

bool KeyValueFile::contains(const std::string &key) const {
  return entries_.count(key) != 0;
}

const std::string &KeyValueFile::raw(const std::string &key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw InvalidConfig(source_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValueFile::get_string(const std::string &key) const {
  return raw(key);
}

std::string KeyValueFile::get_string(const std::string &key,
                                     const std::string &fallback) const {
  return contains(key) ? raw(key) : fallback;
}

double KeyValueFile::get_number(const std::string &key) const {
  return parse_double(raw(key), source_ + ":" + key);
}

double KeyValueFile::get_number(const std::string &key,
                                double fallback) const {
  return contains(key) ? get_number(key) : fallback;
}

long long KeyValueFile::get_integer(const std::string &key) const {
  const double v = get_number(key);
  if (v != std::floor(v) || std::abs(v) > 9.0e15)
    throw InvalidConfig(source_ + ": '" + key + "' must be an integer");
  return static_cast<long long>(v);
}

long long KeyValueFile::get_integer(const std::string &key,
                                    long long fallback) const {
  return contains(key) ? get_integer(key) : fallback;
}

bool KeyValueFile::get_bool(const std::string &key, bool fallback) const {
  if (!contains(key))
    return fallback;
  const std::string v = lower(raw(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on")
    return true;
  if (v == "false" || v == "0" || v == "no" || v == "off")
    return false;
  throw InvalidConfig(source_ + ": '" + key + "' must be a boolean");
}

double KeyValueFile::get_quantity(const std::string &key,
                                  Dimension dim) const {
  try {
    return parse_quantity(raw(key), dim);
  } catch (const InvalidConfig &e) {
    throw InvalidConfig(source_ + ": '" + key + "': " + e.what());
  }
}

double KeyValueFile::get_quantity(const std::string &key, Dimension dim,
                                  double fallback_si) const {
  return contains(key) ? get_quantity(key, dim) : fallback_si;
}

std::vector<double> KeyValueFile::get_list(const std::string &key) const {
  std::vector<double> out;
  std::string_view rest = raw(key);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty())
      out.push_back(parse_double(item, source_ + ":" + key));
    if (comma == std::string_view::npos)
      break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

void KeyValueFile::set(const std::string &key, const std::string &value) {
  entries_[key] = value;
}

void KeyValueFile::merge(const KeyValueFile &other) {
  for (const auto &[k, v] : other.entries_)
    entries_[k] = v;
}

std::string KeyValueFile::serialize() const {
  std::string out;
  for (const auto &[k, v] : entries_)
    out += k + " = " + v + "\n";
  return out;
}

} // namespace nlmetro
