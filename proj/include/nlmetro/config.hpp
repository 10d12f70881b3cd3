#pragma once
// Key-value text files with unit suffixes. Used for the atomic data file,
// scenario configs and run manifests.
//
//   # comment
//   pulse.fwhm = 54 ns
//   pulse.detuning = 462 mhz
//   beam.waist = 20 um
//
// Quantities without a suffix are read in SI base units.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace nlmetro {

enum class Dimension { none, length, time, frequency };

//! Parses "54 ns", "20um", "1.5 GHz" into SI base units (m, s, Hz).
//! Frequencies stay linear (Hz); callers multiply by 2*pi where needed.
double parse_quantity(std::string_view text, Dimension dim);

class KeyValueFile {
public:
  KeyValueFile() = default;

  static KeyValueFile parse(std::string_view text,
                            std::string source = "<string>");
  static KeyValueFile load(const std::filesystem::path &path);

  bool contains(const std::string &key) const;
  const std::string &raw(const std::string &key) const;

  std::string get_string(const std::string &key) const;
  std::string get_string(const std::string &key,
                         const std::string &fallback) const;
  double get_number(const std::string &key) const;
  double get_number(const std::string &key, double fallback) const;
  long long get_integer(const std::string &key) const;
  long long get_integer(const std::string &key, long long fallback) const;
  bool get_bool(const std::string &key, bool fallback) const;
  double get_quantity(const std::string &key, Dimension dim) const;
  double get_quantity(const std::string &key, Dimension dim,
                      double fallback_si) const;
  //! Comma separated list of plain numbers.
  std::vector<double> get_list(const std::string &key) const;

  void set(const std::string &key, const std::string &value);
  //! Adds entries from `other`, overwriting existing keys.
  void merge(const KeyValueFile &other);

  const std::map<std::string, std::string> &entries() const {
    return entries_;
  }
  const std::string &source() const { return source_; }
  //! FNV-1a over the raw text the file was parsed from.
  std::uint64_t checksum() const { return checksum_; }

  //! Sorted `key = value` lines; parse(serialize()) round-trips.
  std::string serialize() const;

private:
  std::map<std::string, std::string> entries_;
  std::string source_ = "<empty>";
  std::uint64_t checksum_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

} // namespace nlmetro
