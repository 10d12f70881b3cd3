#include "nlmetro/level_scheme.hpp"

#include <cmath>

#include "nlmetro/errors.hpp"

namespace nlmetro::atomic {

namespace {
constexpr double two_pi = 2.0 * constants::pi;

std::string make_label(bool excited, int f, int m) {
  std::string s = excited ? "e" : "g";
  s += std::to_string(f);
  s += "(";
  s += (m > 0 ? "+" : "") + std::to_string(m);
  s += ")";
  return s;
}
} // namespace

LevelScheme::LevelScheme(const AtomicData &data) : data_(data) {
  gamma_ = two_pi * data.linewidth_hz;
  wavelength_ = data.wavelength_m;
  reduced_dipole_ = data.reduced_dipole_cm;
  ground_hfs_ = two_pi * data.ground_hfs_hz;

  for (int f = 1; f <= 2; ++f)
    for (int m = -f; m <= f; ++m)
      levels_.push_back({make_label(false, f, m), false, f, m,
                         f == 2 ? ground_hfs_ : 0.0});
  for (int f = 0; f <= 3; ++f)
    for (int m = -f; m <= f; ++m)
      levels_.push_back(
          {make_label(true, f, m), true, f, m, excited_offset(f)});
}

std::size_t LevelScheme::ground(int f, int m) const {
  if (f < 1 || f > 2 || std::abs(m) > f)
    throw InvalidConfig("no ground level |F=" + std::to_string(f) +
                        ", m=" + std::to_string(m) + ">");
  return f == 1 ? std::size_t(m + 1) : std::size_t(3 + m + 2);
}

std::size_t LevelScheme::excited(int f, int m) const {
  if (f < 0 || f > 3 || std::abs(m) > f)
    throw InvalidConfig("no excited level |F'=" + std::to_string(f) +
                        ", m=" + std::to_string(m) + ">");
  // F' block starts after 8 ground states and f^2 earlier excited states.
  return std::size_t(8 + f * f + m + f);
}

double LevelScheme::wavenumber() const {
  return two_pi / wavelength_;
}

double LevelScheme::omega() const {
  return two_pi * constants::c / wavelength_;
}

double LevelScheme::excited_offset(int f) const {
  const auto &hz = data_.excited_hz;
  return two_pi * (hz.at(static_cast<std::size_t>(f)) - hz[0]);
}

std::vector<double> LevelScheme::resonances() const {
  std::vector<double> out;
  for (int fg = 1; fg <= 2; ++fg)
    for (int fe = 0; fe <= 3; ++fe)
      if (std::abs(fg - fe) <= 1)
        out.push_back(excited_offset(fe) - (fg == 2 ? ground_hfs_ : 0.0));
  return out;
}

LevelScheme build_level_scheme(const AtomicData &data) {
  return LevelScheme(data);
}

LevelScheme build_level_scheme() {
  return LevelScheme(load_default_atomic_data());
}

} // namespace nlmetro::atomic
