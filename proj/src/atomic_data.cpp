#include "nlmetro/atomic_data.hpp"

#include <cmath>
#include <cstdlib>

#include "nlmetro/config.hpp"
#include "nlmetro/errors.hpp"

namespace nlmetro::atomic {

std::filesystem::path default_atomic_data_path() {
  if (const char *env = std::getenv("NLMETRO_ATOMIC_DATA"))
    return env;
  return std::filesystem::path(NLMETRO_DATA_DIR) / "rb87_d2.conf";
}

AtomicData load_atomic_data(const std::filesystem::path &path) {
  const KeyValueFile file = KeyValueFile::load(path);
  if (file.get_integer("schema_version") != 1)
    throw InvalidConfig(path.string() + ": unsupported schema_version");

  AtomicData d;
  d.species = file.get_string("species");
  d.nuclear_spin_x2 = static_cast<int>(file.get_integer("nuclear_spin_x2"));
  d.ground_j_x2 = static_cast<int>(file.get_integer("ground_j_x2"));
  d.excited_j_x2 = static_cast<int>(file.get_integer("excited_j_x2"));
  d.ground_hfs_hz = file.get_number("ground_hfs_mhz") * 1e6;
  for (int f = 0; f < 4; ++f)
    d.excited_hz[static_cast<std::size_t>(f)] =
        file.get_number("excited_f" + std::to_string(f) + "_mhz") * 1e6;
  d.linewidth_hz = file.get_number("linewidth_mhz") * 1e6;
  d.wavelength_m = file.get_number("wavelength_nm") * 1e-9;
  d.reduced_dipole_cm = file.get_number("reduced_dipole_cm");
  d.source = path.string();
  d.checksum = file.checksum();

  // The level scheme is built for I = 3/2, J = 1/2 -> J' = 3/2.
  if (d.nuclear_spin_x2 != 3 || d.ground_j_x2 != 1 || d.excited_j_x2 != 3)
    throw InvalidConfig(path.string() +
                        ": only I=3/2, J=1/2 -> J'=3/2 is supported");
  if (!(d.ground_hfs_hz > 0.0) || !(d.linewidth_hz > 0.0) ||
      !(d.wavelength_m > 0.0) || !(d.reduced_dipole_cm > 0.0))
    throw InvalidConfig(path.string() + ": non-positive line constant");
  for (std::size_t f = 1; f < 4; ++f)
    if (!(d.excited_hz[f] > d.excited_hz[f - 1]))
      throw InvalidConfig(path.string() +
                          ": excited hyperfine levels must be ordered F'=0<1<2<3");
  return d;
}

AtomicData load_default_atomic_data() {
  return load_atomic_data(default_atomic_data_path());
}

double decay_rate_from_dipole(const AtomicData &data) {
  using namespace constants;
  const double omega = 2.0 * pi * c / data.wavelength_m;
  const double degeneracy =
      double(data.ground_j_x2 + 1) / double(data.excited_j_x2 + 1);
  return std::pow(omega, 3) * degeneracy * data.reduced_dipole_cm *
         data.reduced_dipole_cm / (3.0 * pi * epsilon0 * hbar * c * c * c);
}

} // namespace nlmetro::atomic
