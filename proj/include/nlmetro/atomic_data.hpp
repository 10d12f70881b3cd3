#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

namespace nlmetro::atomic {

//! Physical constants (CODATA 2018, exact where defined).
namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double c = 299792458.0;
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double epsilon0 = 8.8541878128e-12;
inline constexpr double mu0 = 1.25663706212e-6;
inline constexpr double z0 = 376.730313668; // vacuum impedance, ohm
} // namespace constants

//! Line constants loaded from the versioned data file. Frequencies are
//! linear (Hz); angular conversions happen in the level scheme.
struct AtomicData {
  std::string species;
  int nuclear_spin_x2 = 0;
  int ground_j_x2 = 0;
  int excited_j_x2 = 0;
  double ground_hfs_hz = 0.0;
  std::array<double, 4> excited_hz{}; // F' = 0..3 relative to centroid
  double linewidth_hz = 0.0;
  double wavelength_m = 0.0;
  double reduced_dipole_cm = 0.0;

  std::string source;
  std::uint64_t checksum = 0;
};

std::filesystem::path default_atomic_data_path();

//! Reads and validates the atomic data file (see data/rb87_d2.conf for the
//! schema). Throws InvalidConfig on missing keys or unphysical values.
AtomicData load_atomic_data(const std::filesystem::path &path);
AtomicData load_default_atomic_data();

//! Spontaneous decay rate (1/s) implied by the reduced dipole element,
//! Gamma = w^3 (2J+1)/(2J'+1) |<J||er||J'>|^2 / (3 pi eps0 hbar c^3).
double decay_rate_from_dipole(const AtomicData &data);

} // namespace nlmetro::atomic
