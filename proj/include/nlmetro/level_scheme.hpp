#pragma once

#include <string>
#include <vector>

#include "nlmetro/atomic_data.hpp"

namespace nlmetro::atomic {

struct Level {
  std::string label; // e.g. "g1(+1)", "e3(-2)"
  bool excited = false;
  int f = 0;
  int m = 0;
  //! Bare energy (rad/s): ground F=1 at 0, ground F=2 at the hyperfine
  //! splitting, excited F' relative to F'=0. The probe detuning is applied
  //! by the Hamiltonian, never stored here.
  double energy = 0.0;
};

//! The 24 magnetic sublevels of the D2 line: ground F=1 (3), F=2 (5), then
//! excited F'=0..3 (1+3+5+7). Within a manifold m runs from -F to +F.
class LevelScheme {
public:
  explicit LevelScheme(const AtomicData &data);

  std::size_t size() const { return levels_.size(); }
  const Level &operator[](std::size_t i) const { return levels_[i]; }
  const std::vector<Level> &levels() const { return levels_; }

  //! Index of |F, m> in the ground or excited manifold. Throws on bad input.
  std::size_t ground(int f, int m) const;
  std::size_t excited(int f, int m) const;

  std::size_t ground_count() const { return 8; }

  double gamma() const { return gamma_; }           // rad/s
  double wavelength() const { return wavelength_; } // m
  double wavenumber() const;                        // rad/m
  double omega() const;                             // rad/s
  double reduced_dipole() const { return reduced_dipole_; }
  //! Excited manifold offsets relative to F'=0 (rad/s), F' = 0..3.
  double excited_offset(int f) const;
  double ground_splitting() const { return ground_hfs_; }

  //! Angular detunings (relative to F=1 -> F'=0) at which the probe is
  //! resonant with an allowed transition |F - F'| <= 1.
  std::vector<double> resonances() const;

  const AtomicData &data() const { return data_; }

private:
  AtomicData data_;
  std::vector<Level> levels_;
  double gamma_ = 0.0;
  double wavelength_ = 0.0;
  double reduced_dipole_ = 0.0;
  double ground_hfs_ = 0.0;
};

LevelScheme build_level_scheme(const AtomicData &data);
LevelScheme build_level_scheme();

} // namespace nlmetro::atomic
