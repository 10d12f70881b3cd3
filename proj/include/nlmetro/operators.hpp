#pragma once

#include <array>

#include <Eigen/Dense>

#include "nlmetro/level_scheme.hpp"

namespace nlmetro::atomic {

using Matrix = Eigen::MatrixXcd;
//! Cartesian (x, y, z) field components in Rabi-frequency units (rad/s):
//! component i is 2 <J||er||J'> E_i / hbar for E = E e^{-i w t} + c.c.
using Field = Eigen::Vector3cd;

enum Axis { x = 0, y = 1, z = 2 };

//! Dipole and spin operators on the 24-level space. Dipole matrices are in
//! units of the reduced element <J||er||J'>.
struct OperatorSet {
  //! Spherical components q = -1, 0, +1 stored at index q + 1.
  //! d_up[q](e, g) = <e|d_q|g>, d_down[q](g, e) = <g|d_q|e>.
  std::array<Matrix, 3> d_up;
  std::array<Matrix, 3> d_down;
  //! Lindblad jump operators per polarization; sum_q L_q^dag L_q = P_e.
  std::array<Matrix, 3> jump;

  Matrix fx, fy, fz; // F=1 angular momentum, zero elsewhere
  Matrix jx, jy, jz, j0;
  Matrix projector_excited;
  Matrix projector_f1;
  Matrix projector_f2;

  Matrix d_up_cartesian(Axis axis) const;
  Matrix d_down_cartesian(Axis axis) const;
};

OperatorSet build_dipole_operators(const LevelScheme &scheme);

//! Rotating-frame Hamiltonian H/hbar (rad/s) for a probe detuned by
//! `detuning` from F=1 -> F'=0:
//!   H = sum_g E_g |g><g| + sum_e (E_e - detuning) |e><e|
//!       - (Omega . d_up + h.c.) / 2
//! Throws InvalidConfig for non-finite field components.
Matrix hamiltonian(const LevelScheme &scheme, const OperatorSet &ops,
                   double detuning, const Field &rabi);

//! Spontaneous emission into both ground manifolds:
//!   L(rho) = gamma sum_q (J_q rho J_q^dag - {J_q^dag J_q, rho} / 2)
class Dissipator {
public:
  Dissipator(const OperatorSet &ops, double gamma);
  Matrix operator()(const Matrix &rho) const;
  double gamma() const { return gamma_; }

private:
  std::array<Matrix, 3> jump_;
  Matrix decay_; // sum_q J_q^dag J_q
  double gamma_;
};

Dissipator liouvillian_dissipator(const OperatorSet &ops, double gamma);

} // namespace nlmetro::atomic
