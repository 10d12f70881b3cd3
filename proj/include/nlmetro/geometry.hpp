#pragma once

#include <complex>
#include <vector>

namespace nlmetro::dynamics {

//! Fundamental Gaussian probe mode, normalized to unit power at every z:
//!   M(r, z) = sqrt(2 / (pi w(z)^2)) exp(-r^2 / w(z)^2) exp(i psi(r, z)).
struct BeamGeometry {
  double waist = 20e-6;          // w0, m
  double wavelength = 780.241e-9; // m
  bool wavefront_phase = true;   // include curvature and Gouy phase

  void validate() const;
  double rayleigh_range() const; // pi w0^2 / lambda
  double effective_area() const; // pi w0^2 / 2
  double width(double z) const;  // w(z)
  double amplitude(double r, double z) const; // |M|, 1/m
  double phase(double r, double z) const;     // psi, rad
  std::complex<double> mode(double r, double z) const;
  //! |M(r,z)|^2 / |M(0,0)|^2, i.e. local over peak intensity.
  double intensity_scale(double r, double z) const;
};

//! Gaussian atomic cloud,
//!   n(r, z) = N_A / (pi^{3/2} sigma_L sigma_T^2) exp(-r^2/sigma_T^2 - z^2/sigma_L^2).
struct CloudGeometry {
  double atoms = 5e5;
  double sigma_t = 20e-6 / 1.4142135623730951; // m
  double sigma_l = 3.17e-3;                     // m

  void validate() const;
  double density(double r, double z) const; // 1/m^3
};

//! Longitudinal cloud width implied by a single-beam dipole trap: in the
//! harmonic approximation sigma_L / sigma_T = sqrt(2) pi w_trap / lambda_trap.
double trap_aspect_ratio(double trap_waist, double trap_wavelength);

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

//! Golub-Welsch rules. Hermite: weight exp(-x^2) on the real line;
//! Laguerre: weight exp(-x) on [0, inf); Legendre: weight 1 on [-1, 1].
GaussRule gauss_hermite(int n);
GaussRule gauss_laguerre(int n);
GaussRule gauss_legendre(int n);

//! A point of the cloud quadrature. `mass` is the fraction of atoms the
//! node stands for; the masses sum to one.
struct QuadratureNode {
  double r = 0.0;
  double z = 0.0;
  double mass = 0.0;
};

//! Product rule adapted to the Gaussian density: Gauss-Laguerre in
//! u = r^2/sigma_T^2 and Gauss-Hermite in z/sigma_L. Exact for the cloud
//! density itself, so sum(mass) = 1 to rounding.
std::vector<QuadratureNode> cloud_quadrature(const CloudGeometry &cloud,
                                             int radial, int longitudinal);

} // namespace nlmetro::dynamics
