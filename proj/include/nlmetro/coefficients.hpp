#pragma once

#include <optional>
#include <vector>

#include "nlmetro/dynamics.hpp"

namespace nlmetro::atomic {

//! Rotation coefficients of one atom on the beam axis at the focus, read
//! off phi(N) = (<f_z>/2) (alpha1 + beta1 N + ...) for the reference pulse.
//! They are the single-atom analogues of the ensemble constants A and B.
struct EffectiveCoefficients {
  double detuning = 0.0; // rad/s, from F=1 -> F'=0
  double alpha1 = 0.0;   // rad per atom
  double beta1 = 0.0;    // rad per atom per photon
  double gamma1 = 0.0;   // rad per atom per photon^2 (saturation curvature)
  // Tensor and population-dependent terms are not extracted.
  std::optional<double> alpha2, beta_j0, beta_n0, beta2;
};

struct CoefficientOptions {
  double pulse_fwhm = 54e-9;
  //! Photon numbers N0, 2 N0, 3 N0 are simulated; a quadratic through the
  //! three rotations separates the linear, fourth- and sixth-order parts.
  double base_photons = 2e5;
  double polarization = 1.0; // <f_z> of the probed atom
  dynamics::BeamGeometry beam;
  dynamics::IntegrationOptions integration;
};

//! Throws InvalidConfig within 3 linewidths of a bare resonance, and
//! NonConvergence when the linear regime is not resolved: the quadratic
//! term dominates the photon-number dependence or the nonlinear part is
//! below the integration tolerance.
EffectiveCoefficients
extract_effective_coefficients(const dynamics::AtomModel &model,
                               double detuning,
                               const CoefficientOptions &opts = {});

std::vector<EffectiveCoefficients>
scan_coefficients(const dynamics::AtomModel &model,
                  const std::vector<double> &detunings,
                  const CoefficientOptions &opts = {});

struct ZeroCrossing {
  double detuning = 0.0; // rad/s
  EffectiveCoefficients at;
  int evaluations = 0;
};

//! Detuning in [lo, hi] (rad/s) where alpha1 changes sign. Throws
//! NonConvergence when alpha1 has the same sign at both ends.
ZeroCrossing find_alpha1_zero(const dynamics::AtomModel &model, double lo,
                              double hi, const CoefficientOptions &opts = {},
                              double tolerance_hz = 1e3);

} // namespace nlmetro::atomic
