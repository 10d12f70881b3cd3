#pragma once

#include <complex>
#include <vector>

#include "nlmetro/geometry.hpp"
#include "nlmetro/master_equation.hpp"
#include "nlmetro/ode.hpp"
#include "nlmetro/operators.hpp"
#include "nlmetro/pulse.hpp"

namespace nlmetro::dynamics {

//! Everything the integrator needs about the atom. Immutable once built
//! and safe to share between worker threads.
struct AtomModel {
  atomic::LevelScheme scheme;
  atomic::OperatorSet ops;
  MasterEquation equation;
};

AtomModel make_atom_model(const atomic::AtomicData &data,
                          const ProbePolarization &pol = {});
AtomModel make_atom_model();

//! F=1 state with populations (1 + p)/2 in m=+1 and (1 - p)/2 in m=-1, so
//! that <f_z> = p. p = 1 is the fully polarized |1,+1>.
Matrix pseudo_spin_state(const atomic::LevelScheme &scheme, double p);
//! Fully mixed F=1 state.
Matrix mixed_f1_state(const atomic::LevelScheme &scheme);

//! Probe field at one point of the cloud, relative to the on-axis focus.
struct LocalField {
  double intensity_scale = 1.0; // |M(x)|^2 / |M(0)|^2
  double phase = 0.0;           // wavefront phase psi(x), rad
};

//! On-axis, at-focus peak Rabi frequency (rad/s) of the probe times
//! sqrt(intensity_scale): Omega = 2 d E0 T(0) |M| / hbar, E0 =
//! sqrt(N Z0 hbar omega / 2).
double peak_rabi(const AtomModel &model, const PulseSpec &pulse,
                 const BeamGeometry &beam, double intensity_scale = 1.0);
//! Peak intensity (W/m^2) on axis at the focus.
double peak_intensity(const AtomModel &model, const PulseSpec &pulse,
                      const BeamGeometry &beam);

enum class Integrator {
  dopri5,      // embedded explicit RK; steps limited by GHz coherences
  exponential, // ETDRK4: free evolution exact, steps set by the dynamics
};

struct IntegrationOptions {
  Integrator method = Integrator::dopri5;
  //! atol well below the smallest populations of interest: at 1e-10 the
  //! nearly empty sublevels pick up eigenvalues of -5e-9.
  ode::Options ode{1e-8, 1e-13};
  //! Keep every k-th accepted step in the trajectory (0: keep only the
  //! initial and final states).
  int store_stride = 0;
  //! Audit trace and positivity every k-th accepted step.
  int audit_stride = 16;
  double positivity_abort = 1e-6;
};

struct Trajectory {
  std::vector<double> time;
  std::vector<Matrix> states;
  std::vector<std::complex<double>> field; // local Rabi amplitude, rad/s
  Matrix final_state;
  //! integral of s(t) Im[e^{-i psi} Tr(rho d_H)] dt (s), s = T(t)/T(0).
  double overlap = 0.0;
  double max_trace_error = 0.0;
  double min_eigenvalue = 0.0;
  ode::Stats stats;
};

//! Integrates one atom through the pulse in the input field (no depletion).
//! Throws StepFailure from the integrator and PositivityViolation when an
//! audited eigenvalue drops below -positivity_abort.
Trajectory integrate_node(const Matrix &rho0, const PulseSpec &pulse,
                          const BeamGeometry &beam, const LocalField &field,
                          const AtomModel &model,
                          const IntegrationOptions &opts = {});

struct StokesOptions {
  int radial = 9;
  int longitudinal = 9;
  //! Repeat with doubled node counts and throw QuadratureNotConverged if
  //! S_y moves by more than convergence_tolerance (relative).
  bool check_convergence = false;
  double convergence_tolerance = 0.005;
  int workers = 0; // 0: hardware concurrency
  IntegrationOptions integration;
};

struct StokesResult {
  double sx = 0.0; // photons
  double sy = 0.0; // photons; the rotation is sy / (2 sx)
  double phi = 0.0;
  //! Post-pulse F=1 <f_z> per atom after the excited states have decayed,
  //! weighted by the probe intensity seen by each atom, over its initial
  //! value. 1 means no loss of polarization.
  double retained_polarization = 1.0;
  //! Atom-averaged population transferred to F=2.
  double f2_population = 0.0;
  double max_trace_error = 0.0;
  double min_eigenvalue = 0.0;
  std::size_t nodes = 0;
  std::size_t steps = 0;
};

StokesResult detected_stokes(const PulseSpec &pulse, const BeamGeometry &beam,
                             const CloudGeometry &cloud,
                             const AtomModel &model, const Matrix &rho0,
                             const StokesOptions &opts = {});

double rotation_angle_model(const PulseSpec &pulse, const BeamGeometry &beam,
                            const CloudGeometry &cloud, const AtomModel &model,
                            const Matrix &rho0,
                            const StokesOptions &opts = {});

} // namespace nlmetro::dynamics
