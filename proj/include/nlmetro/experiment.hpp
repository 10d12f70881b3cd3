#pragma once
// Synthetic version of the three-probe measurement: a linear probe, the
// nonlinear probe, and a second linear probe on the same preparation,
// recorded by a balanced polarimeter with shot and electronic noise.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nlmetro/analysis.hpp"
#include "nlmetro/dynamics.hpp"

namespace nlmetro::experiment {

enum class ProbeTag { linear_first, nonlinear, linear_second };

std::string to_string(ProbeTag tag);           // "L1", "NL", "L2"
ProbeTag parse_probe_tag(const std::string &); // throws InvalidConfig

//! One detected pulse. S_x is the input photon number measured before the
//! ensemble, S_y the (noisy) balanced signal after it.
struct StokesRecord {
  ProbeTag tag = ProbeTag::linear_first;
  double photons = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  double t_h = 1.0;
  double t_v = 1.0;

  //! Rotation angle S_y / (2 S_x sqrt(T_H T_V)). The factor 2 makes a
  //! rotation by phi produce S_y = 2 phi S_x for small angles.
  double phi() const;
  //! Throws InvalidConfig unless N > 0, |S_y| <= S_x and T in (0, 1].
  void validate() const;
};

struct PolarimeterModel {
  double v_el_linear = 3e5;    // photons^2 per pulse
  double v_el_nonlinear = 4e5; // photons^2 per pulse
  double technical = 0.0;      // c in var(S_y) = V_el + N + c N^2
  double t_h = 1.0;
  double t_v = 1.0;
  //! Switches off all randomness; records then carry the mean signal.
  bool noiseless = false;

  void validate() const;
  double electronic(ProbeTag tag) const;
  //! var(S_y) of a pulse with N input photons, in photons^2. The shot and
  //! technical terms count the photons reaching the detector.
  double signal_variance(ProbeTag tag, double photons) const;
  //! Standard deviation of the recovered angle, rad. For T = 1 and no
  //! electronic noise this is N^(-1/2) / 2.
  double angle_noise(ProbeTag tag, double photons) const;
  //! Draws a record whose mean rotation is `phi`.
  StokesRecord detect(ProbeTag tag, double photons, double phi,
                      std::mt19937_64 &rng) const;
};

//! Mean rotation of each probe as a function of the spin polarization:
//!   phi_L  = A_L F_z / 2
//!   phi_NL = (A_NL + B N / (1 + N / N_sat)) F_z / 2
//! with the nonlinear probe tuned to the zero of the linear term.
struct ResponseModel {
  double a_linear = 3.3e-8;     // rad per atom at the linear-probe detuning
  double a_nonlinear = 0.0;     // rad per atom at the nonlinear detuning
  double b = 3.8e-16;           // rad per atom per photon
  std::optional<double> n_sat = 6.0e7;

  void validate() const;
  double linear(double f_z) const;
  double nonlinear(double f_z, double photons) const;
};

//! Fraction of the polarization destroyed between the two linear probes:
//!   eta(N) = eta0 + (1 - eta0) (1 - exp(-N / n_damage))
//! or, when a table is set, eta0 combined with a log-N interpolation of the
//! table. The default n_damage reproduces the retained polarization of the
//! full-cloud simulation at the nonlinear-probe detuning (eta = 5.3e-3 at
//! 1e6 photons, 5.3e-2 at 1e7).
struct DamageModel {
  double eta0 = 0.0;
  double n_damage = 1.9e8; // photons
  //! (photons, eta) pairs sorted by photons; overrides n_damage.
  std::vector<std::pair<double, double>> table;

  void validate() const;
  double operator()(double photons) const;
};

//! Damage table from the full-cloud simulation: eta = 1 - retained
//! polarization after a Gaussian nonlinear pulse of each photon number.
DamageModel damage_from_dynamics(const std::vector<double> &photons,
                                 const dynamics::PulseSpec &pulse,
                                 const dynamics::BeamGeometry &beam,
                                 const dynamics::CloudGeometry &cloud,
                                 const dynamics::AtomModel &model,
                                 const dynamics::StokesOptions &opts = {});

struct SequenceConfig {
  double linear_photons = 1.2e8; // forty 1 us pulses of 3e6 photons
  ResponseModel response;
  PolarimeterModel polarimeter;
  DamageModel damage;
  //! Multiplies the nonlinear signal, standing in for a slow drift of the
  //! nonlinear calibration between campaigns.
  double nonlinear_gain = 1.0;
};

struct SequenceResult {
  double phi_l = 0.0;
  double phi_nl = 0.0;
  double phi_l2 = 0.0;
  double f_z = 0.0;       // true polarization before the nonlinear probe
  double f_z_after = 0.0; // and after it
  //! 1 - phi_L'/phi_L; empty when phi_L == 0.
  std::optional<double> eta;
  StokesRecord records[3];
};

//! Probes one preparation with L1, NL, L2. `rng` supplies all noise.
SequenceResult run_sequence(double f_z, double nonlinear_photons,
                            const SequenceConfig &config,
                            std::mt19937_64 &rng);
//! Same, with a generator seeded from (seed, 0).
SequenceResult run_sequence(double f_z, double nonlinear_photons,
                            const SequenceConfig &config, std::uint64_t seed);

//! Independent generator for item `index` of a run seeded with `seed`.
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t index);

struct CampaignOptions {
  double atoms_min = 1.5e5;
  double atoms_max = 3.5e5;
  int samples = 50;
  //! Extra preparations with no atoms.
  int controls = 10;
  //! 0: N_A drawn uniformly in [atoms_min, atoms_max]. Otherwise each
  //! reset loses this fraction of the atoms, starting from atoms_max, and
  //! the trap is reloaded when N_A would drop below atoms_min.
  double escape_fraction = 0.0;
  //! Relative standard deviation of the per-campaign nonlinear gain.
  double slope_jitter = 0.0;
  int workers = 0; // 0: hardware concurrency
};

struct CampaignSample {
  std::uint64_t index = 0;
  double atoms = 0.0;
  bool control = false;
  SequenceResult sequence;
};

struct Campaign {
  double nonlinear_photons = 0.0;
  std::uint64_t seed = 0;
  double gain = 1.0; // the drawn nonlinear gain
  std::vector<CampaignSample> samples;

  //! (phi_L, phi_NL) pairs, atoms only or controls only.
  std::vector<double> phi_linear(bool controls = false) const;
  std::vector<double> phi_nonlinear(bool controls = false) const;
  //! Mean damage over the samples with atoms.
  double mean_eta() const;
};

//! One correlation plot. Samples are generated in parallel; sample i uses
//! derived_rng(seed, i + 1), so the result does not depend on scheduling.
Campaign generate_correlation_campaign(double nonlinear_photons,
                                       const SequenceConfig &config,
                                       const CampaignOptions &opts,
                                       std::uint64_t seed);

struct ControlOptions {
  //! Pulses per photon number; 400 keeps the mean angle at 5e5 photons
  //! within 2% (1 sigma) of a 2.5 mrad rotation.
  int samples = 400;
  ProbeTag detector = ProbeTag::nonlinear;
  //! Remove the electronic-noise floor before forming the sensitivity.
  bool subtract_electronic = true;
};

struct ControlPoint {
  double photons = 0.0;
  double mean_angle = 0.0;
  double angle_std = 0.0;       // observed
  double intrinsic_std = 0.0;   // after the electronic correction
  double stderr_angle = 0.0;
};

struct ControlRun {
  double rotation = 0.0;
  std::vector<ControlPoint> points;
  //! Fractional sensitivity intrinsic_std / mean_angle vs photons.
  analysis::ScalingCurve curve;
};

//! A wave plate in place of the atoms: a fixed rotation probed at each
//! photon number in `photons` (strictly increasing).
ControlRun waveplate_control_run(double rotation,
                                 const std::vector<double> &photons,
                                 const PolarimeterModel &polarimeter,
                                 const ControlOptions &opts,
                                 std::uint64_t seed);

//! var(S_y) without atoms at each photon number, from `pulses` pulses
//! per point: the input to the noise decomposition.
std::vector<analysis::VariancePoint>
noise_calibration_run(const std::vector<double> &photons, int pulses,
                      const PolarimeterModel &polarimeter, ProbeTag detector,
                      std::uint64_t seed);

//! Geometric grid of `count` values from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, int count);

} // namespace nlmetro::experiment
