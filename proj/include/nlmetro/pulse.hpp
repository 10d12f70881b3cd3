#pragma once

#include <vector>

namespace nlmetro::dynamics {

enum class PulseShape { gaussian, flat_train };

//! One contiguous stretch of the pulse timeline.
struct Segment {
  double start = 0.0; // s
  double end = 0.0;   // s
  bool driven = true; // false: field off, atoms evolve freely
};

//! Probe pulse. The temporal mode T(t) is normalized so that
//! integral T(t)^2 dt = 1; the field amplitude of a pulse carrying
//! `photons` photons is then proportional to sqrt(photons) T(t).
struct PulseSpec {
  PulseShape shape = PulseShape::gaussian;
  //! Gaussian: intensity FWHM. Flat train: duration of each on-period.
  double duration = 54e-9;    // s
  double photons = 1e6;       // per pulse (whole train for flat_train)
  double detuning = 0.0;      // rad/s, measured from F=1 -> F'=0
  int train_count = 1;        // flat_train only
  double train_period = 0.0;  // s, flat_train only (>= duration)
  double window = 4.0;        // Gaussian integration half-span in tau

  //! Throws InvalidConfig on non-positive duration or photon number,
  //! non-finite detuning or an overlapping train.
  void validate() const;

  //! Gaussian amplitude width tau: T ~ exp(-t^2 / (2 tau^2)).
  double tau() const;
  double envelope(double t) const; // 1/sqrt(s)
  double envelope_peak() const;
  //! Total time the field is on.
  double illuminated_time() const;
  //! Timeline covering the pulse: [-window tau, window tau] for a Gaussian, on and
  //! off stretches starting at t = 0 for a train.
  std::vector<Segment> segments() const;
};

PulseSpec gaussian_pulse(double fwhm, double photons, double detuning);
PulseSpec flat_train(double on_time, double period, int count,
                     double photons, double detuning);

} // namespace nlmetro::dynamics
