#include "nlmetro/pulse.hpp"

#include <cmath>

#include "nlmetro/atomic_data.hpp"
#include "nlmetro/errors.hpp"

namespace nlmetro::dynamics {

void PulseSpec::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw InvalidConfig("pulse: duration must be positive and finite");
  if (!(photons > 0.0) || !std::isfinite(photons))
    throw InvalidConfig("pulse: photon number must be positive");
  if (!std::isfinite(detuning))
    throw InvalidConfig("pulse: detuning must be finite");
  if (shape == PulseShape::gaussian && !(window > 0.0 && window < 40.0))
    throw InvalidConfig("pulse: integration window must lie in (0, 40) tau");
  if (shape == PulseShape::flat_train) {
    if (train_count < 1)
      throw InvalidConfig("pulse: train needs at least one pulse");
    if (train_count > 1 && !(train_period >= duration))
      throw InvalidConfig("pulse: train period shorter than on-time");
  }
}

double PulseSpec::tau() const {
  // |T|^2 ~ exp(-t^2/tau^2) has FWHM 2 tau sqrt(ln 2).
  return duration / (2.0 * std::sqrt(std::log(2.0)));
}

double PulseSpec::envelope(double t) const {
  if (shape == PulseShape::gaussian) {
    const double s = tau();
    return std::pow(atomic::constants::pi, -0.25) / std::sqrt(s) *
           std::exp(-0.5 * (t / s) * (t / s));
  }
  if (t < 0.0)
    return 0.0;
  const double period = train_count > 1 ? train_period : duration;
  const double k = std::floor(t / period);
  if (k >= train_count || t - k * period > duration)
    return 0.0;
  return envelope_peak();
}

double PulseSpec::envelope_peak() const {
  if (shape == PulseShape::gaussian)
    return std::pow(atomic::constants::pi, -0.25) / std::sqrt(tau());
  return 1.0 / std::sqrt(illuminated_time());
}

double PulseSpec::illuminated_time() const {
  if (shape == PulseShape::gaussian)
    return duration;
  return duration * train_count;
}

std::vector<Segment> PulseSpec::segments() const {
  validate();
  if (shape == PulseShape::gaussian) {
    const double half = window * tau();
    return {{-half, half, true}};
  }
  std::vector<Segment> out;
  for (int k = 0; k < train_count; ++k) {
    const double start = k * train_period;
    out.push_back({start, start + duration, true});
    if (k + 1 < train_count && train_period > duration)
      out.push_back({start + duration, (k + 1) * train_period, false});
  }
  return out;
}

PulseSpec gaussian_pulse(double fwhm, double photons, double detuning) {
  PulseSpec p;
  p.shape = PulseShape::gaussian;
  p.duration = fwhm;
  p.photons = photons;
  p.detuning = detuning;
  p.validate();
  return p;
}

PulseSpec flat_train(double on_time, double period, int count, double photons,
                     double detuning) {
  PulseSpec p;
  p.shape = PulseShape::flat_train;
  p.duration = on_time;
  p.train_period = period;
  p.train_count = count;
  p.photons = photons;
  p.detuning = detuning;
  p.validate();
  return p;
}

} // namespace nlmetro::dynamics
