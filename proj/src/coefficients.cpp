#include "nlmetro/coefficients.hpp"

#include <cmath>

#include <boost/math/tools/toms748_solve.hpp>

#include "nlmetro/errors.hpp"

namespace nlmetro::atomic {

namespace {

constexpr double kResonanceGuard = 3.0; // linewidths

double on_axis_rotation(const dynamics::AtomModel &model, double detuning,
                        double photons, const CoefficientOptions &opts) {
  using namespace dynamics;
  const PulseSpec pulse = gaussian_pulse(opts.pulse_fwhm, photons, detuning);
  const Matrix rho0 = pseudo_spin_state(model.scheme, opts.polarization);
  const Trajectory tr =
      integrate_node(rho0, pulse, opts.beam, LocalField{}, model,
                     opts.integration);
  // One atom at the focus: phi = k d T(0) |M(0)| J / (2 eps0 E0).
  const double e0 = std::sqrt(photons * constants::z0 * constants::hbar *
                              model.scheme.omega() / 2.0);
  const double mode = 1.0 / std::sqrt(opts.beam.effective_area());
  return model.scheme.wavenumber() * model.scheme.reduced_dipole() *
         pulse.envelope_peak() * mode * tr.overlap /
         (2.0 * constants::epsilon0 * e0);
}

} // namespace

EffectiveCoefficients
extract_effective_coefficients(const dynamics::AtomModel &model,
                               double detuning,
                               const CoefficientOptions &opts) {
  if (!std::isfinite(detuning))
    throw InvalidConfig("coefficients: detuning must be finite");
  for (double r : model.scheme.resonances())
    if (std::abs(detuning - r) < kResonanceGuard * model.scheme.gamma())
      throw InvalidConfig("coefficients: detuning within 3 linewidths of a "
                          "resonance");
  if (!(opts.base_photons > 0.0) || opts.polarization == 0.0)
    throw InvalidConfig(
        "coefficients: need positive photon number and nonzero polarization");

  const double n0 = opts.base_photons;
  double phi[3];
  for (int k = 0; k < 3; ++k)
    phi[k] = on_axis_rotation(model, detuning, (k + 1) * n0, opts);

  // Quadratic phi = a + b N + c N^2 through N0, 2 N0, 3 N0.
  const double d2 = phi[2] - 2.0 * phi[1] + phi[0];
  const double c = d2 / (2.0 * n0 * n0);
  const double b = (phi[1] - phi[0]) / n0 - 3.0 * c * n0;
  const double a = phi[0] - b * n0 - c * n0 * n0;

  const double scale = std::max({std::abs(phi[0]), std::abs(phi[1]),
                                 std::abs(phi[2])});
  const double noise = 100.0 * opts.integration.ode.rtol * scale;
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
    throw NonConvergence("coefficients: non-finite fit");
  if (std::abs(b) * 3.0 * n0 < noise)
    throw NonConvergence("coefficients: nonlinear rotation below the "
                         "integration tolerance");
  if (std::abs(c) * 9.0 * n0 * n0 > 0.5 * std::abs(b) * 3.0 * n0)
    throw NonConvergence(
        "coefficients: saturation dominates; lower base_photons");

  EffectiveCoefficients out;
  out.detuning = detuning;
  const double norm = 2.0 / opts.polarization;
  out.alpha1 = norm * a;
  out.beta1 = norm * b;
  out.gamma1 = norm * c;
  return out;
}

std::vector<EffectiveCoefficients>
scan_coefficients(const dynamics::AtomModel &model,
                  const std::vector<double> &detunings,
                  const CoefficientOptions &opts) {
  std::vector<EffectiveCoefficients> out;
  out.reserve(detunings.size());
  for (double d : detunings)
    out.push_back(extract_effective_coefficients(model, d, opts));
  return out;
}

ZeroCrossing find_alpha1_zero(const dynamics::AtomModel &model, double lo,
                              double hi, const CoefficientOptions &opts,
                              double tolerance_hz) {
  if (!(hi > lo))
    throw InvalidConfig("zero crossing: empty detuning bracket");
  int evaluations = 0;
  auto alpha = [&](double d) {
    ++evaluations;
    return extract_effective_coefficients(model, d, opts).alpha1;
  };
  const double flo = alpha(lo), fhi = alpha(hi);
  if (flo == 0.0 || fhi == 0.0 || (flo > 0.0) == (fhi > 0.0)) {
    if (flo == 0.0 || fhi == 0.0) {
      const double d = flo == 0.0 ? lo : hi;
      return {d, extract_effective_coefficients(model, d, opts), evaluations};
    }
    throw NonConvergence("zero crossing: alpha1 does not change sign in the "
                         "bracket");
  }
  const double tol = 2.0 * constants::pi * tolerance_hz;
  boost::uintmax_t iterations = 40;
  const auto [a, b] = boost::math::tools::toms748_solve(
      alpha, lo, hi, flo, fhi,
      [tol](double x, double y) { return std::abs(x - y) <= tol; },
      iterations);
  const double root = 0.5 * (a + b);
  ZeroCrossing z{root, extract_effective_coefficients(model, root, opts), 0};
  z.evaluations = evaluations + 1;
  return z;
}

} // namespace nlmetro::atomic
