#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nlmetro/errors.hpp"
#include "nlmetro/geometry.hpp"
#include "nlmetro/pulse.hpp"

using namespace nlmetro;
using namespace nlmetro::dynamics;
using std::numbers::pi;

namespace {

double apply(const GaussRule &rule, auto f) {
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    s += rule.weights[i] * f(rule.nodes[i]);
  return s;
}

} // namespace

TEST_CASE("gauss rules integrate polynomials exactly") {
  const int n = 6; // exact up to degree 11
  const auto her = gauss_hermite(n);
  const auto lag = gauss_laguerre(n);
  const auto leg = gauss_legendre(n);
  CHECK(apply(her, [](double) { return 1.0; }) ==
        doctest::Approx(std::sqrt(pi)).epsilon(1e-13));
  // int x^(2k) e^{-x^2} = Gamma(k + 1/2)
  for (int k = 1; k <= 5; ++k)
    CHECK(apply(her, [&](double x) { return std::pow(x, 2 * k); }) ==
          doctest::Approx(std::tgamma(k + 0.5)).epsilon(1e-12));
  CHECK(std::abs(apply(her, [](double x) { return x * x * x; })) < 1e-13);
  // int x^k e^{-x} = k!
  for (int k = 0; k <= 11; ++k)
    CHECK(apply(lag, [&](double x) { return std::pow(x, k); }) ==
          doctest::Approx(std::tgamma(k + 1.0)).epsilon(1e-11));
  for (int k = 0; k <= 5; ++k)
    CHECK(apply(leg, [&](double x) { return std::pow(x, 2 * k); }) ==
          doctest::Approx(2.0 / (2 * k + 1)).epsilon(1e-13));
}

TEST_CASE("cloud quadrature reproduces the density moments") {
  CloudGeometry cloud;
  const auto nodes = cloud_quadrature(cloud, 9, 9);
  REQUIRE(nodes.size() == 81);
  double mass = 0.0, r2 = 0.0, z2 = 0.0, z1 = 0.0;
  for (const auto &n : nodes) {
    mass += n.mass;
    r2 += n.mass * n.r * n.r;
    z2 += n.mass * n.z * n.z;
    z1 += n.mass * n.z;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r2 == doctest::Approx(cloud.sigma_t * cloud.sigma_t).epsilon(1e-12));
  CHECK(z2 == doctest::Approx(0.5 * cloud.sigma_l * cloud.sigma_l).epsilon(1e-12));
  CHECK(std::abs(z1) < 1e-15);

  cloud.sigma_l = -1.0;
  CHECK_THROWS_AS(cloud_quadrature(cloud, 9, 9), InvalidConfig);
}

TEST_CASE("gaussian beam mode") {
  BeamGeometry beam;
  CHECK(beam.rayleigh_range() ==
        doctest::Approx(pi * 20e-6 * 20e-6 / 780.241e-9).epsilon(1e-14));
  CHECK(beam.width(beam.rayleigh_range()) ==
        doctest::Approx(std::sqrt(2.0) * beam.waist).epsilon(1e-14));
  CHECK(beam.phase(0.0, beam.rayleigh_range()) == doctest::Approx(-pi / 4));
  CHECK(beam.intensity_scale(0.0, 0.0) == 1.0);
  CHECK(beam.intensity_scale(beam.waist, 0.0) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-14));

  // unit power in every plane: int |M|^2 2 pi r dr = 1
  for (double z : {0.0, 1e-3, 5e-3}) {
    const auto lag = gauss_laguerre(20);
    const double w = beam.width(z);
    // r^2 = u w^2 / 2 turns the integral into a Laguerre one
    double power = 0.0;
    for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
      const double r = w * std::sqrt(lag.nodes[i] / 2.0);
      const double a = beam.amplitude(r, z);
      power += lag.weights[i] * std::exp(lag.nodes[i]) * a * a * pi * w * w / 2.0;
    }
    CHECK(power == doctest::Approx(1.0).epsilon(1e-12));
  }

  beam.wavefront_phase = false;
  CHECK(beam.phase(10e-6, 1e-3) == 0.0);
}

TEST_CASE("pulse envelopes are normalized") {
  auto norm = [](const PulseSpec &p) {
    double s = 0.0;
    for (const auto &seg : p.segments()) {
      if (!seg.driven)
        continue;
      const int n = 20000; // midpoint rule
      const double h = (seg.end - seg.start) / n;
      for (int i = 0; i < n; ++i) {
        const double e = p.envelope(seg.start + (i + 0.5) * h);
        s += e * e * h;
      }
    }
    return s;
  };
  const auto g = gaussian_pulse(54e-9, 1e6, 0.0);
  CHECK(norm(g) == doctest::Approx(std::erf(g.window)).epsilon(1e-7));
  // FWHM of the intensity T^2
  CHECK(g.envelope(27e-9) / g.envelope(0.0) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(g.envelope_peak() == g.envelope(0.0));

  const auto train = flat_train(1e-6, 5e-6, 4, 1.2e8, 0.0);
  CHECK(norm(train) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(train.illuminated_time() == doctest::Approx(4e-6));
  CHECK(train.envelope(2.5e-6) == 0.0);

  CHECK_THROWS_AS(gaussian_pulse(-1.0, 1e6, 0.0).validate(), InvalidConfig);
  CHECK_THROWS_AS(gaussian_pulse(54e-9, 0.0, 0.0).validate(), InvalidConfig);
  CHECK_THROWS_AS(flat_train(2e-6, 1e-6, 3, 1e6, 0.0).validate(), InvalidConfig);
}
