#include <doctest.h>

#include <cmath>
#include <limits>

#include "nlmetro/analysis.hpp"
#include "nlmetro/errors.hpp"
#include "nlmetro/experiment.hpp"

using namespace nlmetro;
using namespace nlmetro::experiment;

namespace {

SequenceConfig noiseless_config() {
  SequenceConfig cfg;
  cfg.polarimeter.noiseless = true;
  cfg.damage.n_damage = std::numeric_limits<double>::infinity();
  return cfg;
}

double correlation(const std::vector<double> &x, const std::vector<double> &y) {
  const double mx = analysis::mean(x), my = analysis::mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST_CASE("stokes records") {
  StokesRecord r{ProbeTag::nonlinear, 1e6, 1e6, 2e3, 1.0, 1.0};
  CHECK(r.phi() == doctest::Approx(1e-3));
  r.t_h = 0.81;
  r.t_v = 0.64;
  CHECK(r.phi() == doctest::Approx(1e-3 / 0.72));
  CHECK_NOTHROW(r.validate());
  r.sy = 2e6;
  CHECK_THROWS_AS(r.validate(), InvalidConfig);
  r.sy = 0.0;
  r.t_v = 1.5;
  CHECK_THROWS_AS(r.validate(), InvalidConfig);

  CHECK(to_string(ProbeTag::linear_first) == "L1");
  CHECK(parse_probe_tag("NL") == ProbeTag::nonlinear);
  CHECK(parse_probe_tag("L2") == ProbeTag::linear_second);
  CHECK_THROWS_AS(parse_probe_tag("X"), InvalidConfig);
}

TEST_CASE("polarimeter noise") {
  PolarimeterModel pol;
  pol.v_el_nonlinear = 0.0;
  // shot-noise limited angle resolution N^(-1/2) / 2
  CHECK(pol.angle_noise(ProbeTag::nonlinear, 4e6) == doctest::Approx(2.5e-4).epsilon(1e-14));

  PolarimeterModel nominal;
  // electronic and shot variance equal at 4e5 photons on the NL detector
  CHECK(nominal.signal_variance(ProbeTag::nonlinear, 4e5) == doctest::Approx(8e5));
  CHECK(nominal.electronic(ProbeTag::nonlinear) == doctest::Approx(4e5));
  CHECK(nominal.electronic(ProbeTag::linear_second) == doctest::Approx(3e5));
  // angle variance V / (4 N^2 T_H T_V)
  CHECK(nominal.angle_noise(ProbeTag::nonlinear, 4e5) ==
        doctest::Approx(std::sqrt(8e5) / (2 * 4e5)).epsilon(1e-14));

  nominal.technical = 1e-6;
  CHECK(nominal.signal_variance(ProbeTag::nonlinear, 1e7) ==
        doctest::Approx(4e5 + 1e7 + 1e-6 * 1e14));

  nominal.t_h = 0.0;
  CHECK_THROWS_AS(nominal.validate(), InvalidConfig);
}

TEST_CASE("detected angles scatter with the predicted noise") {
  PolarimeterModel pol;
  auto rng = derived_rng(42, 0);
  const double phi = 1e-4, n = 1e6;
  std::vector<double> angles;
  for (int i = 0; i < 20000; ++i)
    angles.push_back(pol.detect(ProbeTag::nonlinear, n, phi, rng).phi());
  const double sd = pol.angle_noise(ProbeTag::nonlinear, n);
  CHECK(std::abs(analysis::mean(angles) - phi) < 4 * sd / std::sqrt(20000.0));
  CHECK(analysis::stddev(angles) == doctest::Approx(sd).epsilon(0.03));
}

TEST_CASE("noiseless sequence without damage") {
  const auto cfg = noiseless_config();
  const auto r = run_sequence(2.5e5, 1e7, cfg, std::uint64_t{1});
  CHECK(r.phi_l2 == r.phi_l);
  REQUIRE(r.eta.has_value());
  CHECK(*r.eta == 0.0);
  CHECK(r.phi_l == doctest::Approx(0.5 * 3.3e-8 * 2.5e5).epsilon(1e-14));
  CHECK(r.phi_nl ==
        doctest::Approx(0.5 * 3.8e-16 * 1e7 / (1 + 1e7 / 6e7) * 2.5e5).epsilon(1e-14));
  CHECK(r.records[1].tag == ProbeTag::nonlinear);
  CHECK(r.records[2].photons == cfg.linear_photons);
}

TEST_CASE("damage") {
  DamageModel d;
  CHECK(d(0.0) == 0.0);
  CHECK(d(1e6) == doctest::Approx(5.3e-3).epsilon(0.02));
  double last = 0.0;
  for (double n = 1e5; n <= 1e9; n *= 1.7) {
    CHECK(d(n) > last);
    last = d(n);
  }
  d.eta0 = 0.01;
  CHECK(d(0.0) == doctest::Approx(0.01));

  DamageModel t;
  t.table = {{1e6, 0.01}, {1e7, 0.05}};
  CHECK(t(1e6) == doctest::Approx(0.01));
  CHECK(t(std::sqrt(1e13)) == doctest::Approx(0.03)); // log-N midpoint
  CHECK(t(5e5) == doctest::Approx(0.005));             // linear below the table
  t.table = {{1e7, 0.05}, {1e6, 0.01}};
  CHECK_THROWS_AS(t.validate(), InvalidConfig);

  SequenceConfig cfg = noiseless_config();
  cfg.damage = DamageModel{};
  const auto r = run_sequence(2e5, 1e7, cfg, std::uint64_t{3});
  CHECK(*r.eta == doctest::Approx(cfg.damage(1e7)).epsilon(1e-12));
}

TEST_CASE("correlation campaigns") {
  CampaignOptions opts;
  opts.samples = 50;
  opts.controls = 10;

  SUBCASE("noiseless pairs are perfectly correlated with the model slope") {
    const auto c = generate_correlation_campaign(1e7, noiseless_config(), opts, 9);
    const auto x = c.phi_linear(), y = c.phi_nonlinear();
    REQUIRE(x.size() == 50);
    CHECK(correlation(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    const auto fit = analysis::linear_regression(x, y);
    // B N / (A (1 + N / N_sat)) at 1e7
    CHECK(fit.slope == doctest::Approx(0.0987).epsilon(2e-3));
    CHECK(fit.slope ==
          doctest::Approx(3.8e-16 * 1e7 / 3.3e-8 / (1 + 1e7 / 6e7)).epsilon(1e-10));
    for (const auto &s : c.samples)
      if (!s.control) {
        CHECK(s.atoms >= opts.atoms_min);
        CHECK(s.atoms <= opts.atoms_max);
      }
  }
  SUBCASE("controls average to zero") {
    opts.controls = 200;
    const auto c = generate_correlation_campaign(1e7, SequenceConfig{}, opts, 10);
    const auto xl = c.phi_linear(true), xn = c.phi_nonlinear(true);
    REQUIRE(xl.size() == 200);
    CHECK(std::abs(analysis::mean(xl)) < 3 * analysis::stddev(xl) / std::sqrt(200.0));
    CHECK(std::abs(analysis::mean(xn)) < 3 * analysis::stddev(xn) / std::sqrt(200.0));
  }
  SUBCASE("results do not depend on the number of workers") {
    opts.slope_jitter = 0.05;
    opts.workers = 1;
    const auto a = generate_correlation_campaign(3e6, SequenceConfig{}, opts, 77);
    opts.workers = 4;
    const auto b = generate_correlation_campaign(3e6, SequenceConfig{}, opts, 77);
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK(a.gain == b.gain);
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      CHECK(a.samples[i].atoms == b.samples[i].atoms);
      CHECK(a.samples[i].sequence.phi_nl == b.samples[i].sequence.phi_nl);
      CHECK(a.samples[i].sequence.phi_l2 == b.samples[i].sequence.phi_l2);
    }
    const auto c = generate_correlation_campaign(3e6, SequenceConfig{}, opts, 78);
    CHECK(c.samples[0].sequence.phi_l != a.samples[0].sequence.phi_l);
  }
  SUBCASE("atom loss between resets") {
    opts.escape_fraction = 0.05;
    const auto c = generate_correlation_campaign(1e7, noiseless_config(), opts, 5);
    double first = -1;
    for (const auto &s : c.samples)
      if (!s.control) {
        if (first < 0)
          first = s.atoms;
        CHECK(s.atoms >= opts.atoms_min);
      }
    CHECK(first == doctest::Approx(opts.atoms_max));
  }
  SUBCASE("invalid options") {
    opts.samples = 5;
    CHECK_THROWS_AS(generate_correlation_campaign(1e7, SequenceConfig{}, opts, 1),
                    InvalidConfig);
  }
}

TEST_CASE("wave-plate control") {
  const auto photons = log_space(5e5, 1e8, 8);
  PolarimeterModel pol;
  ControlOptions opts;

  SUBCASE("noiseless run returns the plate angle") {
    pol.noiseless = true;
    const auto run = waveplate_control_run(2.5e-3, photons, pol, opts, 1);
    for (const auto &p : run.points)
      CHECK(p.mean_angle == doctest::Approx(2.5e-3).epsilon(1e-12));
  }
  SUBCASE("noisy run scales like the shot-noise limit") {
    const auto run = waveplate_control_run(2.5e-3, photons, pol, opts, 2);
    REQUIRE(run.points.size() == photons.size());
    for (const auto &p : run.points)
      CHECK(std::abs(p.mean_angle / 2.5e-3 - 1.0) < 0.05);
    const auto fit = analysis::scaling_exponent(run.curve, 5e5, 1e8);
    CHECK(fit.exponent == doctest::Approx(-0.5).epsilon(0.1));
  }
}

TEST_CASE("noise calibration data") {
  PolarimeterModel pol;
  const auto photons = log_space(1e5, 3e7, 6);
  const auto pts = noise_calibration_run(photons, 2000, pol, ProbeTag::nonlinear, 4);
  REQUIRE(pts.size() == 6);
  for (const auto &p : pts)
    // sample variance of 2000 Gaussian draws: relative sd sqrt(2/1999)
    CHECK(p.variance == doctest::Approx(4e5 + p.photons).epsilon(0.16));
}

TEST_CASE("log_space") {
  const auto v = log_space(1e6, 1e8, 3);
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 1e6);
  CHECK(v[1] == doctest::Approx(1e7).epsilon(1e-14));
  CHECK(v[2] == 1e8);
  CHECK_THROWS_AS(log_space(1e6, 1e5, 3), InvalidConfig);
}
