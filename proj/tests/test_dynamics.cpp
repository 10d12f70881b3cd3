#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nlmetro/dynamics.hpp"
#include "nlmetro/errors.hpp"

using namespace nlmetro;
using namespace nlmetro::dynamics;
using std::numbers::pi;

namespace {

const AtomModel &model() {
  static const AtomModel m = make_atom_model();
  return m;
}

double mhz(double f) { return 2 * pi * f * 1e6; }

// Resonant two-level atom with decay, starting in the ground state
// (Torrey 1949): excited population with mu = sqrt(Omega^2 - gamma^2/16).
double torrey_excited(double omega, double gamma, double t) {
  const double mu = std::sqrt(omega * omega - gamma * gamma / 16.0);
  const double envelope = std::exp(-0.75 * gamma * t);
  return omega * omega / (2 * omega * omega + gamma * gamma) *
         (1.0 - envelope * (std::cos(mu * t) + 0.75 * gamma / mu * std::sin(mu * t)));
}

Matrix random_support_state(const MasterEquation &eq, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const int n = eq.dim();
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a(i, j) = cd(g(rng), g(rng));
  Matrix rho = a * a.adjoint();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!eq.in_support(i, j))
        rho(i, j) = 0.0;
  return rho / rho.trace().real();
}

// Row-major copy, the layout the master equation works on.
std::vector<cd> flatten(const Matrix &m) {
  std::vector<cd> v(std::size_t(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      v[std::size_t(i * m.cols() + j)] = m(i, j);
  return v;
}

Matrix unflatten(const std::vector<cd> &v, int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = v[std::size_t(i * n + j)];
  return m;
}

} // namespace

TEST_CASE("two-level damped Rabi oscillation matches the closed form") {
  const double gamma = 1.0, omega = 3.0;
  Eigen::VectorXd energies = Eigen::VectorXd::Zero(2);
  Matrix coupling = Matrix::Zero(2, 2);
  coupling(1, 0) = 1.0;
  Matrix jump = Matrix::Zero(2, 2);
  jump(0, 1) = 1.0;
  std::vector<Matrix> jumps{jump};
  MasterEquation eq(energies, {false, true}, coupling, jumps, gamma, coupling.adjoint());
  auto ws = eq.make_workspace();

  std::vector<cd> rho(4, 0.0);
  rho[0] = 1.0;
  ode::Rhs rhs = [&](double, const double *y, double *dy) {
    eq.derivative(omega, 0.0, reinterpret_cast<const cd *>(y),
                  reinterpret_cast<cd *>(dy), ws);
  };
  std::span<double> y(reinterpret_cast<double *>(rho.data()), 8);
  double t = 0.0;
  double worst = 0.0, trace_err = 0.0;
  for (int k = 1; k <= 40; ++k) {
    const double t1 = 0.25 * k;
    ode::integrate(rhs, y, t, t1, {1e-11, 1e-13});
    t = t1;
    worst = std::max(worst, std::abs(rho[3].real() - torrey_excited(omega, gamma, t)));
    trace_err = std::max(trace_err, std::abs((rho[0] + rho[3]).real() - 1.0));
  }
  CHECK(worst < 1e-6);
  CHECK(trace_err < 1e-9);
  // steady state Omega^2 / (2 Omega^2 + gamma^2)
  ode::integrate(rhs, y, t, 60.0, {1e-11, 1e-13});
  CHECK(rho[3].real() == doctest::Approx(9.0 / 19.0).epsilon(1e-8));
}

TEST_CASE("zero hamiltonian and no decay leave the state unchanged") {
  Eigen::VectorXd energies = Eigen::VectorXd::Zero(2);
  Matrix coupling = Matrix::Zero(2, 2);
  coupling(1, 0) = 1.0;
  std::vector<Matrix> jumps{Matrix::Zero(2, 2)};
  MasterEquation eq(energies, {false, true}, coupling, jumps, 0.0, coupling);
  auto ws = eq.make_workspace();
  std::vector<cd> rho{0.7, cd(0.1, 0.2), cd(0.1, -0.2), 0.3}, d(4);
  eq.derivative(0.0, 0.0, rho.data(), d.data(), ws);
  for (const auto &v : d)
    CHECK(std::abs(v) == 0.0);
}

TEST_CASE("sparse derivative equals the dense Lindblad form") {
  const auto &m = model();
  const auto diss = atomic::liouvillian_dissipator(m.ops, m.scheme.gamma());
  const double detuning = mhz(462);
  const cd drive(2 * pi * 40e6, -2 * pi * 15e6);
  const Matrix h = atomic::hamiltonian(m.scheme, m.ops, detuning,
                                       atomic::Field(drive, 0.0, 0.0));
  auto ws = m.equation.make_workspace();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Matrix rho = random_support_state(m.equation, seed);
    const Matrix dense = cd(0, -1) * (h * rho - rho * h) + diss(rho);
    auto flat = flatten(rho);
    std::vector<cd> d(flat.size());
    m.equation.derivative(drive, detuning, flat.data(), d.data(), ws);
    CHECK((unflatten(d, 24) - dense).norm() < 1e-12 * dense.norm());
  }
}

TEST_CASE("split form adds up to the full derivative") {
  const auto &m = model();
  const double detuning = mhz(1500);
  const cd drive(2 * pi * 25e6, 0.0);
  auto ws = m.equation.make_workspace();
  auto flat = flatten(random_support_state(m.equation, 11));
  std::vector<cd> full(flat.size()), rates, rest(flat.size());
  m.equation.derivative(drive, detuning, flat.data(), full.data(), ws);
  m.equation.rates(detuning, rates);
  m.equation.interaction(drive, flat.data(), rest.data(), ws);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!m.equation.in_support(int(i / 24), int(i % 24)))
      continue;
    err = std::max(err, std::abs(rates[i] * flat[i] + rest[i] - full[i]));
    scale = std::max(scale, std::abs(full[i]));
  }
  CHECK(err < 1e-12 * scale);
}

TEST_CASE("closed-form free evolution agrees with the integrator") {
  const auto &eq = model().equation;
  REQUIRE(eq.has_exact_free_evolution());
  const double detuning = mhz(462), dt = 40e-9;
  auto exact = flatten(random_support_state(eq, 5));
  auto numeric = exact;
  eq.free_evolve(detuning, dt, exact.data());

  auto ws = eq.make_workspace();
  ode::Rhs rhs = [&](double, const double *y, double *dy) {
    eq.derivative(0.0, detuning, reinterpret_cast<const cd *>(y),
                  reinterpret_cast<cd *>(dy), ws);
  };
  ode::integrate(rhs, std::span<double>(reinterpret_cast<double *>(numeric.data()),
                                        2 * numeric.size()),
                 0.0, dt, {1e-11, 1e-14});
  double err = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i)
    err = std::max(err, std::abs(exact[i] - numeric[i]));
  CHECK(err < 1e-8);
}

TEST_CASE("integrate_node") {
  const auto &m = model();
  const BeamGeometry beam;
  const Matrix rho0 = pseudo_spin_state(m.scheme, 1.0);

  SUBCASE("exponential and Runge-Kutta integrators agree") {
    const auto pulse = gaussian_pulse(54e-9, 1e6, mhz(462));
    IntegrationOptions etd;
    etd.method = Integrator::exponential;
    const auto a = integrate_node(rho0, pulse, beam, {}, m);
    const auto b = integrate_node(rho0, pulse, beam, {}, m, etd);
    CHECK(b.overlap == doctest::Approx(a.overlap).epsilon(1e-6));
    CHECK((a.final_state - b.final_state).norm() < 1e-7);
    CHECK(a.max_trace_error < 1e-9);
    CHECK(a.min_eigenvalue > -1e-9);
  }
  SUBCASE("the wavefront phase cancels in the overlap") {
    const auto pulse = gaussian_pulse(54e-9, 1e6, mhz(1500));
    IntegrationOptions etd;
    etd.method = Integrator::exponential;
    const auto a = integrate_node(rho0, pulse, beam, {0.6, 0.0}, m, etd);
    const auto b = integrate_node(rho0, pulse, beam, {0.6, 1.3}, m, etd);
    CHECK(b.overlap == doctest::Approx(a.overlap).epsilon(1e-9));
    // populations do not see the phase either
    CHECK((a.final_state.diagonal() - b.final_state.diagonal()).norm() < 1e-10);
  }
  SUBCASE("reversing the polarization reverses the overlap") {
    const auto pulse = gaussian_pulse(54e-9, 1e6, mhz(1500));
    IntegrationOptions etd;
    etd.method = Integrator::exponential;
    const auto up = integrate_node(rho0, pulse, beam, {}, m, etd);
    const auto down = integrate_node(pseudo_spin_state(m.scheme, -1.0), pulse,
                                     beam, {}, m, etd);
    const auto mixed = integrate_node(mixed_f1_state(m.scheme), pulse, beam, {}, m, etd);
    CHECK(up.overlap != 0.0);
    CHECK(down.overlap == doctest::Approx(-up.overlap).epsilon(1e-7));
    CHECK(std::abs(mixed.overlap) < 1e-7 * std::abs(up.overlap));
  }
  SUBCASE("stored trajectory") {
    const auto pulse = gaussian_pulse(54e-9, 1e5, mhz(1500));
    IntegrationOptions opts;
    opts.method = Integrator::exponential;
    opts.store_stride = 1;
    const auto tr = integrate_node(rho0, pulse, beam, {}, m, opts);
    REQUIRE(tr.time.size() > 10);
    CHECK(tr.time.size() == tr.states.size());
    CHECK(tr.time.size() == tr.field.size());
    CHECK(tr.time.front() == doctest::Approx(-pulse.window * pulse.tau()));
    CHECK(tr.time.back() == doctest::Approx(pulse.window * pulse.tau()));
  }
  SUBCASE("invalid inputs") {
    const auto pulse = gaussian_pulse(54e-9, 1e6, mhz(1500));
    CHECK_THROWS_AS(integrate_node(rho0, pulse, beam, {1.0, std::nan("")}, m),
                    InvalidConfig);
    CHECK_THROWS_AS(integrate_node(Matrix::Identity(3, 3), pulse, beam, {}, m),
                    InvalidConfig);
  }
}

TEST_CASE("peak intensity of the population-dynamics pulse") {
  // 54 ns FWHM, 5.7e6 photons, 20 um waist: about 4 W/cm^2
  const auto pulse = gaussian_pulse(54e-9, 5.7e6, mhz(462));
  const double i_peak = peak_intensity(model(), pulse, BeamGeometry{});
  CHECK(i_peak * 1e-4 == doctest::Approx(4.0).epsilon(0.02));
  // E = N hbar omega = int I dA dt with I = I_peak exp(-2 r^2/w^2) T^2/T(0)^2
  const double area = pi * 20e-6 * 20e-6 / 2;
  const double energy = i_peak * area * std::erf(pulse.window) /
                        (pulse.envelope_peak() * pulse.envelope_peak());
  const double photon = 1.054571817e-34 * model().scheme.omega();
  CHECK(energy / photon == doctest::Approx(5.7e6).epsilon(1e-6));
}

TEST_CASE("detected_stokes") {
  const auto &m = model();
  const auto pulse = gaussian_pulse(54e-9, 3e5, mhz(1500));
  const BeamGeometry beam;
  CloudGeometry cloud;
  StokesOptions opts;
  opts.radial = 3;
  opts.longitudinal = 3;
  opts.integration.method = Integrator::exponential;
  const Matrix rho0 = pseudo_spin_state(m.scheme, 1.0);

  opts.workers = 1;
  const auto serial = detected_stokes(pulse, beam, cloud, m, rho0, opts);
  opts.workers = 3;
  const auto parallel = detected_stokes(pulse, beam, cloud, m, rho0, opts);
  CHECK(serial.sy == parallel.sy);
  CHECK(serial.phi == parallel.phi);
  CHECK(serial.sx == pulse.photons);
  CHECK(serial.phi == doctest::Approx(serial.sy / (2 * serial.sx)).epsilon(1e-14));
  CHECK(serial.retained_polarization < 1.0);
  CHECK(serial.retained_polarization > 0.99);

  SUBCASE("no atoms, no rotation") {
    cloud.atoms = 0.0;
    CHECK(detected_stokes(pulse, beam, cloud, m, rho0, opts).sy == 0.0);
  }
  SUBCASE("an unpolarized ensemble does not rotate") {
    const auto r = detected_stokes(pulse, beam, cloud, m, mixed_f1_state(m.scheme), opts);
    CHECK(std::abs(r.sy) < 1e-7 * std::abs(serial.sy));
  }
  SUBCASE("rotation_angle_model is the detected angle") {
    CHECK(rotation_angle_model(pulse, beam, cloud, m, rho0, opts) == serial.phi);
  }
}

TEST_CASE("ode integrators") {
  SUBCASE("exponential decay") {
    std::vector<double> y{1.0, 2.0};
    ode::Rhs rhs = [](double, const double *x, double *d) {
      d[0] = -x[0];
      d[1] = -3.0 * x[1];
    };
    const auto st = ode::integrate(rhs, y, 0.0, 2.0, {1e-10, 1e-14});
    CHECK(y[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
    CHECK(y[1] == doctest::Approx(2.0 * std::exp(-6.0)).epsilon(1e-8));
    CHECK(st.accepted > 0);
  }
  SUBCASE("non-finite state raises StepFailure") {
    std::vector<double> y{1.0};
    ode::Rhs rhs = [](double, const double *, double *d) { d[0] = std::nan(""); };
    CHECK_THROWS_AS(ode::integrate(rhs, y, 0.0, 1.0), StepFailure);
  }
  SUBCASE("step budget") {
    std::vector<double> y{1.0};
    ode::Rhs rhs = [](double t, const double *, double *d) { d[0] = std::cos(1e4 * t); };
    ode::Options o;
    o.max_steps = 10;
    CHECK_THROWS_AS(ode::integrate(rhs, y, 0.0, 1.0, o), StepFailure);
  }
  SUBCASE("observer can stop the integration") {
    std::vector<double> y{1.0};
    ode::Rhs rhs = [](double, const double *x, double *d) { d[0] = -x[0]; };
    int calls = 0;
    ode::integrate(rhs, y, 0.0, 10.0, {}, [&](double, std::span<const double>) {
      return ++calls < 3;
    });
    CHECK(calls == 3);
    CHECK(y[0] > std::exp(-10.0));
  }
  SUBCASE("exponential integrator: fast rotation plus forcing") {
    // y' = i w y + e^{i t}, y(0) = 0 -> y = (e^{i t} - e^{i w t}) / (i (1 - w))
    const double w = 500.0;
    std::vector<ode::cd> rates{ode::cd(0, w)}, y{0.0};
    ode::SplitRhs n = [](double t, const ode::cd *, ode::cd *out) {
      out[0] = std::polar(1.0, t);
    };
    ode::integrate_exponential(rates, n, y, 0.0, 3.0, {1e-10, 1e-14});
    const ode::cd expect = (std::polar(1.0, 3.0) - std::polar(1.0, 3.0 * w)) /
                           (ode::cd(0, 1) * (1.0 - w));
    CHECK(std::abs(y[0] - expect) < 1e-9);
  }
}
