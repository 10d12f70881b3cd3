#include "nlmetro/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "nlmetro/errors.hpp"

namespace nlmetro::dynamics {

namespace {

using atomic::constants::epsilon0;
using atomic::constants::hbar;
using atomic::constants::z0;

// Long enough for every excited state to have decayed (e^-40).
constexpr double kSettleLifetimes = 40.0;

Matrix unload_state(const cd *c, int n) {
  Matrix rho(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      rho(a, b) = c[a * n + b];
  return rho;
}

void check_density_matrix(const Matrix &rho, int n) {
  if (rho.rows() != n || rho.cols() != n)
    throw InvalidConfig("initial state has the wrong dimension");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidConfig("initial state is not Hermitian");
  if (std::abs(rho.trace() - 1.0) > 1e-9)
    throw InvalidConfig("initial state does not have unit trace");
}

double smallest_eigenvalue(const Matrix &rho) {
  const Matrix h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

// Excited populations left at the end of the pulse are allowed to decay
// so the retained polarization refers to a settled ground state.
Matrix settle(const AtomModel &model, const Matrix &rho, double detuning) {
  const int n = model.equation.dim();
  std::vector<cd> c(std::size_t(n) * std::size_t(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      c[std::size_t(a * n + b)] = rho(a, b);
  model.equation.free_evolve(detuning, kSettleLifetimes / model.scheme.gamma(),
                             c.data());
  return unload_state(c.data(), n);
}

struct NodeOutcome {
  double overlap = 0.0;
  double fz_after = 0.0;
  double f2 = 0.0;
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;
  std::size_t steps = 0;
};

} // namespace

AtomModel make_atom_model(const atomic::AtomicData &data,
                          const ProbePolarization &pol) {
  atomic::LevelScheme scheme(data);
  atomic::OperatorSet ops = atomic::build_dipole_operators(scheme);
  MasterEquation eq = make_probe_model(scheme, ops, pol);
  return AtomModel{std::move(scheme), std::move(ops), std::move(eq)};
}

AtomModel make_atom_model() {
  return make_atom_model(atomic::load_default_atomic_data());
}

Matrix pseudo_spin_state(const atomic::LevelScheme &scheme, double p) {
  if (!(p >= -1.0 && p <= 1.0))
    throw InvalidConfig("pseudo-spin polarization must lie in [-1, 1]");
  const auto n = Eigen::Index(scheme.size());
  Matrix rho = Matrix::Zero(n, n);
  const auto up = Eigen::Index(scheme.ground(1, 1));
  const auto down = Eigen::Index(scheme.ground(1, -1));
  rho(up, up) = 0.5 * (1.0 + p);
  rho(down, down) = 0.5 * (1.0 - p);
  return rho;
}

Matrix mixed_f1_state(const atomic::LevelScheme &scheme) {
  const auto n = Eigen::Index(scheme.size());
  Matrix rho = Matrix::Zero(n, n);
  for (int m = -1; m <= 1; ++m) {
    const auto i = Eigen::Index(scheme.ground(1, m));
    rho(i, i) = 1.0 / 3.0;
  }
  return rho;
}

double peak_rabi(const AtomModel &model, const PulseSpec &pulse,
                 const BeamGeometry &beam, double intensity_scale) {
  if (!(intensity_scale >= 0.0) || !std::isfinite(intensity_scale))
    throw InvalidConfig("local intensity scale must be non-negative");
  const double e0 =
      std::sqrt(pulse.photons * z0 * hbar * model.scheme.omega() / 2.0);
  const double mode = std::sqrt(intensity_scale / beam.effective_area());
  return 2.0 * model.scheme.reduced_dipole() * e0 * pulse.envelope_peak() *
         mode / hbar;
}

double peak_intensity(const AtomModel &model, const PulseSpec &pulse,
                      const BeamGeometry &beam) {
  const double t0 = pulse.envelope_peak();
  return hbar * model.scheme.omega() * pulse.photons * t0 * t0 /
         beam.effective_area();
}

Trajectory integrate_node(const Matrix &rho0, const PulseSpec &pulse,
                          const BeamGeometry &beam, const LocalField &field,
                          const AtomModel &model,
                          const IntegrationOptions &opts) {
  pulse.validate();
  beam.validate();
  const MasterEquation &eq = model.equation;
  const int n = eq.dim();
  check_density_matrix(rho0, n);
  if (!std::isfinite(field.phase))
    throw InvalidConfig("local field phase must be finite");
  if (!eq.supports(rho0))
    throw InvalidConfig(
        "initial state has coherences the probe model never couples");

  const double rabi = peak_rabi(model, pulse, beam, field.intensity_scale);
  const double t_peak = pulse.envelope_peak();
  const cd phase = std::polar(1.0, field.phase);
  const cd unphase = std::conj(phase);
  const double detuning = pulse.detuning;
  const std::size_t nn = std::size_t(n) * std::size_t(n);

  // State: rho (row-major) followed by the overlap accumulator.
  std::vector<cd> y(nn + 1, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      y[std::size_t(a * n + b)] = rho0(a, b);
  auto ws = eq.make_workspace();

  Trajectory traj;
  std::size_t accepted = 0;
  auto record = [&](double t, const cd *rho) {
    traj.time.push_back(t);
    traj.states.push_back(unload_state(rho, n));
    traj.field.push_back(rabi * (pulse.envelope(t) / t_peak) * phase);
  };
  auto audit = [&](const cd *rho) {
    cd tr = 0.0;
    for (int a = 0; a < n; ++a)
      tr += rho[std::size_t(a) * std::size_t(n + 1)];
    traj.max_trace_error = std::max(traj.max_trace_error, std::abs(tr - 1.0));
    const double lo = smallest_eigenvalue(unload_state(rho, n));
    traj.min_eigenvalue = std::min(traj.min_eigenvalue, lo);
    if (lo < -opts.positivity_abort)
      throw PositivityViolation("density matrix eigenvalue " +
                                std::to_string(lo) + " below tolerance");
  };
  auto after_step = [&](double t, const cd *rho) {
    ++accepted;
    const bool store =
        opts.store_stride > 0 && accepted % std::size_t(opts.store_stride) == 0;
    if (store)
      record(t, rho);
    if (store || (opts.audit_stride > 0 &&
                  accepted % std::size_t(opts.audit_stride) == 0))
      audit(rho);
    return true;
  };
  auto add_stats = [&](const ode::Stats &st) {
    traj.stats.accepted += st.accepted;
    traj.stats.rejected += st.rejected;
    traj.stats.evaluations += st.evaluations;
    traj.stats.last_step = st.last_step;
  };

  std::vector<cd> rates;
  eq.rates(detuning, rates);
  rates.push_back(0.0);
  auto nonlinear = [&](double t, const cd *rho, cd *out) {
    const double s = pulse.envelope(t) / t_peak;
    eq.interaction(rabi * s * phase, rho, out, ws);
    out[nn] = s * (unphase * eq.probe_expectation(rho)).imag();
  };
  // The explicit method works on the same numbers viewed as doubles.
  auto full_rhs = [&](double t, const double *yy, double *dy) {
    const double s = pulse.envelope(t) / t_peak;
    const auto *rho = reinterpret_cast<const cd *>(yy);
    auto *drho = reinterpret_cast<cd *>(dy);
    eq.derivative(rabi * s * phase, detuning, rho, drho, ws);
    drho[nn] = s * (unphase * eq.probe_expectation(rho)).imag();
  };

  const auto segments = pulse.segments();
  const cd *rho_view = y.data();
  traj.min_eigenvalue = std::min(0.0, smallest_eigenvalue(rho0));
  record(segments.front().start, rho_view);

  for (const Segment &seg : segments) {
    if (!seg.driven && eq.has_exact_free_evolution()) {
      eq.free_evolve(detuning, seg.end - seg.start, y.data());
      if (opts.store_stride > 0)
        record(seg.end, rho_view);
      continue;
    }
    if (opts.method == Integrator::exponential) {
      add_stats(ode::integrate_exponential(
          rates, nonlinear, y, seg.start, seg.end, opts.ode,
          [&](double t, std::span<const cd> yy) {
            return after_step(t, yy.data());
          }));
    } else {
      std::span<double> flat(reinterpret_cast<double *>(y.data()),
                             2 * y.size());
      add_stats(ode::integrate(
          full_rhs, flat, seg.start, seg.end, opts.ode,
          [&](double t, std::span<const double> yy) {
            return after_step(t, reinterpret_cast<const cd *>(yy.data()));
          }));
    }
  }

  audit(rho_view);
  traj.final_state = unload_state(rho_view, n);
  if (traj.time.back() != segments.back().end)
    record(segments.back().end, rho_view);
  traj.overlap = y[nn].real();
  return traj;
}

StokesResult detected_stokes(const PulseSpec &pulse, const BeamGeometry &beam,
                             const CloudGeometry &cloud,
                             const AtomModel &model, const Matrix &rho0,
                             const StokesOptions &opts) {
  pulse.validate();
  beam.validate();
  cloud.validate();
  check_density_matrix(rho0, model.equation.dim());

  const auto nodes = cloud_quadrature(cloud, opts.radial, opts.longitudinal);
  const int nz = opts.longitudinal;

  // The signal depends on z only through |M|, which is even in z, and the
  // wavefront phase drops out of the overlap (the atomic coherences carry
  // the same phase as the drive). Mirror pairs are therefore integrated
  // once with their masses combined.
  struct Job {
    double r, z, mass;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < opts.radial; ++i)
    for (int j = 0; j <= (nz - 1) / 2; ++j) {
      const auto &a = nodes[std::size_t(i * nz + j)];
      double mass = a.mass;
      if (j != nz - 1 - j)
        mass += nodes[std::size_t(i * nz + (nz - 1 - j))].mass;
      jobs.push_back({a.r, std::abs(a.z), mass});
    }

  const double fz0 = (rho0 * model.ops.fz).trace().real();
  std::vector<NodeOutcome> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());

  auto work = [&](std::size_t k) {
    try {
      const Job &job = jobs[k];
      LocalField field{beam.intensity_scale(job.r, job.z), 0.0};
      const Trajectory tr =
          integrate_node(rho0, pulse, beam, field, model, opts.integration);
      const Matrix settled = settle(model, tr.final_state, pulse.detuning);
      NodeOutcome &o = out[k];
      o.overlap = tr.overlap;
      o.fz_after = (settled * model.ops.fz).trace().real();
      o.f2 = (settled * model.ops.projector_f2).trace().real();
      o.trace_error = tr.max_trace_error;
      o.min_eigenvalue = tr.min_eigenvalue;
      o.steps = tr.stats.accepted + tr.stats.rejected;
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  unsigned workers = opts.workers > 0 ? unsigned(opts.workers)
                                      : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, unsigned(jobs.size()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k)
      work(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < jobs.size(); k += workers)
          work(k);
      });
    for (auto &t : pool)
      t.join();
  }
  for (const auto &e : errors)
    if (e)
      std::rethrow_exception(e);

  // Fixed-order reduction: identical results for any worker count.
  const double k = model.scheme.wavenumber();
  const double e0 =
      std::sqrt(pulse.photons * z0 * hbar * model.scheme.omega() / 2.0);
  const double prefactor =
      k * model.scheme.reduced_dipole() / (2.0 * epsilon0 * e0);
  const double t_peak = pulse.envelope_peak();

  StokesResult res;
  double signal = 0.0, weight = 0.0, weighted_fz = 0.0, f2 = 0.0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const double amp = beam.amplitude(jobs[j].r, jobs[j].z);
    signal += jobs[j].mass * amp * t_peak * out[j].overlap;
    const double w = jobs[j].mass * amp * amp;
    weight += w;
    weighted_fz += w * out[j].fz_after;
    f2 += jobs[j].mass * out[j].f2;
    res.max_trace_error = std::max(res.max_trace_error, out[j].trace_error);
    res.min_eigenvalue = std::min(res.min_eigenvalue, out[j].min_eigenvalue);
    res.steps += out[j].steps;
  }
  res.nodes = jobs.size();
  res.phi = prefactor * cloud.atoms * signal;
  res.sx = pulse.photons;
  res.sy = 2.0 * res.sx * res.phi;
  res.f2_population = f2;
  res.retained_polarization =
      std::abs(fz0) > 1e-12 ? weighted_fz / (weight * fz0)
                            : std::numeric_limits<double>::quiet_NaN();

  if (opts.check_convergence) {
    StokesOptions finer = opts;
    finer.radial *= 2;
    finer.longitudinal *= 2;
    finer.check_convergence = false;
    const StokesResult fine =
        detected_stokes(pulse, beam, cloud, model, rho0, finer);
    const double scale = std::max(std::abs(fine.sy), 1e-300);
    if (std::abs(fine.sy - res.sy) > opts.convergence_tolerance * scale)
      throw QuadratureNotConverged(
          "S_y changed by " + std::to_string(std::abs(fine.sy - res.sy) / scale) +
          " (relative) when doubling the node counts");
  }
  return res;
}

double rotation_angle_model(const PulseSpec &pulse, const BeamGeometry &beam,
                            const CloudGeometry &cloud, const AtomModel &model,
                            const Matrix &rho0, const StokesOptions &opts) {
  return detected_stokes(pulse, beam, cloud, model, rho0, opts).phi;
}

} // namespace nlmetro::dynamics
