#include "nlmetro/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "nlmetro/errors.hpp"

namespace nlmetro::experiment {

std::string to_string(ProbeTag tag) {
  switch (tag) {
  case ProbeTag::linear_first:
    return "L1";
  case ProbeTag::nonlinear:
    return "NL";
  default:
    return "L2";
  }
}

ProbeTag parse_probe_tag(const std::string &s) {
  if (s == "L1")
    return ProbeTag::linear_first;
  if (s == "NL")
    return ProbeTag::nonlinear;
  if (s == "L2")
    return ProbeTag::linear_second;
  throw InvalidConfig("unknown probe tag '" + s + "'");
}

double StokesRecord::phi() const {
  return sy / (2.0 * sx * std::sqrt(t_h * t_v));
}

void StokesRecord::validate() const {
  if (!(photons > 0.0))
    throw InvalidConfig("stokes record: photon number must be positive");
  if (!(t_h > 0.0 && t_h <= 1.0 && t_v > 0.0 && t_v <= 1.0))
    throw InvalidConfig("stokes record: transmissions must lie in (0, 1]");
  if (!(std::abs(sy) <= sx))
    throw InvalidConfig("stokes record: |S_y| exceeds S_x");
}

// ---------------------------------------------------------------------------

void PolarimeterModel::validate() const {
  if (!(v_el_linear >= 0.0) || !(v_el_nonlinear >= 0.0))
    throw InvalidConfig("polarimeter: electronic noise must be >= 0");
  if (!(technical >= 0.0))
    throw InvalidConfig("polarimeter: technical noise must be >= 0");
  if (!(t_h > 0.0 && t_h <= 1.0 && t_v > 0.0 && t_v <= 1.0))
    throw InvalidConfig("polarimeter: transmissions must lie in (0, 1]");
}

double PolarimeterModel::electronic(ProbeTag tag) const {
  return tag == ProbeTag::nonlinear ? v_el_nonlinear : v_el_linear;
}

double PolarimeterModel::signal_variance(ProbeTag tag, double photons) const {
  const double detected = photons * std::sqrt(t_h * t_v);
  return electronic(tag) + detected + technical * detected * detected;
}

double PolarimeterModel::angle_noise(ProbeTag tag, double photons) const {
  if (!(photons > 0.0))
    throw InvalidConfig("polarimeter: photon number must be positive");
  return std::sqrt(signal_variance(tag, photons)) /
         (2.0 * photons * std::sqrt(t_h * t_v));
}

StokesRecord PolarimeterModel::detect(ProbeTag tag, double photons, double phi,
                                      std::mt19937_64 &rng) const {
  if (!(photons > 0.0))
    throw InvalidConfig("polarimeter: photon number must be positive");
  StokesRecord r;
  r.tag = tag;
  r.photons = photons;
  r.sx = photons;
  r.t_h = t_h;
  r.t_v = t_v;
  r.sy = 2.0 * phi * photons * std::sqrt(t_h * t_v);
  if (!noiseless) {
    std::normal_distribution<double> noise(0.0, 1.0);
    r.sy += std::sqrt(signal_variance(tag, photons)) * noise(rng);
  }
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------

void ResponseModel::validate() const {
  if (!std::isfinite(a_linear) || !std::isfinite(a_nonlinear) ||
      !std::isfinite(b))
    throw InvalidConfig("response: coefficients must be finite");
  if (n_sat && !(*n_sat > 0.0))
    throw InvalidConfig("response: N_sat must be positive");
}

double ResponseModel::linear(double f_z) const { return 0.5 * a_linear * f_z; }

double ResponseModel::nonlinear(double f_z, double photons) const {
  const double sat = n_sat ? 1.0 + photons / *n_sat : 1.0;
  return 0.5 * (a_nonlinear + b * photons / sat) * f_z;
}

void DamageModel::validate() const {
  if (!(eta0 >= 0.0 && eta0 < 1.0))
    throw InvalidConfig("damage: eta0 must lie in [0, 1)");
  if (table.empty() && !(n_damage > 0.0))
    throw InvalidConfig("damage: n_damage must be positive");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!(table[i].first > 0.0) || !(table[i].second >= 0.0) ||
        !(table[i].second <= 1.0))
      throw InvalidConfig("damage: table entries need N > 0, eta in [0, 1]");
    if (i > 0 && !(table[i].first > table[i - 1].first))
      throw InvalidConfig("damage: table photon numbers must increase");
  }
}

double DamageModel::operator()(double photons) const {
  double pumped = 0.0;
  if (table.empty()) {
    pumped = -std::expm1(-photons / n_damage);
  } else if (photons <= table.front().first) {
    // Optical pumping is linear in the pulse energy at low N.
    pumped = table.front().second * photons / table.front().first;
  } else if (photons >= table.back().first) {
    pumped = table.back().second;
  } else {
    const auto hi = std::upper_bound(
        table.begin(), table.end(), photons,
        [](double n, const auto &e) { return n < e.first; });
    const auto lo = hi - 1;
    const double w = std::log(photons / lo->first) /
                     std::log(hi->first / lo->first);
    pumped = lo->second + w * (hi->second - lo->second);
  }
  return eta0 + (1.0 - eta0) * pumped;
}

DamageModel damage_from_dynamics(const std::vector<double> &photons,
                                 const dynamics::PulseSpec &pulse,
                                 const dynamics::BeamGeometry &beam,
                                 const dynamics::CloudGeometry &cloud,
                                 const dynamics::AtomModel &model,
                                 const dynamics::StokesOptions &opts) {
  DamageModel d;
  const auto rho0 = dynamics::pseudo_spin_state(model.scheme, 1.0);
  for (double n : photons) {
    auto p = pulse;
    p.photons = n;
    const auto s = dynamics::detected_stokes(p, beam, cloud, model, rho0, opts);
    d.table.emplace_back(n, std::clamp(1.0 - s.retained_polarization, 0.0, 1.0));
  }
  std::sort(d.table.begin(), d.table.end());
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                    std::uint32_t(index), std::uint32_t(index >> 32)};
  return std::mt19937_64(seq);
}

SequenceResult run_sequence(double f_z, double nonlinear_photons,
                            const SequenceConfig &config,
                            std::mt19937_64 &rng) {
  if (!(config.linear_photons > 0.0) || !(nonlinear_photons > 0.0))
    throw InvalidConfig("run_sequence: photon numbers must be positive");
  if (!std::isfinite(f_z))
    throw InvalidConfig("run_sequence: F_z must be finite");
  config.response.validate();
  config.polarimeter.validate();
  config.damage.validate();

  const auto &pol = config.polarimeter;
  SequenceResult out;
  out.f_z = f_z;
  out.records[0] = pol.detect(ProbeTag::linear_first, config.linear_photons,
                              config.response.linear(f_z), rng);
  out.records[1] = pol.detect(
      ProbeTag::nonlinear, nonlinear_photons,
      config.nonlinear_gain * config.response.nonlinear(f_z, nonlinear_photons),
      rng);
  out.f_z_after = f_z * (1.0 - config.damage(nonlinear_photons));
  out.records[2] = pol.detect(ProbeTag::linear_second, config.linear_photons,
                              config.response.linear(out.f_z_after), rng);

  out.phi_l = out.records[0].phi();
  out.phi_nl = out.records[1].phi();
  out.phi_l2 = out.records[2].phi();
  if (out.phi_l != 0.0)
    out.eta = 1.0 - out.phi_l2 / out.phi_l;
  return out;
}

SequenceResult run_sequence(double f_z, double nonlinear_photons,
                            const SequenceConfig &config, std::uint64_t seed) {
  auto rng = derived_rng(seed, 0);
  return run_sequence(f_z, nonlinear_photons, config, rng);
}

// ---------------------------------------------------------------------------

std::vector<double> Campaign::phi_linear(bool controls) const {
  std::vector<double> v;
  for (const auto &s : samples)
    if (s.control == controls)
      v.push_back(s.sequence.phi_l);
  return v;
}

std::vector<double> Campaign::phi_nonlinear(bool controls) const {
  std::vector<double> v;
  for (const auto &s : samples)
    if (s.control == controls)
      v.push_back(s.sequence.phi_nl);
  return v;
}

double Campaign::mean_eta() const {
  double sum = 0.0;
  int n = 0;
  for (const auto &s : samples)
    if (!s.control && s.sequence.eta) {
      sum += *s.sequence.eta;
      ++n;
    }
  return n ? sum / n : 0.0;
}

namespace {

template <class Fn> void parallel_for(std::size_t count, int workers, Fn fn) {
  std::size_t threads =
      workers > 0 ? std::size_t(workers)
                  : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < count;) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true))
            failure = std::current_exception();
        }
      }
    });
  for (auto &th : pool)
    th.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace

Campaign generate_correlation_campaign(double nonlinear_photons,
                                       const SequenceConfig &config,
                                       const CampaignOptions &opts,
                                       std::uint64_t seed) {
  if (opts.samples < 10)
    throw InvalidConfig("campaign: need at least 10 samples");
  if (opts.controls < 0)
    throw InvalidConfig("campaign: negative control count");
  if (!(opts.atoms_min > 0.0) || !(opts.atoms_max >= opts.atoms_min))
    throw InvalidConfig("campaign: bad atom-number range");
  if (!(opts.escape_fraction >= 0.0 && opts.escape_fraction < 1.0))
    throw InvalidConfig("campaign: escape fraction must lie in [0, 1)");
  if (!(opts.slope_jitter >= 0.0))
    throw InvalidConfig("campaign: slope jitter must be >= 0");

  Campaign c;
  c.nonlinear_photons = nonlinear_photons;
  c.seed = seed;
  // Stream 0 is reserved for campaign-wide draws.
  if (opts.slope_jitter > 0.0 && !config.polarimeter.noiseless) {
    auto rng = derived_rng(seed, 0);
    c.gain = 1.0 + opts.slope_jitter * std::normal_distribution<double>()(rng);
  }
  SequenceConfig cfg = config;
  cfg.nonlinear_gain *= c.gain;

  // Preparations per loading cycle when atoms escape at each reset.
  int cycle = 1;
  if (opts.escape_fraction > 0.0)
    cycle = 1 + int(std::floor(std::log(opts.atoms_min / opts.atoms_max) /
                               std::log(1.0 - opts.escape_fraction)));

  const auto total = std::size_t(opts.samples + opts.controls);
  c.samples.resize(total);
  parallel_for(total, opts.workers, [&](std::size_t i) {
    auto rng = derived_rng(seed, i + 1);
    CampaignSample &s = c.samples[i];
    s.index = i;
    s.control = i >= std::size_t(opts.samples);
    if (s.control) {
      s.atoms = 0.0;
    } else if (opts.escape_fraction > 0.0) {
      s.atoms = opts.atoms_max *
                std::pow(1.0 - opts.escape_fraction, double(int(i) % cycle));
    } else {
      s.atoms = std::uniform_real_distribution<double>(opts.atoms_min,
                                                       opts.atoms_max)(rng);
    }
    // The ensemble is fully polarized: F_z = N_A.
    s.sequence = run_sequence(s.atoms, nonlinear_photons, cfg, rng);
  });
  return c;
}

// ---------------------------------------------------------------------------

ControlRun waveplate_control_run(double rotation,
                                 const std::vector<double> &photons,
                                 const PolarimeterModel &polarimeter,
                                 const ControlOptions &opts,
                                 std::uint64_t seed) {
  polarimeter.validate();
  if (!(std::abs(rotation) > 0.0) || !(std::abs(rotation) < 0.05))
    throw InvalidConfig("control run: rotation must be nonzero and small");
  if (opts.samples < 2)
    throw InvalidConfig("control run: need at least 2 pulses per point");

  ControlRun run;
  run.rotation = rotation;
  std::vector<double> ns, sens;
  for (std::size_t k = 0; k < photons.size(); ++k) {
    auto rng = derived_rng(seed, k + 1);
    std::vector<double> angles;
    for (int i = 0; i < opts.samples; ++i)
      angles.push_back(
          polarimeter.detect(opts.detector, photons[k], rotation, rng).phi());
    ControlPoint p;
    p.photons = photons[k];
    p.mean_angle = analysis::mean(angles);
    p.angle_std = analysis::stddev(angles);
    p.stderr_angle = p.angle_std / std::sqrt(double(angles.size()));
    p.intrinsic_std = p.angle_std;
    if (opts.subtract_electronic) {
      const auto corr = analysis::remove_electronic_noise(
          p.angle_std, polarimeter.electronic(opts.detector), photons[k],
          polarimeter.t_h, polarimeter.t_v);
      if (!corr.clipped)
        p.intrinsic_std = corr.intrinsic;
    }
    run.points.push_back(p);
    ns.push_back(p.photons);
    sens.push_back(p.intrinsic_std / std::abs(p.mean_angle));
  }
  if (!polarimeter.noiseless)
    run.curve = analysis::make_curve(std::move(ns), std::move(sens));
  return run;
}

std::vector<analysis::VariancePoint>
noise_calibration_run(const std::vector<double> &photons, int pulses,
                      const PolarimeterModel &polarimeter, ProbeTag detector,
                      std::uint64_t seed) {
  polarimeter.validate();
  if (pulses < 2)
    throw InvalidConfig("noise run: need at least 2 pulses per point");
  std::vector<analysis::VariancePoint> out;
  for (std::size_t k = 0; k < photons.size(); ++k) {
    auto rng = derived_rng(seed, k + 1);
    std::vector<double> sy;
    for (int i = 0; i < pulses; ++i)
      sy.push_back(polarimeter.detect(detector, photons[k], 0.0, rng).sy);
    const double sd = analysis::stddev(sy);
    out.push_back({photons[k], sd * sd});
  }
  return out;
}

std::vector<double> log_space(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2)
    throw InvalidConfig("log_space: need 0 < lo < hi and count >= 2");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    v[std::size_t(i)] = lo * std::pow(hi / lo, double(i) / (count - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

} // namespace nlmetro::experiment
