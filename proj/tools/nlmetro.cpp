// nlmetro: command-line front end. Each subcommand resolves its settings
// from defaults, an optional config file and command-line overrides, runs,
// and writes manifest.conf (the resolved settings), log.txt and its data
// files into the output directory. Running again with
// `--config <out>/manifest.conf` reproduces the data files exactly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlmetro/coefficients.hpp"
#include "nlmetro/config.hpp"
#include "nlmetro/csv.hpp"
#include "nlmetro/dynamics.hpp"
#include "nlmetro/errors.hpp"
#include "nlmetro/experiment.hpp"
#include "nlmetro/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nlmetro;

namespace {

constexpr double two_pi = 6.283185307179586;

enum ExitCode { ok = 0, other_failure = 1, config_failure = 2,
                numerical_failure = 3 };

// Typed access to the merged config. Defaults are given as text and parsed
// exactly like user input; every value read is echoed into `resolved`, so
// the manifest is itself a complete config.
class Settings {
public:
  explicit Settings(KeyValueFile input) : input_(std::move(input)) {}

  std::string text(const std::string &key, const std::string &fallback) {
    const std::string v = input_.contains(key) ? input_.raw(key) : fallback;
    resolved_.set(key, v);
    return v;
  }
  double number(const std::string &key, const std::string &fallback) {
    return parse_quantity(text(key, fallback), Dimension::none);
  }
  double quantity(const std::string &key, Dimension dim,
                  const std::string &fallback) {
    return parse_quantity(text(key, fallback), dim);
  }
  long long integer(const std::string &key, const std::string &fallback) {
    KeyValueFile one;
    one.set(key, text(key, fallback));
    return one.get_integer(key);
  }
  bool flag(const std::string &key, const std::string &fallback) {
    KeyValueFile one;
    one.set(key, text(key, fallback));
    return one.get_bool(key, false);
  }
  std::vector<double> list(const std::string &key,
                           const std::string &fallback) {
    KeyValueFile one;
    one.set(key, text(key, fallback));
    return one.get_list(key);
  }
  //! "none" or a positive number.
  std::optional<double> optional_number(const std::string &key,
                                        const std::string &fallback) {
    const std::string v = text(key, fallback);
    if (v == "none")
      return std::nullopt;
    return parse_quantity(v, Dimension::none);
  }

  //! Keys in the input that no subcommand step asked for.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto &[k, v] : input_.entries())
      if (!resolved_.contains(k) && k.rfind("manifest.", 0) != 0)
        out.push_back(k);
    return out;
  }
  const KeyValueFile &resolved() const { return resolved_; }

private:
  KeyValueFile input_;
  KeyValueFile resolved_;
};

struct Run {
  std::string name;
  fs::path out;
  std::ofstream log;
  std::vector<std::string> written;

  void note(const std::string &line) {
    log << line << '\n';
    std::cout << line << '\n';
  }
  std::ofstream open(const std::string &file) {
    std::ofstream f(out / file);
    if (!f)
      throw InvalidConfig("cannot write " + (out / file).string());
    written.push_back(file);
    return f;
  }
};

std::string fmt(const char *format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Settings groups shared between subcommands.

experiment::SequenceConfig sequence_config(Settings &s, bool no_saturation) {
  experiment::SequenceConfig c;
  c.linear_photons = s.number("probe.linear_photons", "1.2e8");
  c.response.a_linear = s.number("response.a_linear", "3.3e-8");
  c.response.a_nonlinear = s.number("response.a_nonlinear", "0");
  c.response.b = s.number("response.b", "3.8e-16");
  c.response.n_sat = s.optional_number("response.n_sat",
                                       no_saturation ? "none" : "6.0e7");
  c.polarimeter.v_el_linear = s.number("polarimeter.v_el_linear", "3e5");
  c.polarimeter.v_el_nonlinear = s.number("polarimeter.v_el_nonlinear", "4e5");
  c.polarimeter.technical = s.number("polarimeter.technical", "0");
  c.polarimeter.t_h = s.number("polarimeter.t_h", "1");
  c.polarimeter.t_v = s.number("polarimeter.t_v", "1");
  c.polarimeter.noiseless = s.flag("polarimeter.noiseless", "false");
  c.damage.eta0 = s.number("damage.eta0", "0");
  c.damage.n_damage = s.number("damage.n_damage", "1.9e8");
  c.response.validate();
  c.polarimeter.validate();
  c.damage.validate();
  return c;
}

experiment::CampaignOptions campaign_options(Settings &s,
                                             const std::string &jitter) {
  experiment::CampaignOptions o;
  o.atoms_min = s.number("campaign.atoms_min", "1.5e5");
  o.atoms_max = s.number("campaign.atoms_max", "3.5e5");
  o.samples = int(s.integer("campaign.samples", "50"));
  o.controls = int(s.integer("campaign.controls", "10"));
  o.escape_fraction = s.number("campaign.escape_fraction", "0");
  o.slope_jitter = s.number("campaign.slope_jitter", jitter);
  o.workers = int(s.integer("campaign.workers", "0"));
  return o;
}

dynamics::StokesOptions stokes_options(Settings &s) {
  dynamics::StokesOptions o;
  o.radial = int(s.integer("nodes.radial", "9"));
  o.longitudinal = int(s.integer("nodes.longitudinal", "9"));
  o.check_convergence = s.flag("nodes.check_convergence", "false");
  o.workers = int(s.integer("nodes.workers", "0"));
  o.integration.ode.rtol = s.number("integrator.rtol", "1e-8");
  o.integration.ode.atol = s.number("integrator.atol", "1e-13");
  const std::string method = s.text("integrator.method", "dopri5");
  if (method == "dopri5")
    o.integration.method = dynamics::Integrator::dopri5;
  else if (method == "exponential")
    o.integration.method = dynamics::Integrator::exponential;
  else
    throw InvalidConfig("integrator.method must be dopri5 or exponential");
  return o;
}

dynamics::BeamGeometry beam_geometry(Settings &s) {
  dynamics::BeamGeometry b;
  b.waist = s.quantity("beam.waist", Dimension::length, "20 um");
  b.wavelength = s.quantity("beam.wavelength", Dimension::length, "780.241 nm");
  b.validate();
  return b;
}

// ---------------------------------------------------------------------------

void write_records(csv::Writer &w, const experiment::Campaign &c,
                   std::size_t campaign_index) {
  for (const auto &smp : c.samples)
    for (const auto &r : smp.sequence.records) {
      w << (long long)campaign_index << (long long)c.seed
        << (long long)smp.index << (long long)(smp.control ? 1 : 0)
        << smp.atoms << smp.sequence.f_z << experiment::to_string(r.tag)
        << r.photons << c.nonlinear_photons << r.sx << r.sy << r.t_h << r.t_v
        << r.phi();
      w.end_row();
    }
}

const std::vector<std::string> record_columns = {
    "campaign", "seed", "sequence", "control", "n_atoms", "f_z_true",
    "probe", "photons", "n_nl", "s_x", "s_y", "t_h", "t_v", "phi"};

void write_fit_report(std::ostream &out, const analysis::SaturationFit &fit) {
  out << "# parameter, value, stderr\n";
  out << "A_linear, " << csv::format(fit.a_linear) << ", fixed\n";
  out << "B, " << csv::format(fit.model.b) << ", "
      << csv::format(fit.b_stderr) << "\n";
  if (fit.model.n_sat)
    out << "N_sat, " << csv::format(*fit.model.n_sat) << ", "
        << csv::format(*fit.n_sat_stderr) << "\n";
  else
    out << "N_sat, none, unidentifiable\n";
  out << "reduced_chi2, " << csv::format(fit.reduced_chi2) << ", -\n";
  out << "iterations, " << fit.iterations << ", -\n";
}

void write_calibration(Run &run, const analysis::CalibrationStudy &st) {
  auto f = run.open("calibration.csv");
  csv::Writer w(f, {"n_nl", "slope", "slope_stderr", "intercept",
                    "intercept_stderr", "residual_std", "intrinsic_std",
                    "electronic_correction", "eta_mean", "eta_stderr",
                    "control_phi_l", "control_phi_nl", "fit_slope"},
                "calibration/1");
  for (const auto &p : st.points) {
    w << p.photons << p.regression.slope << p.regression.slope_stderr
      << p.regression.intercept << p.regression.intercept_stderr
      << p.regression.residual_std << p.noise.intrinsic
      << p.noise.relative_correction << p.eta_mean << p.eta_stderr
      << p.control_phi_l << p.control_phi_nl
      << st.fit.model.nonlinear_coefficient(p.photons) / st.fit.a_linear;
    w.end_row();
    if (p.noise.clipped)
      run.note("warning: electronic noise exceeds the residual at N_NL = " +
               csv::format(p.photons) + "; intrinsic noise clipped to 0");
  }
}

void log_fit(Run &run, const analysis::SaturationFit &fit) {
  run.note("saturation fit: B = " + fmt("%.4g", fit.model.b) + " +- " +
           fmt("%.2g", fit.b_stderr) +
           (fit.model.n_sat ? ", N_sat = " + fmt("%.4g", *fit.model.n_sat) +
                                  " +- " + fmt("%.2g", *fit.n_sat_stderr)
                            : ", N_sat unidentifiable (B-only model)") +
           ", reduced chi2 = " + fmt("%.3g", fit.reduced_chi2));
}

analysis::SaturationFitOptions fit_options(Settings &s, double jitter) {
  analysis::SaturationFitOptions o;
  o.relative_slope_noise =
      s.number("fit.relative_slope_noise", csv::format(jitter));
  return o;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct Flags {
  bool ideal = false;
  bool no_saturation = false;
  std::optional<double> detuning_mhz;
  std::string input;
};

void cmd_simulate(Run &run, Settings &s, const Flags &) {
  const auto model = dynamics::make_atom_model();
  const auto beam = beam_geometry(s);
  dynamics::CloudGeometry cloud;
  cloud.atoms = s.number("cloud.atoms", "7e5");
  cloud.sigma_t = s.quantity("cloud.sigma_t", Dimension::length, "14.142 um");
  cloud.sigma_l = s.quantity("cloud.sigma_l", Dimension::length, "3.17 mm");
  cloud.validate();
  auto pulse = dynamics::gaussian_pulse(
      s.quantity("pulse.fwhm", Dimension::time, "54 ns"),
      s.number("pulse.photons", "5.7e6"),
      two_pi * s.quantity("pulse.detuning", Dimension::frequency, "462 mhz"));
  pulse.validate();
  const double p = s.number("atoms.polarization", "1");
  const auto opts = stokes_options(s);
  const auto rho0 = dynamics::pseudo_spin_state(model.scheme, p);

  run.note("peak intensity on axis: " +
           fmt("%.4g", dynamics::peak_intensity(model, pulse, beam) * 1e-4) +
           " W/cm^2, peak Rabi frequency 2pi x " +
           fmt("%.4g", dynamics::peak_rabi(model, pulse, beam) / two_pi / 1e6) +
           " MHz");

  // Populations of the on-axis atom at the focus through the pulse.
  dynamics::IntegrationOptions io = opts.integration;
  io.store_stride = int(s.integer("trajectory.stride", "64"));
  const auto traj =
      dynamics::integrate_node(rho0, pulse, beam, {}, model, io);
  {
    auto f = run.open("populations.csv");
    csv::Writer w(f, {"t_ns", "intensity_norm", "p_1p1", "p_10_1m1",
                      "p_excited", "p_f2"},
                  "populations/1");
    const auto i11 = Eigen::Index(model.scheme.ground(1, 1));
    const auto i10 = Eigen::Index(model.scheme.ground(1, 0));
    const auto i1m = Eigen::Index(model.scheme.ground(1, -1));
    const double peak = pulse.envelope_peak();
    for (std::size_t k = 0; k < traj.time.size(); ++k) {
      const auto &rho = traj.states[k];
      const double t = traj.time[k];
      w << t * 1e9 << std::pow(pulse.envelope(t) / peak, 2)
        << rho(i11, i11).real() << (rho(i10, i10) + rho(i1m, i1m)).real()
        << (model.ops.projector_excited * rho).trace().real()
        << (model.ops.projector_f2 * rho).trace().real();
      w.end_row();
    }
  }

  const auto r = dynamics::detected_stokes(pulse, beam, cloud, model, rho0, opts);
  auto f = run.open("stokes.csv");
  csv::Writer w(f, {"detuning_mhz", "photons", "atoms", "s_x", "s_y", "phi",
                    "phi_per_atom", "retained_polarization", "f2_population",
                    "nodes", "steps", "max_trace_error", "min_eigenvalue"},
                "stokes/1");
  w << pulse.detuning / two_pi / 1e6 << pulse.photons << cloud.atoms << r.sx
    << r.sy << r.phi << r.phi / cloud.atoms << r.retained_polarization
    << r.f2_population << (long long)r.nodes << (long long)r.steps
    << r.max_trace_error << r.min_eigenvalue;
  w.end_row();
  run.note("rotation " + fmt("%.5g", r.phi) + " rad (" +
           fmt("%.5g", r.phi / cloud.atoms) + " per atom), retained "
           "polarization " + fmt("%.5f", r.retained_polarization));
}

void cmd_campaign(Run &run, Settings &s, const Flags &flags) {
  const auto cfg = sequence_config(s, flags.no_saturation);
  const auto opts = campaign_options(s, "0");
  const auto photons = s.list("campaign.photons", "1e7");
  const auto seed = std::uint64_t(s.integer("seed", "1"));
  auto f = run.open("records.csv");
  csv::Writer w(f, record_columns, "records/1");
  for (std::size_t k = 0; k < photons.size(); ++k) {
    const auto c = experiment::generate_correlation_campaign(
        photons[k], cfg, opts, analysis::campaign_seed(seed, k));
    write_records(w, c, k);
    run.note("campaign N_NL = " + fmt("%.3g", photons[k]) + ": " +
             std::to_string(c.samples.size()) + " preparations, gain " +
             fmt("%.4f", c.gain));
  }
}

void cmd_analyze(Run &run, Settings &s, const Flags &flags) {
  const std::string input =
      flags.input.empty() ? s.text("analyze.input", "") : flags.input;
  if (input.empty())
    throw InvalidConfig("analyze: no input (use --input or analyze.input)");
  const auto table = csv::read(input);
  const auto cfg = sequence_config(s, flags.no_saturation);

  // Rebuild the campaigns from the record rows.
  std::map<long long, experiment::Campaign> campaigns;
  std::map<std::pair<long long, long long>, std::size_t> slot;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto k = (long long)table.number(i, "campaign");
    const auto seq = (long long)table.number(i, "sequence");
    auto &c = campaigns[k];
    c.nonlinear_photons = table.number(i, "n_nl");
    auto [it, fresh] = slot.try_emplace({k, seq}, c.samples.size());
    if (fresh) {
      c.samples.emplace_back();
      c.samples.back().index = std::uint64_t(seq);
      c.samples.back().control = table.number(i, "control") != 0.0;
      c.samples.back().atoms = table.number(i, "n_atoms");
    }
    auto &sq = c.samples[it->second].sequence;
    const auto tag = experiment::parse_probe_tag(table.text(i, "probe"));
    const double phi = table.number(i, "phi");
    if (tag == experiment::ProbeTag::linear_first)
      sq.phi_l = phi;
    else if (tag == experiment::ProbeTag::nonlinear)
      sq.phi_nl = phi;
    else
      sq.phi_l2 = phi;
  }
  for (auto &[k, c] : campaigns)
    for (auto &smp : c.samples)
      if (smp.sequence.phi_l != 0.0)
        smp.sequence.eta = 1.0 - smp.sequence.phi_l2 / smp.sequence.phi_l;

  analysis::CalibrationStudy st;
  std::vector<analysis::SlopePoint> slopes;
  for (const auto &[k, c] : campaigns) {
    st.points.push_back(analysis::analyze_campaign(c, cfg.polarimeter));
    const auto &r = st.points.back().regression;
    slopes.push_back({c.nonlinear_photons, r.slope, r.slope_stderr});
    run.note("N_NL = " + fmt("%.4g", c.nonlinear_photons) + ": slope " +
             fmt("%.5g", r.slope) + " +- " + fmt("%.2g", r.slope_stderr) +
             ", residual " + fmt("%.3g", r.residual_std) + " rad");
  }
  std::sort(st.points.begin(), st.points.end(),
            [](const auto &a, const auto &b) { return a.photons < b.photons; });

  if (slopes.size() >= 3) {
    st.fit = analysis::fit_saturation(slopes, cfg.response.a_linear,
                                      fit_options(s, 0.0));
    log_fit(run, st.fit);
    auto rep = run.open("fit_report.txt");
    write_fit_report(rep, st.fit);
  } else {
    st.fit.a_linear = cfg.response.a_linear;
    run.note("fewer than 3 photon numbers: saturation fit skipped");
  }
  write_calibration(run, st);
}

analysis::StudyOptions study_options(Settings &s, const std::string &lo,
                                     const std::string &hi,
                                     const std::string &points,
                                     const std::string &jitter, bool ideal) {
  analysis::StudyOptions o;
  o.photons = experiment::log_space(s.number("study.photons_min", lo),
                                    s.number("study.photons_max", hi),
                                    int(s.integer("study.points", points)));
  o.campaign = campaign_options(s, jitter);
  o.f_z = s.number("study.f_z", "7e5");
  o.ideal = s.flag("analysis.ideal", ideal ? "true" : "false");
  return o;
}

void cmd_fig2(Run &run, Settings &s, const Flags &flags) {
  const auto cfg = sequence_config(s, flags.no_saturation);
  const auto opts = study_options(s, "1e6", "1e8", "10", "0.05", flags.ideal);
  const auto seed = std::uint64_t(s.integer("seed", "1"));
  auto fo = fit_options(s, opts.campaign.slope_jitter);

  analysis::CalibrationStudy st;
  std::vector<analysis::SlopePoint> slopes;
  const auto examples = s.list("fig2.correlation_photons", "1e7,5e7");
  auto pairs = run.open("correlation.csv");
  csv::Writer pw(pairs, {"n_nl", "n_atoms", "control", "phi_l", "phi_nl"},
                 "correlation/1");
  for (std::size_t k = 0; k < opts.photons.size(); ++k) {
    const auto c = experiment::generate_correlation_campaign(
        opts.photons[k], cfg, opts.campaign, analysis::campaign_seed(seed, k));
    st.points.push_back(analysis::analyze_campaign(c, cfg.polarimeter));
    const auto &r = st.points.back().regression;
    slopes.push_back({opts.photons[k], r.slope, r.slope_stderr});
    for (double e : examples)
      if (std::abs(opts.photons[k] / e - 1.0) < 1e-9)
        for (const auto &smp : c.samples) {
          pw << opts.photons[k] << smp.atoms
             << (long long)(smp.control ? 1 : 0) << smp.sequence.phi_l
             << smp.sequence.phi_nl;
          pw.end_row();
        }
  }
  st.fit = analysis::fit_saturation(slopes, cfg.response.a_linear, fo);
  log_fit(run, st.fit);
  write_calibration(run, st);
  auto rep = run.open("fit_report.txt");
  write_fit_report(rep, st.fit);
}

void cmd_fig3(Run &run, Settings &s, const Flags &flags) {
  const auto cfg = sequence_config(s, flags.no_saturation);
  auto opts = study_options(s, "5e5", "1e8", "16", "0", flags.ideal);
  opts.fit = fit_options(s, opts.campaign.slope_jitter);
  const auto seed = std::uint64_t(s.integer("seed", "1"));
  const auto st = analysis::run_calibration_study(cfg, opts, seed);
  log_fit(run, st.fit);

  auto f = run.open("fig3.csv");
  csv::Writer w(f, {"n_nl", "fractional_sensitivity", "model_sensitivity",
                    "eta", "eta_stderr", "sql", "hl", "sh"},
                "fig3/1");
  // Reference lines through the model value at the first point.
  const double n0 = st.model.photons.front();
  const double s0 = st.model.sensitivity.front();
  std::size_t m = 0;
  for (std::size_t k = 0; k < st.points.size(); ++k) {
    const double n = st.points[k].photons;
    double measured = std::nan("");
    if (m < st.measured.photons.size() && st.measured.photons[m] == n)
      measured = st.measured.sensitivity[m++];
    w << n << measured << st.model.sensitivity[k] << st.points[k].eta_mean
      << st.points[k].eta_stderr << s0 * std::pow(n / n0, -0.5)
      << s0 * std::pow(n / n0, -1.0) << s0 * std::pow(n / n0, -1.5);
    w.end_row();
  }

  auto rep = run.open("exponent_report.txt");
  rep << "# curve, window_lo, window_hi, exponent, stderr, points\n";
  const double windows[2][2] = {{1e6, 1e7}, {5e5, 5e7}};
  for (const auto *name : {"measured", "model"}) {
    const auto &curve = std::string(name) == "measured" ? st.measured : st.model;
    for (const auto &win : windows) {
      const auto e = analysis::scaling_exponent(curve, win[0], win[1]);
      rep << name << ", " << csv::format(win[0]) << ", "
          << csv::format(win[1]) << ", " << csv::format(e.exponent) << ", "
          << csv::format(e.stderr_exponent) << ", " << e.points << "\n";
      run.note(std::string(name) + " exponent over [" + fmt("%.0e", win[0]) +
               ", " + fmt("%.0e", win[1]) + "]: " + fmt("%.4f", e.exponent) +
               " +- " + fmt("%.3f", e.stderr_exponent));
    }
  }
}

void cmd_control(Run &run, Settings &s, const Flags &flags) {
  const auto cfg = sequence_config(s, flags.no_saturation);
  const auto seed = std::uint64_t(s.integer("seed", "1"));
  const auto photons = experiment::log_space(
      s.number("control.photons_min", "5e5"),
      s.number("control.photons_max", "1e8"),
      int(s.integer("control.points", "16")));
  experiment::ControlOptions co;
  co.samples = int(s.integer("control.samples", "400"));
  co.subtract_electronic = s.flag("control.subtract_electronic", "true");
  const double rotation = s.number("control.rotation", "2.5e-3");
  const auto run_wp = experiment::waveplate_control_run(
      rotation, photons, cfg.polarimeter, co, seed);
  {
    auto f = run.open("control.csv");
    csv::Writer w(f, {"photons", "mean_angle", "angle_std", "intrinsic_std",
                      "stderr_angle", "fractional_sensitivity"},
                  "control/1");
    for (const auto &p : run_wp.points) {
      w << p.photons << p.mean_angle << p.angle_std << p.intrinsic_std
        << p.stderr_angle << p.intrinsic_std / std::abs(p.mean_angle);
      w.end_row();
    }
  }
  if (!cfg.polarimeter.noiseless) {
    const auto e = analysis::scaling_exponent(run_wp.curve, photons.front(),
                                              photons.back());
    run.note("wave plate: noise exponent " + fmt("%.4f", e.exponent) + " +- " +
             fmt("%.3f", e.stderr_exponent));
  }

  // No-atom noise budget of the nonlinear detector.
  const auto vp = experiment::noise_calibration_run(
      experiment::log_space(s.number("noise.photons_min", "1e5"),
                            s.number("noise.photons_max", "3e7"),
                            int(s.integer("noise.points", "12"))),
      int(s.integer("noise.pulses", "1000")), cfg.polarimeter,
      experiment::ProbeTag::nonlinear, analysis::campaign_seed(seed, 1000));
  if (cfg.polarimeter.noiseless) {
    run.note("noiseless polarimeter: variance decomposition skipped");
    return;
  }
  // "calibrated": shot term held at the detected photon number, as in the
  // usual V_el + N calibration curve; "free": fitted like the other terms.
  const auto shot_mode = s.text("noise.shot_term", "calibrated");
  analysis::VarianceFitOptions vo;
  if (shot_mode == "calibrated")
    vo.fixed_shot = std::sqrt(cfg.polarimeter.t_h * cfg.polarimeter.t_v);
  else if (shot_mode != "free")
    throw InvalidConfig("noise.shot_term must be 'calibrated' or 'free'");
  const auto fit = analysis::fit_variance_model(vp, vo);
  {
    auto f = run.open("variance.csv");
    csv::Writer w(f, {"photons", "variance", "fit"}, "variance/1");
    for (const auto &p : vp) {
      w << p.photons << p.variance
        << fit.electronic + fit.shot * p.photons +
               fit.technical * p.photons * p.photons;
      w.end_row();
    }
  }
  auto rep = run.open("noise_report.txt");
  rep << "# parameter, value, stderr\n"
      << "V_el, " << csv::format(fit.electronic) << ", "
      << csv::format(fit.electronic_stderr) << "\n"
      << "shot, " << csv::format(fit.shot) << ", "
      << (fit.shot_fixed ? std::string("fixed") : csv::format(fit.shot_stderr))
      << "\n"
      << "technical, " << csv::format(fit.technical) << ", "
      << csv::format(fit.technical_stderr) << "\n"
      << "crossing, " << csv::format(fit.crossing()) << ", -\n";
  run.note("noise: V_el = " + fmt("%.4g", fit.electronic) + ", shot " +
           fmt("%.4f", fit.shot) + ", technical " + fmt("%.3g", fit.technical) +
           "; electronic = shot at N = " + fmt("%.4g", fit.crossing()));
}

void cmd_coefficients(Run &run, Settings &s, const Flags &flags) {
  const auto model = dynamics::make_atom_model();
  atomic::CoefficientOptions co;
  co.pulse_fwhm = s.quantity("pulse.fwhm", Dimension::time, "54 ns");
  co.base_photons = s.number("coefficients.base_photons", "2e5");
  co.beam = beam_geometry(s);
  co.integration = stokes_options(s).integration;

  std::vector<double> grid;
  if (flags.detuning_mhz) {
    grid = {*flags.detuning_mhz};
    s.text("coefficients.detunings_mhz", csv::format(*flags.detuning_mhz));
  } else {
    grid = s.list("coefficients.detunings_mhz",
                  "300,350,400,440,450,460,470,480,500,550,600,700,800,1000,"
                  "1200,1500");
  }
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw InvalidConfig("coefficients.detunings_mhz must be increasing");

  std::vector<double> rad;
  for (double d : grid)
    rad.push_back(two_pi * 1e6 * d);
  const auto scan = atomic::scan_coefficients(model, rad, co);
  auto f = run.open("coefficients.csv");
  csv::Writer w(f, {"detuning_mhz", "alpha1", "beta1", "alpha1_sign",
                    "beta1_sign"},
                "coefficients/1");
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const auto &c = scan[i];
    w << grid[i] << c.alpha1 << c.beta1 << (long long)(c.alpha1 < 0 ? -1 : 1)
      << (long long)(c.beta1 < 0 ? -1 : 1);
    w.end_row();
  }

  if (s.flag("coefficients.find_zero", flags.detuning_mhz ? "false" : "true")) {
    const double lo = s.quantity("coefficients.zero_lo", Dimension::frequency,
                                 "440 mhz");
    const double hi = s.quantity("coefficients.zero_hi", Dimension::frequency,
                                 "500 mhz");
    const auto z = atomic::find_alpha1_zero(model, two_pi * lo, two_pi * hi, co);
    auto rep = run.open("zero_crossing.txt");
    rep << "# parameter, value, stderr\n"
        << "zero_detuning_mhz, " << csv::format(z.detuning / two_pi / 1e6)
        << ", 1e-3\n"
        << "beta1_at_zero, " << csv::format(z.at.beta1) << ", -\n"
        << "evaluations, " << z.evaluations << ", -\n";
    run.note("alpha1 = 0 at 2pi x " + fmt("%.3f", z.detuning / two_pi / 1e6) +
             " MHz, beta1 there " + fmt("%.4g", z.at.beta1));
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Simulation and analysis of nonlinear Faraday-rotation "
               "metrology in a cold 87Rb ensemble"};
  app.set_version_flag("--version", std::string(NLMETRO_VERSION));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<long long> seed, nodes_radial, nodes_longitudinal;
  std::vector<std::string> sets;
  Flags flags;
  double detuning = 0.0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Maxwell-Bloch rotation of one probe pulse through the cloud"},
      {"campaign", "Synthetic correlation-plot campaigns (records.csv)"},
      {"analyze", "Regression and saturation fit of a records.csv"},
      {"reproduce-fig2", "Calibration of the nonlinear rotation vs N_NL"},
      {"reproduce-fig3", "Sensitivity scaling vs N_NL with exponent report"},
      {"control-run", "Wave-plate linearity check and noise decomposition"},
      {"coefficients-scan", "alpha1 / beta1 spectra and the alpha1 zero"}};

  for (const auto &[name, help] : commands) {
    auto *sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Key-value config file");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--out", out_dir, "Output directory (default out/<cmd>)");
    sub->add_option("--nodes-radial", nodes_radial, "Radial quadrature nodes");
    sub->add_option("--nodes-longitudinal", nodes_longitudinal,
                    "Longitudinal quadrature nodes");
    sub->add_flag("--ideal", flags.ideal,
                  "Sensitivity without the saturation factor");
    sub->add_flag("--no-saturation", flags.no_saturation,
                  "Generate data without nonlinear saturation");
    sub->add_option("--detuning-mhz", detuning,
                    "Probe detuning from F=1 -> F'=0 (MHz)");
    sub->add_option("--set", sets, "Override a config key: key=value");
    if (name == "analyze")
      sub->add_option("--input", flags.input, "records.csv to analyze");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_failure;
  }

  const auto *sub = app.get_subcommands().front();
  Run run;
  run.name = sub->get_name();
  try {
    KeyValueFile input;
    if (!config_path.empty())
      input = KeyValueFile::load(config_path);
    if (seed)
      input.set("seed", std::to_string(*seed));
    if (nodes_radial)
      input.set("nodes.radial", std::to_string(*nodes_radial));
    if (nodes_longitudinal)
      input.set("nodes.longitudinal", std::to_string(*nodes_longitudinal));
    if (sub->count("--detuning-mhz")) {
      flags.detuning_mhz = detuning;
      if (run.name == "simulate")
        input.set("pulse.detuning", csv::format(detuning) + " mhz");
    }
    if (flags.ideal)
      input.set("analysis.ideal", "true");
    if (flags.no_saturation)
      input.set("response.n_sat", "none");
    for (const auto &kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw InvalidConfig("--set expects key=value, got '" + kv + "'");
      input.set(kv.substr(0, eq), kv.substr(eq + 1));
    }

    run.out = out_dir.empty() ? fs::path("out") / run.name : fs::path(out_dir);
    fs::create_directories(run.out);
    run.log.open(run.out / "log.txt");
    run.log << "nlmetro " << NLMETRO_VERSION << " " << run.name << "\n";
    run.log << "command:";
    for (int i = 0; i < argc; ++i)
      run.log << ' ' << argv[i];
    run.log << "\n";

    Settings settings(input);
    const auto t0 = std::chrono::steady_clock::now();
    if (run.name == "simulate")
      cmd_simulate(run, settings, flags);
    else if (run.name == "campaign")
      cmd_campaign(run, settings, flags);
    else if (run.name == "analyze")
      cmd_analyze(run, settings, flags);
    else if (run.name == "reproduce-fig2")
      cmd_fig2(run, settings, flags);
    else if (run.name == "reproduce-fig3")
      cmd_fig3(run, settings, flags);
    else if (run.name == "control-run")
      cmd_control(run, settings, flags);
    else
      cmd_coefficients(run, settings, flags);

    for (const auto &k : settings.unused())
      run.note("warning: config key '" + k + "' is not used by " + run.name);
    {
      std::ofstream m(run.out / "manifest.conf");
      m << "# nlmetro " << NLMETRO_VERSION << " " << run.name << "\n"
        << "# Resolved settings; pass back with --config to reproduce.\n"
        << "manifest.version = " << NLMETRO_VERSION << "\n"
        << "manifest.subcommand = " << run.name << "\n"
        << settings.resolved().serialize();
    }
    run.log << "outputs:";
    for (const auto &w : run.written)
      run.log << ' ' << w;
    run.log << "\nelapsed: "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count()
            << " s\n";
    return ok;
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    if (run.log.is_open())
      run.log << "configuration error: " << e.what() << '\n';
    return config_failure;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    if (run.log.is_open())
      run.log << "numerical failure: " << e.what() << '\n';
    return numerical_failure;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    if (run.log.is_open())
      run.log << "error: " << e.what() << '\n';
    return other_failure;
  }
}
