#include "nlmetro/pipeline.hpp"

#include <cmath>

#include "nlmetro/errors.hpp"

namespace nlmetro::analysis {

CalibrationPoint analyze_campaign(const experiment::Campaign &campaign,
                                  const experiment::PolarimeterModel &pol) {
  CalibrationPoint p;
  p.photons = campaign.nonlinear_photons;
  const auto x = campaign.phi_linear();
  const auto y = campaign.phi_nonlinear();
  p.regression = linear_regression(x, y);
  p.noise = remove_electronic_noise(
      p.regression.residual_std,
      pol.electronic(experiment::ProbeTag::nonlinear), p.photons, pol.t_h,
      pol.t_v);

  std::vector<double> eta;
  for (const auto &s : campaign.samples)
    if (!s.control && s.sequence.eta)
      eta.push_back(*s.sequence.eta);
  if (!eta.empty())
    p.eta_mean = mean(eta);
  if (eta.size() > 1)
    p.eta_stderr = stddev(eta) / std::sqrt(double(eta.size()));

  const auto cl = campaign.phi_linear(true);
  const auto cn = campaign.phi_nonlinear(true);
  if (!cl.empty()) {
    p.control_phi_l = mean(cl);
    p.control_phi_nl = mean(cn);
  }
  if (cl.size() > 1) {
    p.control_phi_l_stderr = stddev(cl) / std::sqrt(double(cl.size()));
    p.control_phi_nl_stderr = stddev(cn) / std::sqrt(double(cn.size()));
  }
  return p;
}

std::uint64_t campaign_seed(std::uint64_t seed, std::size_t k) {
  auto rng = experiment::derived_rng(seed, 0x9e3779b97f4a7c15ULL + k);
  return rng();
}

CalibrationStudy run_calibration_study(const experiment::SequenceConfig &config,
                                       const StudyOptions &opts,
                                       std::uint64_t seed) {
  if (opts.photons.size() < 3)
    throw InsufficientPoints("calibration study: need 3 photon numbers");
  CalibrationStudy study;
  std::vector<SlopePoint> slopes;
  for (std::size_t k = 0; k < opts.photons.size(); ++k) {
    const auto campaign = experiment::generate_correlation_campaign(
        opts.photons[k], config, opts.campaign, campaign_seed(seed, k));
    study.points.push_back(analyze_campaign(campaign, config.polarimeter));
    const auto &r = study.points.back().regression;
    slopes.push_back({opts.photons[k], r.slope, r.slope_stderr});
  }
  study.fit = fit_saturation(slopes, config.response.a_linear, opts.fit);

  std::vector<double> ns, measured;
  for (const auto &p : study.points) {
    // Points whose intrinsic noise was clipped to zero carry no
    // sensitivity information.
    if (p.noise.clipped)
      continue;
    ns.push_back(p.photons);
    measured.push_back(p.noise.intrinsic /
                       (opts.f_z * study.fit.model.rotation_per_spin(
                                       p.photons, opts.ideal)));
  }
  study.measured = make_curve(std::move(ns), std::move(measured));
  study.model =
      sensitivity_curve(study.fit.model, opts.photons, opts.f_z, opts.ideal);
  return study;
}

} // namespace nlmetro::analysis
