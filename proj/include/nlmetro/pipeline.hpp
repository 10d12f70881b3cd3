#pragma once
// The full estimation chain of the correlation-plot experiment: one
// campaign per nonlinear photon number, regression of phi_NL on phi_L,
// saturation fit of the slopes and the resulting sensitivity curve.

#include <cstdint>
#include <vector>

#include "nlmetro/analysis.hpp"
#include "nlmetro/experiment.hpp"

namespace nlmetro::analysis {

struct CalibrationPoint {
  double photons = 0.0;
  RegressionResult regression; // phi_NL against phi_L, samples with atoms
  NoiseCorrection noise;       // residual std -> intrinsic delta phi_NL
  double eta_mean = 0.0;
  double eta_stderr = 0.0;
  double control_phi_l = 0.0;  // mean over N_A = 0 records
  double control_phi_nl = 0.0;
  double control_phi_l_stderr = 0.0;
  double control_phi_nl_stderr = 0.0;
};

CalibrationPoint analyze_campaign(const experiment::Campaign &campaign,
                                  const experiment::PolarimeterModel &pol);

struct StudyOptions {
  std::vector<double> photons; // nonlinear photon numbers, increasing
  experiment::CampaignOptions campaign;
  double f_z = 7e5; // polarization the sensitivity refers to
  //! Evaluate the sensitivity without the saturation factor.
  bool ideal = false;
  SaturationFitOptions fit;
};

struct CalibrationStudy {
  std::vector<CalibrationPoint> points;
  SaturationFit fit;
  //! delta phi_NL (intrinsic, measured) over the fitted rotation at f_z.
  ScalingCurve measured;
  //! Fitted model with delta phi = N^(-1/2) / 2.
  ScalingCurve model;
};

//! Campaign k is seeded with campaign_seed(seed, k).
CalibrationStudy run_calibration_study(const experiment::SequenceConfig &config,
                                       const StudyOptions &opts,
                                       std::uint64_t seed);

std::uint64_t campaign_seed(std::uint64_t seed, std::size_t k);

} // namespace nlmetro::analysis
