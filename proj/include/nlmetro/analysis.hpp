#pragma once
// Estimation chain for the correlation-plot experiment: regression of the
// nonlinear against the linear rotation, the saturation fit of the slopes,
// noise decomposition, sensitivity curves and linear/nonlinear crossovers.
// Everything here is a pure function of its inputs.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nlmetro::analysis {

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  //! sqrt(RSS / (n - 2)).
  double residual_std = 0.0;
  std::size_t n = 0;
};

//! Ordinary least squares y = slope x + intercept. Throws
//! InsufficientPoints for fewer than 3 points and DegenerateDesign when all
//! x are equal.
RegressionResult linear_regression(std::span<const double> x,
                                   std::span<const double> y);

//! delta F_z = 1 / (A N^(1/2) + B_eff N^(3/2)), B_eff = B / (1 + N / N_sat),
//! for a polarization F_z probed with N photons and shot-noise-limited
//! angle resolution N^(-1/2) / 2.
struct SensitivityModel {
  double a = 0.0; // rad per atom
  double b = 0.0; // rad per atom per photon
  std::optional<double> n_sat;

  void validate() const;
  //! B N / (1 + N / N_sat); the saturation factor is dropped when `ideal`.
  double nonlinear_coefficient(double photons, bool ideal = false) const;
  //! phi / F_z.
  double rotation_per_spin(double photons, bool ideal = false) const;
  //! delta F_z in spins.
  double spin_noise(double photons, bool ideal = false) const;
};

struct SlopePoint {
  double photons = 0.0;
  double slope = 0.0;
  double stderr_slope = 0.0; // 0: unweighted
};

struct SaturationFitOptions {
  int max_iterations = 200;
  double xtol = 1e-10; // relative parameter change at convergence
  //! N_sat is treated as unidentifiable when the fit puts it beyond this
  //! multiple of the largest photon number, or its relative standard
  //! error exceeds 1.
  double identifiable_range = 30.0;
  //! Relative slope noise not contained in the regression errors (e.g. a
  //! drifting nonlinear gain between campaigns), added in quadrature to
  //! each point's standard error: sigma^2 = se^2 + (r b)^2.
  double relative_slope_noise = 0.0;
};

struct SaturationFit {
  double a_linear = 0.0; // the linear calibration passed in
  //! Nonlinear-probe model: a = 0 (probe at the zero of the linear term).
  SensitivityModel model;
  double b_stderr = 0.0;
  std::optional<double> n_sat_stderr;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero(); // (B, N_sat)
  double reduced_chi2 = 0.0;
  int iterations = 0;
  bool saturation_identified = true;
};

//! Weighted nonlinear least squares of b(N) = (B N / A) / (1 + N / N_sat).
//! Standard errors are scaled by the reduced chi^2. When N_sat is not
//! identifiable (all N << N_sat) a B-only model is returned with
//! saturation_identified = false. Throws InsufficientPoints when there are
//! fewer than 3 distinct photon numbers or they span less than a decade,
//! and NonConvergence when the iteration limit is hit.
SaturationFit fit_saturation(std::span<const SlopePoint> slopes, double a,
                             const SaturationFitOptions &opts = {});

struct VariancePoint {
  double photons = 0.0;
  double variance = 0.0; // var(S_y), photons^2
};

struct VarianceFit {
  double electronic = 0.0; // V_el
  double shot = 0.0;       // coefficient of N, 1 for shot noise
  double technical = 0.0;  // c
  double electronic_stderr = 0.0;
  double shot_stderr = 0.0;
  double technical_stderr = 0.0;
  //! Terms pinned at zero by the non-negativity constraint.
  bool pinned[3] = {false, false, false};
  bool shot_fixed = false;
  //! Photon number where the electronic and shot terms are equal.
  double crossing() const { return shot > 0.0 ? electronic / shot : 0.0; }
};

struct VarianceFitOptions {
  //! Hold the shot coefficient at this value instead of fitting it. With
  //! S_x calibrated in photons the shot term is exactly N (times the
  //! detected fraction), which is how the calibration curve is usually
  //! fitted: var(S_y) = V_el + N (+ c N^2).
  std::optional<double> fixed_shot;
};

//! var(S_y) = V_el + s N + c N^2 with all terms non-negative, least
//! squares in relative residuals (sample variances scatter in proportion
//! to their size). Throws NegativeVariance for a negative input and
//! InsufficientPoints for fewer than 4 points or less than 1.5 decades.
VarianceFit fit_variance_model(std::span<const VariancePoint> points,
                               const VarianceFitOptions &opts = {});

struct ScalingCurve {
  std::vector<double> photons;     // strictly increasing
  std::vector<double> sensitivity; // fractional, delta F_z / F_z
  //! log-log slope between neighbouring points (size n - 1).
  std::vector<double> local_exponents;

  //! Checks the invariants and fills local_exponents. Throws InvalidConfig.
  void finalize();
};

ScalingCurve make_curve(std::vector<double> photons,
                        std::vector<double> sensitivity);

//! Fractional sensitivity of a polarization f_z (default: the whole
//! ensemble) at each photon number.
ScalingCurve sensitivity_curve(const SensitivityModel &model,
                               const std::vector<double> &photons,
                               double f_z = 7e5, bool ideal = false);

struct ExponentFit {
  double exponent = 0.0;
  double stderr_exponent = 0.0;
  std::size_t points = 0;
};

//! Least-squares slope of log sensitivity vs log N over the points with
//! lo <= N <= hi. Throws InsufficientPoints for fewer than 3.
ExponentFit scaling_exponent(const ScalingCurve &curve, double lo, double hi);

enum class CrossoverMode { time_limited, number_limited };

struct ProbeConstants {
  double coefficient = 0.0; // A (linear probe) or B (nonlinear probe)
  double duration = 0.0;    // s; used in time-limited mode
};

struct CrossoverResult {
  double photons = 0.0;     // N*
  double sensitivity = 0.0; // spins, or spins Hz^-1/2 when time-limited
  //! Sensitivity prefactors: sqrt(tau_L)/A and sqrt(tau_NL)/B (time), 1/A
  //! and 1/B (number), so that delta F = p_L N^-1/2 = p_NL N^-3/2.
  double linear_prefactor = 0.0;
  double nonlinear_prefactor = 0.0;
};

//! Closed form N* = p_NL / p_L. Throws NoCrossover if either coefficient
//! is not positive.
CrossoverResult crossover(const ProbeConstants &linear,
                          const ProbeConstants &nonlinear,
                          CrossoverMode mode);
//! Same crossing found by bracketing root search on log N.
CrossoverResult crossover_numeric(const ProbeConstants &linear,
                                  const ProbeConstants &nonlinear,
                                  CrossoverMode mode);

struct NoiseCorrection {
  double observed = 0.0;  // rad
  double intrinsic = 0.0; // rad
  //! 1 - intrinsic / observed.
  double relative_correction = 0.0;
  bool clipped = false;
};

//! (delta phi)^2 = (Delta phi)^2 - V_el / (4 N^2 T_H T_V). A negative
//! difference is clipped to zero and flagged.
NoiseCorrection remove_electronic_noise(double observed_std, double v_el,
                                        double photons, double t_h = 1.0,
                                        double t_v = 1.0);

double mean(std::span<const double> v);
//! Sample standard deviation (n - 1).
double stddev(std::span<const double> v);

} // namespace nlmetro::analysis
