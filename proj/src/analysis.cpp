#include "nlmetro/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "nlmetro/errors.hpp"

namespace nlmetro::analysis {

double mean(std::span<const double> v) {
  if (v.empty())
    throw InsufficientPoints("mean of an empty set");
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2)
    throw InsufficientPoints("standard deviation needs two values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v)
    ss += (x - m) * (x - m);
  return std::sqrt(ss / double(v.size() - 1));
}

RegressionResult linear_regression(std::span<const double> x,
                                   std::span<const double> y) {
  if (x.size() != y.size())
    throw InvalidConfig("linear_regression: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 3)
    throw InsufficientPoints("linear_regression: need at least 3 pairs, got " +
                             std::to_string(n));
  // Centred sums; avoids the cancellation of the textbook formulas when
  // the angles sit far from zero relative to their spread.
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0))
    throw DegenerateDesign("linear_regression: all x values are equal");

  RegressionResult r;
  r.n = n;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    rss += e * e;
  }
  const double s2 = rss / double(n - 2);
  r.residual_std = std::sqrt(s2);
  r.slope_stderr = std::sqrt(s2 / sxx);
  r.intercept_stderr = std::sqrt(s2 * (1.0 / double(n) + mx * mx / sxx));
  return r;
}

// ---------------------------------------------------------------------------

void SensitivityModel::validate() const {
  if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw InvalidConfig("sensitivity model: A and B must be finite and >= 0");
  if (n_sat && !(*n_sat > 0.0))
    throw InvalidConfig("sensitivity model: N_sat must be positive");
  if (a == 0.0 && b == 0.0)
    throw InvalidConfig("sensitivity model: A and B are both zero");
}

double SensitivityModel::nonlinear_coefficient(double photons,
                                               bool ideal) const {
  const double sat = (n_sat && !ideal) ? 1.0 + photons / *n_sat : 1.0;
  return b * photons / sat;
}

double SensitivityModel::rotation_per_spin(double photons, bool ideal) const {
  return 0.5 * (a + nonlinear_coefficient(photons, ideal));
}

double SensitivityModel::spin_noise(double photons, bool ideal) const {
  if (!(photons > 0.0))
    throw InvalidConfig("sensitivity: photon number must be positive");
  // F_z dphi / phi with dphi = 1/(2 sqrt N) and phi = F_z (A + B_eff N)/2
  return 1.0 / (std::sqrt(photons) * (a + nonlinear_coefficient(photons, ideal)));
}

// ---------------------------------------------------------------------------

namespace {

// Residuals of b(N) in log parameters theta = (ln B, ln N_sat), which keeps
// both positive and the problem well scaled.
struct SaturationResiduals : Eigen::DenseFunctor<double> {
  SaturationResiduals(std::span<const SlopePoint> pts, double a)
      : DenseFunctor(2, int(pts.size())), points(pts), a(a) {}

  static double sigma(const SlopePoint &p) {
    return p.stderr_slope > 0.0 ? p.stderr_slope : 1.0;
  }
  double model(const SlopePoint &p, double b, double n_sat) const {
    return b * p.photons / a / (1.0 + p.photons / n_sat);
  }

  int operator()(const InputType &theta, ValueType &f) const {
    const double b = std::exp(theta(0)), n_sat = std::exp(theta(1));
    for (std::size_t i = 0; i < points.size(); ++i)
      f(Eigen::Index(i)) =
          (model(points[i], b, n_sat) - points[i].slope) / sigma(points[i]);
    return 0;
  }
  int df(const InputType &theta, JacobianType &j) const {
    const double b = std::exp(theta(0)), n_sat = std::exp(theta(1));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double m = model(points[i], b, n_sat);
      const double x = points[i].photons / n_sat;
      const auto r = Eigen::Index(i);
      j(r, 0) = m / sigma(points[i]);
      j(r, 1) = m * x / (1.0 + x) / sigma(points[i]);
    }
    return 0;
  }

  std::span<const SlopePoint> points;
  double a;
};

SaturationFit fit_unsaturated(std::span<const SlopePoint> pts, double a) {
  // b = (B / A) N: weighted least squares through the origin.
  double num = 0.0, den = 0.0;
  for (const auto &p : pts) {
    const double w = 1.0 / std::pow(SaturationResiduals::sigma(p), 2);
    num += w * p.photons * p.slope;
    den += w * p.photons * p.photons;
  }
  const double k = num / den;
  double chi2 = 0.0;
  for (const auto &p : pts)
    chi2 += std::pow((k * p.photons - p.slope) / SaturationResiduals::sigma(p),
                     2);
  SaturationFit fit;
  fit.a_linear = a;
  fit.model.b = k * a;
  fit.reduced_chi2 = chi2 / double(pts.size() - 1);
  fit.b_stderr = a * std::sqrt(fit.reduced_chi2 / den);
  fit.covariance(0, 0) = fit.b_stderr * fit.b_stderr;
  fit.saturation_identified = false;
  return fit;
}

} // namespace

SaturationFit fit_saturation(std::span<const SlopePoint> slopes, double a,
                             const SaturationFitOptions &opts) {
  if (!(a > 0.0))
    throw InvalidConfig("fit_saturation: linear coefficient A must be > 0");
  if (!(opts.relative_slope_noise >= 0.0))
    throw InvalidConfig("fit_saturation: relative slope noise must be >= 0");
  std::vector<SlopePoint> pts(slopes.begin(), slopes.end());
  for (auto &p : pts) {
    if (!(p.photons > 0.0) || !std::isfinite(p.slope) || p.stderr_slope < 0.0)
      throw InvalidConfig("fit_saturation: bad slope point");
    p.stderr_slope = std::hypot(p.stderr_slope,
                                opts.relative_slope_noise * p.slope);
  }
  std::sort(pts.begin(), pts.end(),
            [](const auto &l, const auto &r) { return l.photons < r.photons; });

  std::vector<double> distinct;
  for (const auto &p : pts)
    if (distinct.empty() || p.photons > distinct.back())
      distinct.push_back(p.photons);
  if (distinct.size() < 3)
    throw InsufficientPoints("fit_saturation: need 3 distinct photon numbers");
  if (distinct.back() < 10.0 * distinct.front())
    throw InsufficientPoints("fit_saturation: photon numbers span < 1 decade");

  // B from the smallest-N slope; N_sat from where b/N has halved. At low
  // N the slope can be buried in noise (or negative), in which case the
  // unsaturated fit through all points is the better starting value.
  double b0 = pts.front().slope * a / pts.front().photons;
  const bool resolved = pts.front().stderr_slope == 0.0 ||
                        pts.front().slope > 2.0 * pts.front().stderr_slope;
  if (!(b0 > 0.0) || !resolved)
    b0 = fit_unsaturated(pts, a).model.b;
  if (!(b0 > 0.0))
    throw NonConvergence("fit_saturation: slopes show no positive trend");
  double n_sat0 = 10.0 * distinct.back();
  double best = std::numeric_limits<double>::infinity();
  for (const auto &p : pts) {
    const double ratio = p.slope * a / p.photons / b0;
    if (ratio > 0.0 && ratio < 1.0 && std::abs(ratio - 0.5) < best) {
      best = std::abs(ratio - 0.5);
      n_sat0 = p.photons * ratio / (1.0 - ratio);
    }
  }

  SaturationResiduals f(pts, a);
  Eigen::LevenbergMarquardt<SaturationResiduals> lm(f);
  lm.setXtol(opts.xtol);
  lm.setFtol(1e-15);
  lm.setGtol(0.0);
  lm.setMaxfev(opts.max_iterations);
  Eigen::VectorXd theta(2);
  theta << std::log(b0), std::log(n_sat0);
  const auto status = lm.minimize(theta);
  if (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
      status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
      !theta.allFinite())
    throw NonConvergence("fit_saturation: Levenberg-Marquardt did not converge "
                         "(status " + std::to_string(int(status)) + ")");

  SaturationFit fit;
  fit.iterations = int(lm.iterations());
  fit.a_linear = a;
  fit.model.b = std::exp(theta(0));
  fit.model.n_sat = std::exp(theta(1));

  Eigen::VectorXd r(pts.size());
  f(theta, r);
  const double dof = double(pts.size()) - 2.0;
  fit.reduced_chi2 = dof > 0 ? r.squaredNorm() / dof : 0.0;
  Eigen::MatrixXd jac(pts.size(), 2);
  f.df(theta, jac);
  const Eigen::Matrix2d jtj = jac.transpose() * jac;
  const Eigen::FullPivLU<Eigen::Matrix2d> lu(jtj);
  const bool well_posed = lu.isInvertible();
  if (well_posed) {
    // Covariance of theta, then to (B, N_sat) by the chain rule.
    const Eigen::Matrix2d d =
        Eigen::Vector2d(fit.model.b, *fit.model.n_sat).asDiagonal();
    fit.covariance = d * lu.inverse() * d * fit.reduced_chi2;
    fit.b_stderr = std::sqrt(fit.covariance(0, 0));
    fit.n_sat_stderr = std::sqrt(fit.covariance(1, 1));
  }

  const bool identified =
      well_posed && *fit.model.n_sat <= opts.identifiable_range * distinct.back() &&
      *fit.n_sat_stderr <= *fit.model.n_sat;
  if (!identified)
    return fit_unsaturated(pts, a);
  return fit;
}

// ---------------------------------------------------------------------------

VarianceFit fit_variance_model(std::span<const VariancePoint> points,
                               const VarianceFitOptions &opts) {
  if (opts.fixed_shot && !(*opts.fixed_shot >= 0.0))
    throw InvalidConfig("fit_variance_model: fixed shot coefficient must be "
                        ">= 0");
  for (const auto &p : points) {
    if (p.variance < 0.0)
      throw NegativeVariance("fit_variance_model: negative variance at N = " +
                             std::to_string(p.photons));
    if (!(p.photons > 0.0) || !(p.variance > 0.0) || !std::isfinite(p.variance))
      throw InvalidConfig("fit_variance_model: photons and variance must be "
                          "positive and finite");
  }
  if (points.size() < 4)
    throw InsufficientPoints("fit_variance_model: need at least 4 points");
  const auto [lo, hi] = std::minmax_element(
      points.begin(), points.end(),
      [](const auto &l, const auto &r) { return l.photons < r.photons; });
  if (std::log10(hi->photons / lo->photons) < 1.5)
    throw InsufficientPoints("fit_variance_model: photon numbers span < 1.5 "
                             "decades");

  // Relative residuals: row i is basis(N_i) / v_i against a target of 1.
  // Each column is scaled to a largest entry of one for conditioning; the
  // fitted coefficients are divided by the same factors afterwards.
  const auto n = Eigen::Index(points.size());
  Eigen::MatrixXd x(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &p = points[std::size_t(i)];
    x(i, 0) = 1.0 / p.variance;
    x(i, 1) = p.photons / p.variance;
    x(i, 2) = p.photons * p.photons / p.variance;
  }
  double scale[3];
  for (int j = 0; j < 3; ++j) {
    scale[j] = 1.0 / x.col(j).cwiseAbs().maxCoeff();
    x.col(j) *= scale[j];
  }
  Eigen::VectorXd target = Eigen::VectorXd::Ones(n);
  // A fixed shot coefficient moves its column into the target.
  int allowed = 0b111;
  if (opts.fixed_shot) {
    target -= x.col(1) * (*opts.fixed_shot / scale[1]);
    allowed = 0b101;
  }

  // At most three unknowns: the constrained optimum is the best feasible
  // solution among the non-empty active sets.
  double best_rss = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  int best_mask = 0;
  for (int mask = 1; mask < 8; ++mask) {
    if ((mask & ~allowed) != 0)
      continue;
    std::vector<int> cols;
    for (int j = 0; j < 3; ++j)
      if (mask & (1 << j))
        cols.push_back(j);
    Eigen::MatrixXd sub(n, Eigen::Index(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
      sub.col(Eigen::Index(k)) = x.col(cols[k]);
    const Eigen::VectorXd coef = sub.colPivHouseholderQr().solve(target);
    if ((coef.array() < 0.0).any())
      continue;
    const double rss = (sub * coef - target).squaredNorm();
    if (rss < best_rss) {
      best_rss = rss;
      best_mask = mask;
      best.setZero();
      for (std::size_t k = 0; k < cols.size(); ++k)
        best(cols[k]) = coef(Eigen::Index(k));
    }
  }
  if (best_mask == 0)
    throw NonConvergence("fit_variance_model: no feasible solution");

  VarianceFit fit;
  fit.electronic = best(0) * scale[0];
  fit.shot = opts.fixed_shot ? *opts.fixed_shot : best(1) * scale[1];
  fit.technical = best(2) * scale[2];
  fit.shot_fixed = opts.fixed_shot.has_value();
  std::vector<int> cols, all;
  for (int j = 0; j < 3; ++j) {
    if (!(allowed & (1 << j)))
      continue;
    all.push_back(j);
    fit.pinned[j] = !(best_mask & (1 << j));
    if (!fit.pinned[j])
      cols.push_back(j);
  }
  double *err[3] = {&fit.electronic_stderr, &fit.shot_stderr,
                    &fit.technical_stderr};
  // A pinned term still gets an uncertainty, from the unconstrained fit
  // with all free terms, so that "consistent with zero" can be judged.
  const auto m = Eigen::Index(all.size());
  if (n > m) {
    Eigen::MatrixXd full(n, m);
    for (Eigen::Index k = 0; k < m; ++k)
      full.col(k) = x.col(all[std::size_t(k)]);
    const double rss =
        (full * full.colPivHouseholderQr().solve(target) - target).squaredNorm();
    const Eigen::MatrixXd cov =
        (full.transpose() * full).inverse() * (rss / double(n - m));
    for (Eigen::Index k = 0; k < m; ++k)
      if (fit.pinned[all[std::size_t(k)]])
        *err[all[std::size_t(k)]] = std::sqrt(cov(k, k)) * scale[all[std::size_t(k)]];
  }
  const double dof = double(n) - double(cols.size());
  if (dof > 0) {
    Eigen::MatrixXd sub(n, Eigen::Index(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
      sub.col(Eigen::Index(k)) = x.col(cols[k]);
    const Eigen::MatrixXd cov =
        (sub.transpose() * sub).inverse() * (best_rss / dof);
    for (std::size_t k = 0; k < cols.size(); ++k)
      *err[cols[k]] =
          std::sqrt(cov(Eigen::Index(k), Eigen::Index(k))) * scale[cols[k]];
  }
  return fit;
}

// ---------------------------------------------------------------------------

void ScalingCurve::finalize() {
  if (photons.size() != sensitivity.size())
    throw InvalidConfig("scaling curve: size mismatch");
  for (std::size_t i = 0; i < photons.size(); ++i) {
    if (!(sensitivity[i] > 0.0) || !std::isfinite(sensitivity[i]))
      throw InvalidConfig("scaling curve: sensitivities must be positive");
    if (!(photons[i] > 0.0) || (i > 0 && !(photons[i] > photons[i - 1])))
      throw InvalidConfig("scaling curve: N must be positive and strictly "
                          "increasing");
  }
  local_exponents.clear();
  for (std::size_t i = 1; i < photons.size(); ++i)
    local_exponents.push_back(std::log(sensitivity[i] / sensitivity[i - 1]) /
                              std::log(photons[i] / photons[i - 1]));
}

ScalingCurve make_curve(std::vector<double> photons,
                        std::vector<double> sensitivity) {
  ScalingCurve c;
  c.photons = std::move(photons);
  c.sensitivity = std::move(sensitivity);
  c.finalize();
  return c;
}

ScalingCurve sensitivity_curve(const SensitivityModel &model,
                               const std::vector<double> &photons, double f_z,
                               bool ideal) {
  model.validate();
  if (!(f_z > 0.0))
    throw InvalidConfig("sensitivity_curve: F_z must be positive");
  std::vector<double> s;
  s.reserve(photons.size());
  for (double n : photons)
    s.push_back(model.spin_noise(n, ideal) / f_z);
  return make_curve(photons, std::move(s));
}

ExponentFit scaling_exponent(const ScalingCurve &curve, double lo, double hi) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < curve.photons.size(); ++i)
    if (curve.photons[i] >= lo && curve.photons[i] <= hi) {
      lx.push_back(std::log(curve.photons[i]));
      ly.push_back(std::log(curve.sensitivity[i]));
    }
  if (lx.size() < 3)
    throw InsufficientPoints("scaling_exponent: fewer than 3 points in [" +
                             std::to_string(lo) + ", " + std::to_string(hi) +
                             "]");
  const auto r = linear_regression(lx, ly);
  return {r.slope, r.slope_stderr, lx.size()};
}

// ---------------------------------------------------------------------------

namespace {

std::pair<double, double> prefactors(const ProbeConstants &linear,
                                     const ProbeConstants &nonlinear,
                                     CrossoverMode mode) {
  if (!(linear.coefficient > 0.0) || !(nonlinear.coefficient > 0.0))
    throw NoCrossover("crossover: both A and B must be positive");
  if (mode == CrossoverMode::number_limited)
    return {1.0 / linear.coefficient, 1.0 / nonlinear.coefficient};
  if (!(linear.duration > 0.0) || !(nonlinear.duration > 0.0))
    throw InvalidConfig("crossover: probe durations must be positive");
  return {std::sqrt(linear.duration) / linear.coefficient,
          std::sqrt(nonlinear.duration) / nonlinear.coefficient};
}

} // namespace

CrossoverResult crossover(const ProbeConstants &linear,
                          const ProbeConstants &nonlinear, CrossoverMode mode) {
  const auto [pl, pnl] = prefactors(linear, nonlinear, mode);
  CrossoverResult r;
  r.linear_prefactor = pl;
  r.nonlinear_prefactor = pnl;
  r.photons = pnl / pl;
  r.sensitivity = pl / std::sqrt(r.photons);
  return r;
}

CrossoverResult crossover_numeric(const ProbeConstants &linear,
                                  const ProbeConstants &nonlinear,
                                  CrossoverMode mode) {
  const auto [pl, pnl] = prefactors(linear, nonlinear, mode);
  // ln(linear sensitivity) - ln(nonlinear sensitivity) in u = ln N.
  const auto gap = [pl = pl, pnl = pnl](double u) {
    return (std::log(pl) - 0.5 * u) - (std::log(pnl) - 1.5 * u);
  };
  double lo = 0.0, hi = 1.0;
  while (gap(lo) > 0.0)
    lo -= 50.0;
  while (gap(hi) < 0.0)
    hi += 50.0;
  std::uintmax_t iterations = 100;
  const auto [a, b] = boost::math::tools::toms748_solve(
      gap, lo, hi, boost::math::tools::eps_tolerance<double>(52), iterations);
  CrossoverResult r;
  r.linear_prefactor = pl;
  r.nonlinear_prefactor = pnl;
  r.photons = std::exp(0.5 * (a + b));
  r.sensitivity = pl / std::sqrt(r.photons);
  return r;
}

NoiseCorrection remove_electronic_noise(double observed_std, double v_el,
                                        double photons, double t_h,
                                        double t_v) {
  if (!(photons > 0.0) || v_el < 0.0 || observed_std < 0.0 || !(t_h > 0.0) ||
      !(t_v > 0.0))
    throw InvalidConfig("remove_electronic_noise: bad arguments");
  NoiseCorrection c;
  c.observed = observed_std;
  const double electronic = v_el / (4.0 * photons * photons * t_h * t_v);
  const double v = observed_std * observed_std - electronic;
  c.clipped = v < 0.0;
  c.intrinsic = c.clipped ? 0.0 : std::sqrt(v);
  c.relative_correction =
      observed_std > 0.0 ? 1.0 - c.intrinsic / observed_std : 0.0;
  return c;
}

} // namespace nlmetro::analysis
