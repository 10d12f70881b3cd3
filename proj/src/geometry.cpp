#include "nlmetro/geometry.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "nlmetro/atomic_data.hpp"
#include "nlmetro/errors.hpp"

namespace nlmetro::dynamics {

namespace {

constexpr double pi = atomic::constants::pi;

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

// Nodes are the eigenvalues of the Jacobi matrix, weights mu0 * v_0^2.
GaussRule golub_welsch(const Eigen::VectorXd &diag, const Eigen::VectorXd &sub,
                       double mu0) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw NumericalError("gauss rule: eigen decomposition failed");
  GaussRule rule;
  const auto n = diag.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes.push_back(solver.eigenvalues()(i));
    const double v = solver.eigenvectors()(0, i);
    rule.weights.push_back(mu0 * v * v);
  }
  return rule;
}

void check_order(int n) {
  if (n < 1 || n > 200)
    throw InvalidConfig("gauss rule: order must be in [1, 200]");
}

} // namespace

void BeamGeometry::validate() const {
  if (!positive(waist) || !positive(wavelength))
    throw InvalidConfig("beam: waist and wavelength must be positive");
}

double BeamGeometry::rayleigh_range() const {
  return pi * waist * waist / wavelength;
}

double BeamGeometry::effective_area() const { return 0.5 * pi * waist * waist; }

double BeamGeometry::width(double z) const {
  const double zr = rayleigh_range();
  return waist * std::sqrt(1.0 + (z / zr) * (z / zr));
}

double BeamGeometry::amplitude(double r, double z) const {
  const double w = width(z);
  return std::sqrt(2.0 / (pi * w * w)) * std::exp(-(r * r) / (w * w));
}

double BeamGeometry::phase(double r, double z) const {
  if (!wavefront_phase)
    return 0.0;
  const double zr = rayleigh_range();
  const double k = 2.0 * pi / wavelength;
  // k r^2 / (2 R(z)) with 1/R = z / (z^2 + z_R^2), minus the Gouy phase.
  return 0.5 * k * r * r * z / (z * z + zr * zr) - std::atan(z / zr);
}

std::complex<double> BeamGeometry::mode(double r, double z) const {
  return std::polar(amplitude(r, z), phase(r, z));
}

double BeamGeometry::intensity_scale(double r, double z) const {
  const double a = amplitude(r, z);
  return a * a * effective_area();
}

void CloudGeometry::validate() const {
  if (!(atoms >= 0.0) || !std::isfinite(atoms))
    throw InvalidConfig("cloud: atom number must be non-negative");
  if (!positive(sigma_t) || !positive(sigma_l))
    throw InvalidConfig("cloud: widths must be positive");
}

double CloudGeometry::density(double r, double z) const {
  return atoms / (std::pow(pi, 1.5) * sigma_l * sigma_t * sigma_t) *
         std::exp(-(r * r) / (sigma_t * sigma_t) - (z * z) / (sigma_l * sigma_l));
}

double trap_aspect_ratio(double trap_waist, double trap_wavelength) {
  if (!positive(trap_waist) || !positive(trap_wavelength))
    throw InvalidConfig("trap: waist and wavelength must be positive");
  return std::sqrt(2.0) * pi * trap_waist / trap_wavelength;
}

GaussRule gauss_hermite(int n) {
  check_order(n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int i = 1; i < n; ++i)
    sub(i - 1) = std::sqrt(0.5 * i);
  return golub_welsch(diag, sub, std::sqrt(pi));
}

GaussRule gauss_laguerre(int n) {
  check_order(n);
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int i = 0; i < n; ++i)
    diag(i) = 2.0 * i + 1.0;
  for (int i = 1; i < n; ++i)
    sub(i - 1) = double(i);
  return golub_welsch(diag, sub, 1.0);
}

GaussRule gauss_legendre(int n) {
  check_order(n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int i = 1; i < n; ++i)
    sub(i - 1) = i / std::sqrt(4.0 * i * i - 1.0);
  return golub_welsch(diag, sub, 2.0);
}

std::vector<QuadratureNode> cloud_quadrature(const CloudGeometry &cloud,
                                             int radial, int longitudinal) {
  cloud.validate();
  const GaussRule lag = gauss_laguerre(radial);
  const GaussRule her = gauss_hermite(longitudinal);
  // int n d^3x = N_A (1/sqrt(pi)) int du e^{-u} int dx e^{-x^2}.
  const double norm = 1.0 / std::sqrt(pi);
  std::vector<QuadratureNode> nodes;
  nodes.reserve(std::size_t(radial) * std::size_t(longitudinal));
  for (std::size_t i = 0; i < lag.nodes.size(); ++i)
    for (std::size_t j = 0; j < her.nodes.size(); ++j)
      nodes.push_back({cloud.sigma_t * std::sqrt(lag.nodes[i]),
                       cloud.sigma_l * her.nodes[j],
                       norm * lag.weights[i] * her.weights[j]});
  return nodes;
}

} // namespace nlmetro::dynamics
