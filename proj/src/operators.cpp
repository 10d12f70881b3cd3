#include "nlmetro/operators.hpp"

#include <cmath>

#include "nlmetro/angular.hpp"
#include "nlmetro/errors.hpp"

namespace nlmetro::atomic {

namespace {

int parity_sign(int k) { return (k % 2 == 0) ? 1 : -1; }

// <F m | d_q | F' m'> / <J||er||J'> for ground F and excited F', with
// m = m' + q. Standard hyperfine reduction of the fine-structure element.
double lowering_element(int two_j, int two_jp, int two_i, int f, int m,
                        int fp, int mp, int q) {
  if (m != mp + q)
    return 0.0;
  const double hyperfine =
      parity_sign(fp + (two_j + 2 + two_i) / 2) *
      std::sqrt(double((2 * fp + 1) * (two_j + 1))) *
      angular::wigner_6j(two_j, two_jp, 2, 2 * fp, 2 * f, two_i);
  const double angular_part =
      parity_sign(fp - 1 + m) * std::sqrt(double(2 * f + 1)) *
      angular::wigner_3j(2 * fp, 2, 2 * f, 2 * mp, 2 * q, -2 * m);
  return hyperfine * angular_part;
}

Matrix spin_one_embedded(const LevelScheme &scheme, Axis axis) {
  const auto n = static_cast<Eigen::Index>(scheme.size());
  Matrix out = Matrix::Zero(n, n);
  const std::complex<double> i(0.0, 1.0);
  for (int m = -1; m <= 1; ++m) {
    const auto a = static_cast<Eigen::Index>(scheme.ground(1, m));
    if (axis == Axis::z) {
      out(a, a) = double(m);
      continue;
    }
    if (m < 1) {
      // <m+1| f_+ |m> = sqrt(2) for spin 1
      const auto b = static_cast<Eigen::Index>(scheme.ground(1, m + 1));
      const double plus = std::sqrt(2.0);
      if (axis == Axis::x) {
        out(b, a) += 0.5 * plus;
        out(a, b) += 0.5 * plus;
      } else {
        out(b, a) += -0.5 * i * plus;
        out(a, b) += 0.5 * i * plus;
      }
    }
  }
  return out;
}

} // namespace

Matrix OperatorSet::d_up_cartesian(Axis axis) const {
  const double s = 1.0 / std::sqrt(2.0);
  const std::complex<double> i(0.0, 1.0);
  switch (axis) {
  case Axis::x:
    return s * (d_up[0] - d_up[2]);
  case Axis::y:
    return (i * s) * (d_up[0] + d_up[2]);
  default:
    return d_up[1];
  }
}

Matrix OperatorSet::d_down_cartesian(Axis axis) const {
  const double s = 1.0 / std::sqrt(2.0);
  const std::complex<double> i(0.0, 1.0);
  switch (axis) {
  case Axis::x:
    return s * (d_down[0] - d_down[2]);
  case Axis::y:
    return (i * s) * (d_down[0] + d_down[2]);
  default:
    return d_down[1];
  }
}

OperatorSet build_dipole_operators(const LevelScheme &scheme) {
  const auto &data = scheme.data();
  const auto n = static_cast<Eigen::Index>(scheme.size());
  OperatorSet ops;
  for (auto &m : ops.d_up)
    m = Matrix::Zero(n, n);
  for (auto &m : ops.d_down)
    m = Matrix::Zero(n, n);

  for (std::size_t g = 0; g < scheme.size(); ++g) {
    const Level &lg = scheme[g];
    if (lg.excited)
      continue;
    for (std::size_t e = 0; e < scheme.size(); ++e) {
      const Level &le = scheme[e];
      if (!le.excited)
        continue;
      for (int q = -1; q <= 1; ++q) {
        const double low =
            lowering_element(data.ground_j_x2, data.excited_j_x2,
                             data.nuclear_spin_x2, lg.f, lg.m, le.f, le.m, q);
        if (low != 0.0)
          ops.d_down[q + 1](Eigen::Index(g), Eigen::Index(e)) = low;
        // <e|d_q|g> = (-1)^q <g|d_{-q}|e>
        const double up =
            parity_sign(q) *
            lowering_element(data.ground_j_x2, data.excited_j_x2,
                             data.nuclear_spin_x2, lg.f, lg.m, le.f, le.m, -q);
        if (up != 0.0)
          ops.d_up[q + 1](Eigen::Index(e), Eigen::Index(g)) = up;
      }
    }
  }

  const double branching = std::sqrt(double(data.excited_j_x2 + 1) /
                                     double(data.ground_j_x2 + 1));
  for (int k = 0; k < 3; ++k)
    ops.jump[std::size_t(k)] = branching * ops.d_down[std::size_t(k)];

  ops.fx = spin_one_embedded(scheme, Axis::x);
  ops.fy = spin_one_embedded(scheme, Axis::y);
  ops.fz = spin_one_embedded(scheme, Axis::z);
  ops.jx = 0.5 * (ops.fx * ops.fx - ops.fy * ops.fy);
  ops.jy = 0.5 * (ops.fx * ops.fy + ops.fy * ops.fx);
  ops.jz = 0.5 * ops.fz;
  ops.j0 = 0.5 * ops.fz * ops.fz;

  ops.projector_excited = Matrix::Zero(n, n);
  ops.projector_f1 = Matrix::Zero(n, n);
  ops.projector_f2 = Matrix::Zero(n, n);
  for (std::size_t a = 0; a < scheme.size(); ++a) {
    const auto i = Eigen::Index(a);
    if (scheme[a].excited)
      ops.projector_excited(i, i) = 1.0;
    else if (scheme[a].f == 1)
      ops.projector_f1(i, i) = 1.0;
    else
      ops.projector_f2(i, i) = 1.0;
  }
  return ops;
}

Matrix hamiltonian(const LevelScheme &scheme, const OperatorSet &ops,
                   double detuning, const Field &rabi) {
  for (Eigen::Index k = 0; k < 3; ++k)
    if (!std::isfinite(rabi(k).real()) || !std::isfinite(rabi(k).imag()))
      throw InvalidConfig("hamiltonian: non-finite field component");
  if (!std::isfinite(detuning))
    throw InvalidConfig("hamiltonian: non-finite detuning");

  const auto n = static_cast<Eigen::Index>(scheme.size());
  Matrix coupling = Matrix::Zero(n, n);
  for (int k = 0; k < 3; ++k)
    if (rabi(k) != 0.0)
      coupling += rabi(k) * ops.d_up_cartesian(static_cast<Axis>(k));

  Matrix h = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const Level &l = scheme[std::size_t(a)];
    h(a, a) = l.excited ? l.energy - detuning : l.energy;
  }
  // coupling has only excited-ground entries, so the two halves never
  // overlap and every off-diagonal pair is an exact conjugate.
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      if (coupling(r, c) != 0.0) {
        h(r, c) += -0.5 * coupling(r, c);
        h(c, r) += -0.5 * std::conj(coupling(r, c));
      }
  return h;
}

Dissipator::Dissipator(const OperatorSet &ops, double gamma)
    : jump_(ops.jump), gamma_(gamma) {
  if (!(gamma >= 0.0))
    throw InvalidConfig("dissipator: decay rate must be non-negative");
  decay_ = Matrix::Zero(ops.jump[0].rows(), ops.jump[0].cols());
  for (const auto &j : jump_)
    decay_ += j.adjoint() * j;
}

Matrix Dissipator::operator()(const Matrix &rho) const {
  Matrix out = -0.5 * (decay_ * rho + rho * decay_);
  for (const auto &j : jump_)
    out += j * rho * j.adjoint();
  return gamma_ * out;
}

Dissipator liouvillian_dissipator(const OperatorSet &ops, double gamma) {
  return Dissipator(ops, gamma);
}

} // namespace nlmetro::atomic
