#include "nlmetro/master_equation.hpp"

#include <cmath>

#include "nlmetro/errors.hpp"

namespace nlmetro::dynamics {

namespace {

constexpr double kDropTolerance = 1e-15;

bool is_zero(cd v) { return std::abs(v) <= kDropTolerance; }

// (e^{x t} - 1) / x, well behaved as x -> 0.
cd phi1(cd x, double t) {
  const cd z = x * t;
  if (std::abs(z) < 1e-4)
    return t * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)));
  return (std::exp(z) - 1.0) / x;
}

} // namespace

MasterEquation::MasterEquation(const Eigen::VectorXd &energies,
                               const std::vector<bool> &excited,
                               const Matrix &coupling,
                               std::span<const Matrix> jumps, double gamma,
                               const Matrix &probe)
    : n_(int(energies.size())), gamma_(gamma) {
  const auto n = Eigen::Index(n_);
  if (n_ == 0 || excited.size() != std::size_t(n_) || coupling.rows() != n ||
      coupling.cols() != n || probe.rows() != n || probe.cols() != n)
    throw InvalidConfig("master equation: inconsistent operator dimensions");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw InvalidConfig("master equation: decay rate must be finite and >= 0");

  energy_.assign(energies.data(), energies.data() + n_);
  for (bool e : excited)
    excited_.push_back(e ? 1.0 : 0.0);

  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const cd v = coupling(r, c);
      if (is_zero(v))
        continue;
      if (!excited[std::size_t(r)] || excited[std::size_t(c)])
        throw InvalidConfig(
            "master equation: coupling must map ground to excited states");
      coupling_.push_back({int(r), int(c), v});
    }

  Matrix decay = Matrix::Zero(n, n);
  for (const Matrix &j : jumps) {
    if (j.rows() != n || j.cols() != n)
      throw InvalidConfig("master equation: jump operator has wrong size");
    decay += j.adjoint() * j;
  }
  decay_diag_.resize(std::size_t(n_));
  for (Eigen::Index a = 0; a < n; ++a) {
    decay_diag_[std::size_t(a)] = decay(a, a).real();
    for (Eigen::Index b = 0; b < n; ++b)
      if (a != b && !is_zero(decay(a, b)))
        decay_offdiag_.push_back({int(a), int(b), decay(a, b)});
  }

  for (const Matrix &j : jumps) {
    std::vector<Entry> nz;
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c)
        if (!is_zero(j(r, c)))
          nz.push_back({int(r), int(c), j(r, c)});
    for (const Entry &a : nz)
      for (const Entry &b : nz)
        jumps_.push_back(
            {a.row, b.row, a.col, b.col, gamma * a.value * std::conj(b.value)});
  }

  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      if (!is_zero(probe(r, c)))
        probe_.push_back({int(r), int(c), probe(r, c)});

  build_support();
  // Feeding terms whose source can never be populated are dead weight.
  std::erase_if(jumps_, [&](const JumpTerm &t) {
    return !in_support(t.in_row, t.in_col);
  });

  exact_free_ = decay_offdiag_.empty();
  for (const JumpTerm &t : jumps_)
    if (decay_diag_[std::size_t(t.out_row)] != 0.0 ||
        decay_diag_[std::size_t(t.out_col)] != 0.0)
      exact_free_ = false;
}

cd MasterEquation::diag_rate(int a, double detuning) const {
  const auto i = std::size_t(a);
  return {energy_[i] - detuning * excited_[i], -0.5 * gamma_ * decay_diag_[i]};
}

void MasterEquation::build_support() {
  const std::size_t n = std::size_t(n_);
  support_mask_.assign(n * n, 0);
  auto at = [&](int a, int b) -> char & {
    return support_mask_[std::size_t(a) * n + std::size_t(b)];
  };
  for (int a = 0; a < n_; ++a)
    at(a, a) = 1;

  // Fixed point of "if (a, b) can be nonzero, so can everything the
  // Liouvillian maps it to"; the generator links a <-> k on either side.
  std::vector<std::pair<int, int>> links;
  for (const Coupling &c : coupling_)
    links.push_back({c.excited, c.ground});
  for (const Entry &k : decay_offdiag_)
    links.push_back({k.row, k.col});
  bool changed = true;
  while (changed) {
    changed = false;
    auto mark = [&](int a, int b) {
      if (!at(a, b)) {
        at(a, b) = 1;
        changed = true;
      }
    };
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) {
        if (!at(a, b))
          continue;
        for (const auto &[u, v] : links) {
          if (a == u)
            mark(v, b);
          if (a == v)
            mark(u, b);
          if (b == u)
            mark(a, v);
          if (b == v)
            mark(a, u);
        }
      }
    for (const JumpTerm &t : jumps_)
      if (at(t.in_row, t.in_col))
        mark(t.out_row, t.out_col);
  }

  support_.assign(n, {});
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      if (at(a, b))
        support_[std::size_t(a)].push_back(b);
}

bool MasterEquation::in_support(int a, int b) const {
  return support_mask_[std::size_t(a) * std::size_t(n_) + std::size_t(b)] != 0;
}

bool MasterEquation::supports(const Matrix &rho, double tol) const {
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      if (!in_support(a, b) && std::abs(rho(a, b)) > tol)
        return false;
  return true;
}

std::size_t MasterEquation::support_size() const {
  std::size_t k = 0;
  for (char c : support_mask_)
    k += std::size_t(c);
  return k;
}

void MasterEquation::offdiagonal(cd drive, const cd *rho, cd *out,
                                 Workspace &ws) const {
  const std::size_t n = std::size_t(n_);
  cd *z = ws.product.data();
  for (std::size_t a = 0; a < n; ++a)
    for (int c : support_[a])
      z[a * n + std::size_t(c)] = 0.0;

  const cd off(0.0, -0.5 * gamma_);
  for (const Entry &k : decay_offdiag_) {
    const cd v = off * k.value;
    const cd *src = rho + std::size_t(k.col) * n;
    cd *dst = z + std::size_t(k.row) * n;
    for (int c : support_[std::size_t(k.row)])
      dst[c] += v * src[c];
  }
  if (drive != 0.0) {
    const cd up = -0.5 * drive;
    const cd down = -0.5 * std::conj(drive);
    for (const Coupling &k : coupling_) {
      const cd he = up * k.value;              // H(e, g)
      const cd hg = down * std::conj(k.value); // H(g, e)
      const cd *rg = rho + std::size_t(k.ground) * n;
      const cd *re = rho + std::size_t(k.excited) * n;
      cd *ze = z + std::size_t(k.excited) * n;
      cd *zg = z + std::size_t(k.ground) * n;
      // rows e and g share their support by construction
      for (int c : support_[std::size_t(k.excited)]) {
        ze[c] += he * rg[c];
        zg[c] += hg * re[c];
      }
    }
  }

  std::fill(out, out + n * n, cd(0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (int ci : support_[a]) {
      const std::size_t c = std::size_t(ci);
      const cd d = z[a * n + c] - std::conj(z[c * n + a]);
      out[a * n + c] = cd(d.imag(), -d.real()); // -i d
    }

  for (const JumpTerm &t : jumps_)
    out[std::size_t(t.out_row) * n + std::size_t(t.out_col)] +=
        t.coeff * rho[std::size_t(t.in_row) * n + std::size_t(t.in_col)];
}

void MasterEquation::rates(double detuning, std::vector<cd> &out) const {
  const std::size_t n = std::size_t(n_);
  out.resize(n * n);
  for (std::size_t a = 0; a < n; ++a) {
    const cd ga = diag_rate(int(a), detuning);
    for (std::size_t b = 0; b < n; ++b) {
      const cd d = ga - std::conj(diag_rate(int(b), detuning));
      out[a * n + b] = cd(d.imag(), -d.real());
    }
  }
}

void MasterEquation::interaction(cd drive, const cd *rho, cd *out,
                                 Workspace &ws) const {
  offdiagonal(drive, rho, out, ws);
}

void MasterEquation::derivative(cd drive, double detuning, const cd *rho,
                                cd *drho, Workspace &ws) const {
  offdiagonal(drive, rho, drho, ws);
  const std::size_t n = std::size_t(n_);
  for (std::size_t a = 0; a < n; ++a) {
    const cd ga = diag_rate(int(a), detuning);
    for (int ci : support_[a]) {
      const std::size_t c = std::size_t(ci);
      const cd d = ga - std::conj(diag_rate(ci, detuning));
      drho[a * n + c] += cd(d.imag(), -d.real()) * rho[a * n + c];
    }
  }
}

cd MasterEquation::probe_expectation(const cd *rho) const {
  const std::size_t n = std::size_t(n_);
  cd sum = 0.0;
  for (const Entry &p : probe_)
    sum += rho[std::size_t(p.col) * n + std::size_t(p.row)] * p.value;
  return sum;
}

void MasterEquation::free_evolve(double detuning, double dt, cd *rho) const {
  if (!exact_free_)
    throw NumericalError(
        "master equation: no closed-form free evolution for this model");
  const std::size_t n = std::size_t(n_);
  std::vector<cd> start(rho, rho + n * n);
  std::vector<cd> rate(n);
  for (std::size_t a = 0; a < n; ++a)
    rate[a] = diag_rate(int(a), detuning);

  // Coherence rates lambda_ab = -i (g_a - conj(g_b)).
  auto lambda = [&](std::size_t a, std::size_t b) {
    const cd d = rate[a] - std::conj(rate[b]);
    return cd(d.imag(), -d.real());
  };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      rho[a * n + b] = std::exp(lambda(a, b) * dt) * start[a * n + b];

  // Fed elements never decay and their sources are never fed, so
  // rho_ab(t) += coeff rho_pq(0) e^{l_ab t} (e^{(l_pq - l_ab) t} - 1)/(l_pq - l_ab).
  for (const JumpTerm &t : jumps_) {
    const auto a = std::size_t(t.out_row), b = std::size_t(t.out_col);
    const auto p = std::size_t(t.in_row), q = std::size_t(t.in_col);
    const cd src = start[p * n + q];
    if (src == 0.0)
      continue;
    const cd lab = lambda(a, b);
    rho[a * n + b] +=
        t.coeff * src * std::exp(lab * dt) * phi1(lambda(p, q) - lab, dt);
  }
}

MasterEquation make_probe_model(const atomic::LevelScheme &scheme,
                                const atomic::OperatorSet &ops,
                                const ProbePolarization &pol) {
  const auto n = Eigen::Index(scheme.size());
  Eigen::VectorXd energies(n);
  std::vector<bool> excited(std::size_t(n), false);
  for (Eigen::Index a = 0; a < n; ++a) {
    energies(a) = scheme[std::size_t(a)].energy;
    excited[std::size_t(a)] = scheme[std::size_t(a)].excited;
  }
  Matrix coupling = Matrix::Zero(n, n);
  Matrix probe = Matrix::Zero(n, n);
  for (int k = 0; k < 3; ++k) {
    const auto axis = static_cast<atomic::Axis>(k);
    if (pol.input(k) != 0.0)
      coupling += pol.input(k) * ops.d_up_cartesian(axis);
    if (pol.analysis(k) != 0.0)
      probe += std::conj(pol.analysis(k)) * ops.d_down_cartesian(axis);
  }
  return MasterEquation(energies, excited, coupling,
                        std::span<const Matrix>(ops.jump.data(), 3),
                        scheme.gamma(), probe);
}

} // namespace nlmetro::dynamics
