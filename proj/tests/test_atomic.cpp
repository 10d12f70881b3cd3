#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Eigenvalues>

#include "nlmetro/angular.hpp"
#include "nlmetro/atomic_data.hpp"
#include "nlmetro/errors.hpp"
#include "nlmetro/level_scheme.hpp"
#include "nlmetro/operators.hpp"

using namespace nlmetro;
using namespace nlmetro::atomic;
using cd = std::complex<double>;

namespace {

const LevelScheme &scheme() {
  static const LevelScheme s = build_level_scheme();
  return s;
}

const OperatorSet &ops() {
  static const OperatorSet o = build_dipole_operators(scheme());
  return o;
}

Matrix random_density(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const auto dim = static_cast<Eigen::Index>(n);
  Matrix a(dim, dim);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      a(i, j) = cd(g(rng), g(rng));
  Matrix rho = a * a.adjoint();
  return rho / rho.trace().real();
}

} // namespace

TEST_CASE("wigner symbols match tabulated values") {
  // (1 1 0; 1 -1 0) = 1/sqrt(3), (1 1 2; 0 0 0) = sqrt(2/15),
  // (1/2 1/2 1; 1/2 -1/2 0) = 1/sqrt(6), {1 1 1; 1 1 1} = 1/6.
  CHECK(angular::wigner_3j(2, 2, 0, 2, -2, 0) ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(angular::wigner_3j(2, 2, 4, 0, 0, 0) ==
        doctest::Approx(std::sqrt(2.0 / 15.0)).epsilon(1e-14));
  CHECK(angular::wigner_3j(1, 1, 2, 1, -1, 0) ==
        doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(angular::wigner_6j(2, 2, 2, 2, 2, 2) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  // projections that do not add up, and triangle violations
  CHECK(angular::wigner_3j(2, 2, 2, 2, 2, 0) == 0.0);
  CHECK(angular::wigner_3j(2, 2, 6, 0, 0, 0) == 0.0);
}

TEST_CASE("3j orthogonality") {
  // sum_{m1 m2} (2j3+1) (j1 j2 j3; m1 m2 m3)(j1 j2 j3'; m1 m2 m3') = delta
  const int j1 = 3, j2 = 2; // 3/2 and 1
  for (int j3 = 1; j3 <= 5; j3 += 2)
    for (int j3p = 1; j3p <= 5; j3p += 2)
      for (int m3 = -j3; m3 <= j3; m3 += 2) {
        if (std::abs(m3) > j3p)
          continue;
        double sum = 0.0;
        for (int m1 = -j1; m1 <= j1; m1 += 2)
          for (int m2 = -j2; m2 <= j2; m2 += 2)
            sum += (j3 + 1) * angular::wigner_3j(j1, j2, j3, m1, m2, m3) *
                   angular::wigner_3j(j1, j2, j3p, m1, m2, m3);
        CHECK(sum == doctest::Approx(j3 == j3p ? 1.0 : 0.0).epsilon(1e-13));
      }
}

TEST_CASE("level scheme layout") {
  const auto &s = scheme();
  REQUIRE(s.size() == 24);
  int ground = 0, excited = 0;
  for (const auto &l : s.levels())
    (l.excited ? excited : ground)++;
  CHECK(ground == 8);
  CHECK(excited == 16);
  CHECK(s[s.excited(0, 0)].energy == 0.0);
  CHECK(s.gamma() / (2 * constants::pi) == doctest::Approx(6.07e6).epsilon(0.005));
  CHECK(s.ground_splitting() / (2 * constants::pi) ==
        doctest::Approx(6834.682610904e6).epsilon(1e-12));
  // F'=3 lies 266.65 + 156.95 + 72.22 MHz above F'=0
  CHECK((s.excited_offset(3) - s.excited_offset(0)) / (2 * constants::pi) ==
        doctest::Approx(495.8e6).epsilon(1e-3));
}

TEST_CASE("decay rate implied by the dipole element") {
  const auto data = load_default_atomic_data();
  const double gamma = decay_rate_from_dipole(data);
  CHECK(gamma / (2 * constants::pi * data.linewidth_hz) ==
        doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("dipole selection rules") {
  const auto &s = scheme();
  const auto &o = ops();
  for (int q = -1; q <= 1; ++q)
    for (std::size_t e = 0; e < s.size(); ++e)
      for (std::size_t g = 0; g < s.size(); ++g) {
        const double v = std::abs(o.d_up[q + 1](Eigen::Index(e), Eigen::Index(g)));
        const bool allowed = s[e].excited && !s[g].excited &&
                             s[e].m == s[g].m + q &&
                             std::abs(s[e].f - s[g].f) <= 1;
        if (!allowed)
          CHECK(v == 0.0);
      }
  for (int m = -2; m <= 2; ++m)
    for (int q = 0; q < 3; ++q)
      CHECK(o.d_up[q](Eigen::Index(s.excited(0, 0)),
                      Eigen::Index(s.ground(2, m))) == 0.0);
  CHECK(std::abs(o.d_up[2](Eigen::Index(s.excited(2, 2)),
                           Eigen::Index(s.ground(1, 1)))) > 0.1);
  // d_q^dag = (-1)^q d_{-q}
  for (int q = -1; q <= 1; ++q)
    CHECK((o.d_down[q + 1] - (q == 0 ? 1.0 : -1.0) * o.d_up[1 - q].adjoint()).norm() < 1e-15);
}

TEST_CASE("dipole sum rules") {
  // Every excited sublevel has the same total strength to the ground
  // states, every ground sublevel the same to the excited states, and the
  // two totals are in the ratio of the multiplicities 16 / 8.
  const auto &s = scheme();
  const auto &o = ops();
  auto strength = [&](std::size_t a) {
    double sum = 0.0;
    for (int q = 0; q < 3; ++q)
      for (std::size_t b = 0; b < s.size(); ++b)
        sum += std::norm(s[a].excited ? o.d_up[q](Eigen::Index(a), Eigen::Index(b))
                                      : o.d_up[q](Eigen::Index(b), Eigen::Index(a)));
    return sum;
  };
  const double ground_total = strength(s.ground(1, 0));
  const double excited_total = strength(s.excited(3, 0));
  for (std::size_t a = 0; a < s.size(); ++a)
    CHECK(strength(a) ==
          doctest::Approx(s[a].excited ? excited_total : ground_total).epsilon(1e-12));
  CHECK(ground_total / excited_total == doctest::Approx(2.0).epsilon(1e-12));

  Matrix decay = Matrix::Zero(24, 24);
  for (const auto &j : o.jump)
    decay += j.adjoint() * j;
  CHECK((decay - o.projector_excited).norm() < 1e-12);
}

TEST_CASE("F=1 spin operators") {
  const auto &o = ops();
  Matrix comm = o.fx * o.fy - o.fy * o.fx;
  CHECK((comm - cd(0, 1) * o.fz).norm() < 1e-12);
  Matrix casimir = o.fx * o.fx + o.fy * o.fy + o.fz * o.fz;
  CHECK((casimir - 2.0 * o.projector_f1).norm() < 1e-12);
}

TEST_CASE("hamiltonian") {
  const auto &s = scheme();
  const auto &o = ops();
  const double detuning = 2 * constants::pi * 462e6;

  SUBCASE("zero field is diagonal") {
    Matrix h = hamiltonian(s, o, detuning, Field::Zero());
    Matrix off = h;
    off.diagonal().setZero();
    CHECK(off.norm() == 0.0);
    for (std::size_t a = 0; a < s.size(); ++a)
      CHECK(h(Eigen::Index(a), Eigen::Index(a)).real() ==
            (s[a].excited ? s[a].energy - detuning : s[a].energy));
  }
  SUBCASE("hermitian for a random field") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1e8);
    for (int trial = 0; trial < 5; ++trial) {
      Field f(cd(g(rng), g(rng)), cd(g(rng), g(rng)), cd(g(rng), g(rng)));
      Matrix h = hamiltonian(s, o, detuning, f);
      CHECK((h - h.adjoint()).norm() == 0.0);
    }
  }
  SUBCASE("two-level truncation gives the Rabi splitting") {
    // |1,+1> and |F'=2,+2> under sigma+ light, e_+ = -(x + i y)/sqrt(2):
    // splitting sqrt(delta^2 + |Omega d|^2) with the block's own elements.
    const double omega = 2 * constants::pi * 50e6;
    Field f = -omega / std::sqrt(2.0) * Field(1.0, cd(0, 1), 0.0);
    Matrix h = hamiltonian(s, o, detuning, f);
    const auto g = Eigen::Index(s.ground(1, 1));
    const auto e = Eigen::Index(s.excited(2, 2));
    Eigen::Matrix2cd block;
    block << h(g, g), h(g, e), h(e, g), h(e, e);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(block);
    const double split = es.eigenvalues()(1) - es.eigenvalues()(0);
    const double delta = s[std::size_t(e)].energy - detuning;
    const double coupling = omega * std::abs(o.d_up[2](e, g));
    CHECK(split == doctest::Approx(std::hypot(delta, coupling)).epsilon(1e-12));
  }
  SUBCASE("non-finite field is rejected") {
    Field f(std::nan(""), 0.0, 0.0);
    CHECK_THROWS_AS(hamiltonian(s, o, detuning, f), InvalidConfig);
  }
}

TEST_CASE("dissipator") {
  const auto &s = scheme();
  const Dissipator diss = liouvillian_dissipator(ops(), s.gamma());

  SUBCASE("ground-state density matrices are stationary") {
    Matrix rho = Matrix::Zero(24, 24);
    rho.topLeftCorner(8, 8) = random_density(8, 3);
    CHECK(diss(rho).norm() == 0.0);
  }
  SUBCASE("trace and hermiticity preserved") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Matrix out = diss(random_density(24, seed));
      CHECK(std::abs(out.trace()) < 1e-9 * s.gamma());
      CHECK((out - out.adjoint()).norm() < 1e-9 * s.gamma());
    }
  }
  SUBCASE("stretched excited state decays at gamma into |2,2>") {
    const auto e = Eigen::Index(s.excited(3, 3));
    Matrix rho = Matrix::Zero(24, 24);
    rho(e, e) = 1.0;
    Matrix out = diss(rho);
    CHECK(out(e, e).real() == doctest::Approx(-s.gamma()).epsilon(1e-12));
    const auto g = Eigen::Index(s.ground(2, 2));
    CHECK(out(g, g).real() == doctest::Approx(s.gamma()).epsilon(1e-12));
  }
}

TEST_CASE("atomic data validation") {
  CHECK_THROWS_AS(load_atomic_data("/nonexistent/rb.conf"), ConfigError);
}
